use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::{Model, RnngError};
use crate::neural::{log_softmax_masked, Graph, LstmState, Scalar, Var};
use crate::persistent::PStack;
use crate::transitions::{apply, valid_actions, Action, ParserState, TransitionError, Validity};
use crate::treebank::Label;

#[derive(Debug, Clone)]
struct StackEntry {
    vector: Var,
    /// Stack LSTM state after this entry was pushed.
    state: LstmState,
}

/// A partial derivation together with its encoder states.
#[derive(Debug, Clone)]
pub struct Hypothesis {
    pub state: ParserState,
    pub log_prob: f64,
    stack: PStack<StackEntry>,
    actions: Option<LstmState>,
}

/// Encodes one utterance and scores derivations of it on a shared graph.
pub struct Session<'a, T: Scalar> {
    model: &'a Model<T>,
    pub graph: Graph<'a, T>,
    tokens: Vec<String>,
    token_vecs: Vec<Var>,
    /// `buffer_tops[p]`: buffer encoding when tokens `p..` remain.
    buffer_tops: Vec<Var>,
    stack_base: Option<LstmState>,
}

impl<'a, T: Scalar> Session<'a, T> {
    /// Evaluation session over the model's own parameters.
    pub fn new(model: &'a Model<T>, tokens: &[String]) -> Result<Session<'a, T>, RnngError> {
        Session::with_graph(model, Graph::new(&model.store), tokens)
    }

    /// Session on a caller-supplied graph, e.g. a training graph or one
    /// over perturbed parameters.
    pub fn with_graph(model: &'a Model<T>, mut graph: Graph<'a, T>, tokens: &[String]) -> Result<Session<'a, T>, RnngError> {
        if tokens.is_empty() {
            return Err(RnngError::EmptyUtterance);
        }
        let net = &model.net;
        let mut token_vecs = Vec::with_capacity(tokens.len());
        for id in model.token_ids(tokens) {
            let e = net.word_emb.lookup(&mut graph, id)?;
            let p = net.token_proj.apply(&mut graph, &[e])?;
            token_vecs.push(graph.tanh(p));
        }
        let mut buffer_tops = Vec::new();
        if let (Some(lstm), Some(guard)) = (&net.buffer, net.buffer_guard) {
            let zero = lstm.zero_state(&mut graph);
            let g = graph.param(guard);
            let mut state = lstm.step(&mut graph, &zero, g)?;
            buffer_tops = alloc::vec![state.top(); tokens.len() + 1];
            for i in (0..tokens.len()).rev() {
                state = lstm.step(&mut graph, &state, token_vecs[i])?;
                buffer_tops[i] = state.top();
            }
        }
        let stack_base = match (&net.stack, net.stack_guard) {
            (Some(lstm), Some(guard)) => {
                let zero = lstm.zero_state(&mut graph);
                let g = graph.param(guard);
                Some(lstm.step(&mut graph, &zero, g)?)
            }
            _ => None,
        };
        Ok(Session { model, graph, tokens: tokens.to_vec(), token_vecs, buffer_tops, stack_base })
    }

    pub fn model(&self) -> &'a Model<T> {
        self.model
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn initial(&mut self) -> Result<Hypothesis, RnngError> {
        let state = ParserState::new(&self.tokens, self.model.config.max_open)?;
        let actions = match (&self.model.net.actions, self.model.net.action_guard) {
            (Some(lstm), Some(guard)) => {
                let zero = lstm.zero_state(&mut self.graph);
                let g = self.graph.param(guard);
                Some(lstm.step(&mut self.graph, &zero, g)?)
            }
            _ => None,
        };
        Ok(Hypothesis { state, log_prob: 0.0, stack: PStack::new(), actions })
    }

    /// Top hidden states of the enabled encoders, in stack, buffer, action
    /// order.
    pub fn features(&mut self, hyp: &Hypothesis) -> Vec<Var> {
        let mut out = Vec::with_capacity(3);
        if let Some(base) = &self.stack_base {
            out.push(hyp.stack.peek().map_or(base.top(), |e| e.state.top()));
        }
        if !self.buffer_tops.is_empty() {
            out.push(self.buffer_tops[hyp.state.buffer_position()]);
        }
        if let Some(a) = &hyp.actions {
            out.push(a.top());
        }
        out
    }

    /// State summary fed to the action scorer.
    pub fn summary(&mut self, hyp: &Hypothesis) -> Result<Var, RnngError> {
        let parts = self.features(hyp);
        let s = self.model.net.summary.apply(&mut self.graph, &parts)?;
        let s = self.graph.relu(s);
        Ok(self.graph.dropout(s))
    }

    /// Unnormalized scores over the whole action inventory.
    pub fn logits(&mut self, hyp: &Hypothesis) -> Result<Var, RnngError> {
        let s = self.summary(hyp)?;
        Ok(self.model.net.scorer.apply(&mut self.graph, &[s])?)
    }

    /// Inventory mask of the valid actions; `None` for a finished derivation.
    pub fn mask(&self, hyp: &Hypothesis) -> Option<Vec<bool>> {
        match valid_actions(&hyp.state) {
            Validity::Terminal => None,
            Validity::Valid(v) => Some(self.model.actions().iter().map(|a| v.allows(a)).collect()),
        }
    }

    /// Log-probabilities of all inventory actions (masked ones are `-inf`);
    /// `None` for a finished derivation.
    pub fn log_probs(&mut self, hyp: &Hypothesis) -> Result<Option<Vec<f64>>, RnngError> {
        let Some(mask) = self.mask(hyp) else { return Ok(None) };
        if !mask.contains(&true) {
            return Err(TransitionError::IncompleteDerivation.into());
        }
        let logits = self.logits(hyp)?;
        let lp = log_softmax_masked(self.graph.value(logits), &mask);
        Ok(Some(lp.into_iter().map(|x| x.as_f64()).collect()))
    }

    /// Vector of an open non-terminal.
    pub fn label_vector(&mut self, label: &Label) -> Result<Var, RnngError> {
        let idx = self.model.label_index(label).ok_or_else(|| RnngError::UnknownLabel(label.to_string()))?;
        let e = self.model.net.label_emb.lookup(&mut self.graph, idx)?;
        let p = self.model.net.nt_proj.apply(&mut self.graph, &[e])?;
        Ok(self.graph.tanh(p))
    }

    /// Folds a reduced constituent into one vector: a bidirectional LSTM
    /// over the label vector followed by the children in order.
    pub fn compose(&mut self, label: Var, children: &[Var]) -> Result<Var, RnngError> {
        if children.is_empty() {
            return Err(RnngError::EmptyChildren);
        }
        let composer = self
            .model
            .net
            .composer
            .as_ref()
            .ok_or(RnngError::InvalidConfig("composition needs the stack encoder"))?;
        let mut seq = Vec::with_capacity(children.len() + 1);
        seq.push(label);
        seq.extend_from_slice(children);
        Ok(composer.encode(&mut self.graph, &seq)?)
    }

    fn push(&mut self, stack: &PStack<StackEntry>, vector: Var) -> Result<PStack<StackEntry>, RnngError> {
        let (Some(lstm), Some(base)) = (&self.model.net.stack, &self.stack_base) else {
            return Ok(stack.clone());
        };
        let below = stack.peek().map_or(base, |e| &e.state);
        let state = lstm.step(&mut self.graph, below, vector)?;
        Ok(stack.push(StackEntry { vector, state }))
    }

    /// Successor hypothesis; `log_prob` is carried over unchanged.
    pub fn advance(&mut self, hyp: &Hypothesis, action: &Action) -> Result<Hypothesis, RnngError> {
        let a_idx = self.model.action_index(action).ok_or_else(|| match action {
            Action::Nt(l) => RnngError::UnknownLabel(l.to_string()),
            _ => RnngError::InvalidConfig("action inventory is missing SHIFT or REDUCE"),
        })?;
        let children = hyp.state.top_open_children();
        let state = apply(&hyp.state, action)?;
        let stack = if self.stack_base.is_some() {
            match action {
                Action::Nt(label) => {
                    let v = self.label_vector(label)?;
                    self.push(&hyp.stack, v)?
                }
                Action::Shift => {
                    let v = self.token_vecs[hyp.state.buffer_position()];
                    self.push(&hyp.stack, v)?
                }
                Action::Reduce => {
                    let k = children.unwrap_or(0);
                    let mut rest = hyp.stack.clone();
                    let mut kids = Vec::with_capacity(k);
                    for _ in 0..k {
                        let (e, below) = rest.pop().ok_or(TransitionError::IncompleteDerivation)?;
                        kids.push(e.vector);
                        rest = below;
                    }
                    kids.reverse();
                    let (open, below) = rest.pop().ok_or(TransitionError::IncompleteDerivation)?;
                    let label = open.vector;
                    let below = below.clone();
                    let v = self.compose(label, &kids)?;
                    self.push(&below, v)?
                }
            }
        } else {
            hyp.stack.clone()
        };
        let actions = match (&self.model.net.actions, &hyp.actions) {
            (Some(lstm), Some(prev)) => {
                let e = self.model.net.action_emb.lookup(&mut self.graph, a_idx)?;
                Some(lstm.step(&mut self.graph, prev, e)?)
            }
            _ => None,
        };
        Ok(Hypothesis { state, log_prob: hyp.log_prob, stack, actions })
    }
}
