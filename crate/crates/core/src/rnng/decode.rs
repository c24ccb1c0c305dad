use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;

use super::{Hypothesis, Model, RnngError, Session};
use crate::neural::Scalar;
use crate::transitions::{Action, TransitionError};
use crate::treebank::Tree;

#[derive(Debug, Clone, PartialEq)]
pub struct Parse {
    pub tree: Tree,
    pub actions: Vec<Action>,
    /// Sum of the per-step log-probabilities.
    pub log_prob: f64,
}

fn finish(hyp: &Hypothesis) -> Result<Parse, RnngError> {
    let tree = hyp.state.tree().ok_or(TransitionError::IncompleteDerivation)?;
    Ok(Parse { tree, actions: hyp.state.history(), log_prob: hyp.log_prob })
}

fn completes(hyp: &Hypothesis, action: &Action) -> bool {
    *action == Action::Reduce && hyp.state.open_count() == 1 && hyp.state.buffer().is_empty()
}

/// Picks the most probable valid action at every step. Ties go to the
/// action listed first in the inventory.
pub fn parse_greedy<T: Scalar>(model: &Model<T>, tokens: &[String]) -> Result<Parse, RnngError> {
    let mut session = Session::new(model, tokens)?;
    let mut hyp = session.initial()?;
    while let Some(lp) = session.log_probs(&hyp)? {
        let mut best: Option<(usize, f64)> = None;
        for (i, &p) in lp.iter().enumerate() {
            if p == f64::NEG_INFINITY {
                continue;
            }
            let score = hyp.log_prob + p;
            if best.map_or(true, |(_, s)| score > s) {
                best = Some((i, score));
            }
        }
        let (i, score) = best.ok_or(TransitionError::IncompleteDerivation)?;
        hyp = session.advance(&hyp, &model.actions()[i])?;
        hyp.log_prob = score;
    }
    finish(&hyp)
}

/// Beam search keeping `k` partial derivations and up to `k` finished ones.
/// Scores are unnormalized sums of log-probabilities. The search stops once
/// no partial derivation can beat the `k`-th finished one. Results are
/// ordered best first.
pub fn parse_beam<T: Scalar>(model: &Model<T>, tokens: &[String], k: usize) -> Result<Vec<Parse>, RnngError> {
    let k = k.max(1);
    let mut session = Session::new(model, tokens)?;
    let mut live = Vec::from([session.initial()?]);
    let mut done: Vec<Hypothesis> = Vec::new();
    while !live.is_empty() {
        if done.len() >= k && live[0].log_prob <= done[k - 1].log_prob {
            break;
        }
        let mut cands: Vec<(f64, usize, usize)> = Vec::new();
        for (h, hyp) in live.iter().enumerate() {
            let lp = session.log_probs(hyp)?.ok_or(TransitionError::IncompleteDerivation)?;
            for (a, &p) in lp.iter().enumerate() {
                if p != f64::NEG_INFINITY {
                    cands.push((hyp.log_prob + p, h, a));
                }
            }
        }
        cands.sort_by(|x, y| {
            y.0.partial_cmp(&x.0).unwrap_or(Ordering::Equal).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2))
        });
        let mut next = Vec::with_capacity(k);
        for (score, h, a) in cands {
            let action = &model.actions()[a];
            let finishing = completes(&live[h], action);
            if !finishing && next.len() >= k {
                continue;
            }
            let mut hyp = session.advance(&live[h], action)?;
            hyp.log_prob = score;
            if finishing {
                done.push(hyp);
            } else {
                next.push(hyp);
            }
        }
        done.sort_by(|x, y| y.log_prob.partial_cmp(&x.log_prob).unwrap_or(Ordering::Equal));
        done.truncate(k);
        live = next;
    }
    done.iter().map(finish).collect()
}

/// Log-probability of a given derivation under the model.
pub fn score_actions<T: Scalar>(model: &Model<T>, tokens: &[String], actions: &[Action]) -> Result<f64, RnngError> {
    let mut session = Session::new(model, tokens)?;
    let mut hyp = session.initial()?;
    for action in actions {
        let lp = session.log_probs(&hyp)?.ok_or(TransitionError::IncompleteDerivation)?;
        let i = model.action_index(action).ok_or(TransitionError::IncompleteDerivation)?;
        let score = hyp.log_prob + lp[i];
        hyp = session.advance(&hyp, action)?;
        hyp.log_prob = score;
    }
    if !hyp.state.is_terminal() {
        return Err(TransitionError::IncompleteDerivation.into());
    }
    Ok(hyp.log_prob)
}
