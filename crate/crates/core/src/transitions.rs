//! Top-down transition system.
//!
//! A derivation opens non-terminals (`NT(label)`), moves input tokens under
//! the innermost open non-terminal (`SHIFT`), and closes it (`REDUCE`). The
//! set of valid actions folds in the representation grammar, so every
//! completed derivation is a valid intent/slot tree.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::persistent::PStack;
use crate::treebank::{self, Label, LabelKind, Node, NonTerminal, Tree, Violation};

/// Default cap on simultaneously open non-terminals.
pub const DEFAULT_MAX_OPEN: usize = 40;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Action {
    Shift,
    Reduce,
    Nt(Label),
}

impl Action {
    pub fn kind(&self) -> ActionKind {
        match self {
            Action::Shift => ActionKind::Shift,
            Action::Reduce => ActionKind::Reduce,
            Action::Nt(l) if l.is_intent() => ActionKind::NtIntent,
            Action::Nt(_) => ActionKind::NtSlot,
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Shift => f.write_str("SHIFT"),
            Action::Reduce => f.write_str("REDUCE"),
            Action::Nt(l) => write!(f, "NT({l})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("cannot parse action `{0}`")]
pub struct ActionParseError(pub String);

impl FromStr for Action {
    type Err = ActionParseError;

    fn from_str(s: &str) -> Result<Action, ActionParseError> {
        match s {
            "SHIFT" => Ok(Action::Shift),
            "REDUCE" => Ok(Action::Reduce),
            _ => s
                .strip_prefix("NT(")
                .and_then(|rest| rest.strip_suffix(')'))
                .and_then(|label| label.parse().ok())
                .map(Action::Nt)
                .ok_or_else(|| ActionParseError(s.to_string())),
        }
    }
}

/// Whitespace-separated action sequence, e.g. `NT(IN:X) SHIFT REDUCE`.
pub fn format_actions(actions: &[Action]) -> String {
    let mut out = String::new();
    for (i, a) in actions.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(&a.to_string());
    }
    out
}

pub fn parse_actions(line: &str) -> Result<Vec<Action>, ActionParseError> {
    line.split_whitespace().map(str::parse).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ActionKind {
    Shift,
    Reduce,
    NtIntent,
    NtSlot,
}

/// Which kinds of action may be taken next.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ValidActions {
    pub shift: bool,
    pub reduce: bool,
    pub nt_intent: bool,
    pub nt_slot: bool,
}

impl ValidActions {
    pub fn allows_kind(&self, kind: ActionKind) -> bool {
        match kind {
            ActionKind::Shift => self.shift,
            ActionKind::Reduce => self.reduce,
            ActionKind::NtIntent => self.nt_intent,
            ActionKind::NtSlot => self.nt_slot,
        }
    }

    pub fn allows(&self, action: &Action) -> bool {
        self.allows_kind(action.kind())
    }

    pub fn kinds(&self) -> Vec<ActionKind> {
        [ActionKind::Shift, ActionKind::Reduce, ActionKind::NtIntent, ActionKind::NtSlot]
            .into_iter()
            .filter(|&k| self.allows_kind(k))
            .collect()
    }

    pub fn is_empty(&self) -> bool {
        !(self.shift || self.reduce || self.nt_intent || self.nt_slot)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Validity {
    Terminal,
    Valid(ValidActions),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TransitionError {
    #[error("empty utterance")]
    EmptyUtterance,
    #[error("action {action} is not valid at step {step} ({state})")]
    InvalidAction { action: Action, step: usize, state: String },
    #[error("action sequence ended before the tree was complete")]
    IncompleteDerivation,
    #[error("tree violates representation constraints: {0:?}")]
    ConstraintViolation(Vec<Violation>),
}

#[derive(Debug, Clone)]
enum StackItem {
    Open(Label),
    Token(usize),
    Done(Arc<NonTerminal>),
}

#[derive(Debug, Clone, Copy)]
struct OpenFrame {
    kind: LabelKind,
    children: usize,
    has_intent_child: bool,
}

/// Buffer, stack and history of a (partial) derivation. Cloning is cheap and
/// [`apply`] returns a new state that shares structure with the old one.
#[derive(Debug, Clone)]
pub struct ParserState {
    tokens: Arc<[String]>,
    next: usize,
    stack: PStack<StackItem>,
    open: PStack<OpenFrame>,
    history: PStack<Action>,
    max_open: usize,
}

pub fn initial_state(tokens: &[String]) -> Result<ParserState, TransitionError> {
    ParserState::new(tokens, DEFAULT_MAX_OPEN)
}

impl ParserState {
    pub fn new(tokens: &[String], max_open: usize) -> Result<ParserState, TransitionError> {
        if tokens.is_empty() {
            return Err(TransitionError::EmptyUtterance);
        }
        Ok(ParserState {
            tokens: tokens.into(),
            next: 0,
            stack: PStack::new(),
            open: PStack::new(),
            history: PStack::new(),
            max_open: max_open.max(1),
        })
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Remaining input, front first.
    pub fn buffer(&self) -> &[String] {
        &self.tokens[self.next..]
    }

    /// Index of the next token to shift.
    pub fn buffer_position(&self) -> usize {
        self.next
    }

    pub fn open_count(&self) -> usize {
        self.open.len()
    }

    pub fn stack_len(&self) -> usize {
        self.stack.len()
    }

    pub fn history(&self) -> Vec<Action> {
        self.history.to_vec()
    }

    pub fn step(&self) -> usize {
        self.history.len()
    }

    pub fn last_action(&self) -> Option<&Action> {
        self.history.peek()
    }

    /// Number of children collected so far by the innermost open non-terminal.
    pub fn top_open_children(&self) -> Option<usize> {
        self.open.peek().map(|f| f.children)
    }

    pub fn top_open_kind(&self) -> Option<LabelKind> {
        self.open.peek().map(|f| f.kind)
    }

    pub fn is_terminal(&self) -> bool {
        self.next == self.tokens.len()
            && self.open.is_empty()
            && self.stack.len() == 1
            && matches!(self.stack.peek(), Some(StackItem::Done(_)))
    }

    /// The finished tree of a terminal state.
    pub fn tree(&self) -> Option<Tree> {
        if !self.is_terminal() {
            return None;
        }
        match self.stack.peek() {
            Some(StackItem::Done(nt)) => Some(Tree::new((**nt).clone())),
            _ => None,
        }
    }

    fn summary(&self) -> String {
        format!(
            "buffer={} stack={} open={}",
            self.tokens.len() - self.next,
            self.stack.len(),
            self.open.len()
        )
    }
}

/// Valid next action kinds, or `Terminal`.
pub fn valid_actions(state: &ParserState) -> Validity {
    if state.is_terminal() {
        return Validity::Terminal;
    }
    let buffer_left = state.next < state.tokens.len();
    let open = state.open.len();
    let mut v = ValidActions::default();
    match state.open.peek() {
        None => {
            // Only the root may be opened on an empty stack.
            v.nt_intent = state.stack.is_empty() && buffer_left;
        }
        Some(top) => {
            // Opening needs input left; a slot also reserves room for the
            // intent it may have to hold.
            v.nt_intent = buffer_left
                && top.kind == LabelKind::Slot
                && top.children == 0
                && open < state.max_open;
            v.nt_slot = buffer_left && top.kind == LabelKind::Intent && open + 2 <= state.max_open;
            v.shift = buffer_left && !(top.kind == LabelKind::Slot && top.has_intent_child);
            v.reduce = top.children >= 1 && !(open == 1 && buffer_left);
        }
    }
    Validity::Valid(v)
}

/// Applies one action, returning the successor state.
pub fn apply(state: &ParserState, action: &Action) -> Result<ParserState, TransitionError> {
    let allowed = match valid_actions(state) {
        Validity::Terminal => false,
        Validity::Valid(v) => v.allows(action),
    };
    if !allowed {
        return Err(TransitionError::InvalidAction {
            action: action.clone(),
            step: state.step(),
            state: state.summary(),
        });
    }
    let mut next = state.clone();
    next.history = state.history.push(action.clone());
    match action {
        Action::Nt(label) => {
            next.stack = state.stack.push(StackItem::Open(label.clone()));
            next.open = state.open.push(OpenFrame {
                kind: label.kind(),
                children: 0,
                has_intent_child: false,
            });
        }
        Action::Shift => {
            next.stack = state.stack.push(StackItem::Token(state.next));
            next.next = state.next + 1;
            next.open = add_child(&state.open, false);
        }
        Action::Reduce => {
            let (frame, open_below) = state.open.pop().expect("reduce needs an open non-terminal");
            let mut children = Vec::with_capacity(frame.children);
            let mut stack = state.stack.clone();
            for _ in 0..frame.children {
                let (item, below) = stack.pop().expect("children are on the stack");
                children.push(match item {
                    StackItem::Token(i) => Node::Token(state.tokens[*i].clone()),
                    StackItem::Done(nt) => Node::NonTerminal((**nt).clone()),
                    StackItem::Open(_) => unreachable!("open non-terminal below its children"),
                });
                stack = below;
            }
            children.reverse();
            let (label, below) = match stack.pop() {
                Some((StackItem::Open(label), below)) => (label.clone(), below),
                _ => unreachable!("open frame without matching stack entry"),
            };
            let is_intent = label.is_intent();
            next.stack = below.push(StackItem::Done(Arc::new(NonTerminal::new(label, children))));
            next.open = if open_below.is_empty() {
                open_below
            } else {
                add_child(&open_below, is_intent)
            };
        }
    }
    Ok(next)
}

fn add_child(open: &PStack<OpenFrame>, intent: bool) -> PStack<OpenFrame> {
    let (top, below) = open.pop().expect("an open non-terminal receives the child");
    below.push(OpenFrame {
        kind: top.kind,
        children: top.children + 1,
        has_intent_child: top.has_intent_child || intent,
    })
}

/// Pre-order linearization of a valid tree.
pub fn oracle(tree: &Tree) -> Result<Vec<Action>, TransitionError> {
    let violations = treebank::validate(tree);
    if !violations.is_empty() {
        return Err(TransitionError::ConstraintViolation(violations));
    }
    let mut out = Vec::with_capacity(tree.tokens().len() + 2 * tree.non_terminal_count());
    linearize(tree.root(), &mut out);
    Ok(out)
}

fn linearize(nt: &NonTerminal, out: &mut Vec<Action>) {
    out.push(Action::Nt(nt.label.clone()));
    for child in &nt.children {
        match child {
            Node::Token(_) => out.push(Action::Shift),
            Node::NonTerminal(c) => linearize(c, out),
        }
    }
    out.push(Action::Reduce);
}

/// Runs `actions` from the initial state over `tokens`.
pub fn execute(actions: &[Action], tokens: &[String]) -> Result<Tree, TransitionError> {
    let mut state = initial_state(tokens)?;
    for action in actions {
        state = apply(&state, action)?;
    }
    state.tree().ok_or(TransitionError::IncompleteDerivation)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::treebank::parse_bracketed;
    use alloc::vec;

    const EVENT_TREE: &str = "[IN:GET_DIRECTIONS Driving directions to [SL:DESTINATION [IN:GET_EVENT the [SL:NAME_EVENT Eagles ] [SL:CAT_EVENT game ] ] ] ]";

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    fn nt(s: &str) -> Action {
        Action::Nt(s.parse().unwrap())
    }

    fn event_tree_actions() -> Vec<Action> {
        vec![
            nt("IN:GET_DIRECTIONS"),
            Action::Shift,
            Action::Shift,
            Action::Shift,
            nt("SL:DESTINATION"),
            nt("IN:GET_EVENT"),
            Action::Shift,
            nt("SL:NAME_EVENT"),
            Action::Shift,
            Action::Reduce,
            nt("SL:CAT_EVENT"),
            Action::Shift,
            Action::Reduce,
            Action::Reduce,
            Action::Reduce,
            Action::Reduce,
        ]
    }

    fn valid(state: &ParserState) -> ValidActions {
        match valid_actions(state) {
            Validity::Valid(v) => v,
            Validity::Terminal => panic!("unexpected terminal"),
        }
    }

    #[test]
    fn initial_states() {
        let s = initial_state(&toks("hello")).unwrap();
        assert_eq!(s.buffer(), &["hello".to_string()]);
        assert_eq!(s.open_count(), 0);
        assert_eq!(s.stack_len(), 0);
        let s = initial_state(&toks("Driving directions to the Eagles game")).unwrap();
        assert_eq!(s.buffer().len(), 6);
        assert_eq!(initial_state(&[]).unwrap_err(), TransitionError::EmptyUtterance);
    }

    #[test]
    fn initial_state_only_opens_an_intent() {
        let s = initial_state(&toks("a b")).unwrap();
        assert_eq!(valid(&s).kinds(), vec![ActionKind::NtIntent]);
    }

    #[test]
    fn empty_buffer_forces_reduce() {
        let mut s = initial_state(&toks("a")).unwrap();
        for a in [nt("IN:X"), nt("SL:Y"), Action::Shift] {
            s = apply(&s, &a).unwrap();
        }
        assert_eq!(s.open_count(), 2);
        assert_eq!(valid(&s).kinds(), vec![ActionKind::Reduce]);
    }

    #[test]
    fn slot_holding_an_intent_only_reduces() {
        let mut s = initial_state(&toks("a b c")).unwrap();
        for a in [nt("IN:X"), nt("SL:Y"), nt("IN:Z"), Action::Shift, Action::Reduce] {
            s = apply(&s, &a).unwrap();
        }
        assert!(!s.buffer().is_empty());
        assert_eq!(valid(&s).kinds(), vec![ActionKind::Reduce]);
    }

    #[test]
    fn minimal_derivation() {
        let mut s = initial_state(&toks("hello")).unwrap();
        for a in [nt("IN:X"), Action::Shift, Action::Reduce] {
            s = apply(&s, &a).unwrap();
        }
        assert!(s.is_terminal());
        assert_eq!(valid_actions(&s), Validity::Terminal);
        assert_eq!(s.tree().unwrap().to_string(), "[IN:X hello ]");
    }

    #[test]
    fn shift_on_empty_buffer_is_invalid() {
        let mut s = initial_state(&toks("hello")).unwrap();
        s = apply(&s, &nt("IN:X")).unwrap();
        s = apply(&s, &Action::Shift).unwrap();
        let err = apply(&s, &Action::Shift).unwrap_err();
        assert!(matches!(err, TransitionError::InvalidAction { step: 2, .. }));
    }

    #[test]
    fn figure_one_derivation() {
        let tree = execute(&event_tree_actions(), &toks("Driving directions to the Eagles game")).unwrap();
        assert_eq!(tree.to_string(), EVENT_TREE);
        assert_eq!(oracle(&parse_bracketed(EVENT_TREE).unwrap()).unwrap(), event_tree_actions());
    }

    #[test]
    fn minimal_oracle_and_execute() {
        let tree = parse_bracketed("[IN:X hello ]").unwrap();
        assert_eq!(oracle(&tree).unwrap(), vec![nt("IN:X"), Action::Shift, Action::Reduce]);
        assert_eq!(execute(&[nt("IN:X"), Action::Shift, Action::Reduce], &toks("hello")).unwrap(), tree);
        assert_eq!(
            execute(&[nt("IN:X"), Action::Shift], &toks("hello")).unwrap_err(),
            TransitionError::IncompleteDerivation
        );
    }

    #[test]
    fn oracle_rejects_invalid_trees() {
        let tree = parse_bracketed("[SL:X hello ]").unwrap();
        assert!(matches!(oracle(&tree), Err(TransitionError::ConstraintViolation(_))));
    }

    #[test]
    fn root_cannot_close_early() {
        let mut s = initial_state(&toks("a b")).unwrap();
        s = apply(&s, &nt("IN:X")).unwrap();
        s = apply(&s, &Action::Shift).unwrap();
        assert!(!valid(&s).reduce);
    }

    #[test]
    fn open_cap_is_respected() {
        let mut s = ParserState::new(&toks("a"), 3).unwrap();
        s = apply(&s, &nt("IN:X")).unwrap();
        s = apply(&s, &nt("SL:Y")).unwrap();
        s = apply(&s, &nt("IN:Z")).unwrap();
        let v = valid(&s);
        assert!(!v.nt_slot && v.shift);
    }

    #[test]
    fn action_text_roundtrip() {
        let line = format_actions(&event_tree_actions());
        assert!(line.starts_with("NT(IN:GET_DIRECTIONS) SHIFT SHIFT SHIFT NT(SL:DESTINATION)"));
        assert_eq!(parse_actions(&line).unwrap(), event_tree_actions());
        assert!(parse_actions("NT(XX:A)").is_err());
        assert!(parse_actions("POP").is_err());
    }
}
