//! Intent/slot trees and the canonical bracketed format.
//!
//! A tree is written as `[IN:NAME tok [SL:NAME tok ] ]`: square brackets,
//! single spaces between items and a space before every closing bracket.
//! Parsing only checks structure (balanced brackets, non-empty
//! non-terminals, known label prefixes); the grammar of the representation
//! is checked separately by [`validate`].

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const INTENT_PREFIX: &str = "IN:";
pub const SLOT_PREFIX: &str = "SL:";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum LabelKind {
    Intent,
    Slot,
}

impl LabelKind {
    pub fn prefix(self) -> &'static str {
        match self {
            LabelKind::Intent => INTENT_PREFIX,
            LabelKind::Slot => SLOT_PREFIX,
        }
    }
}

/// A non-terminal label such as `IN:GET_DIRECTIONS` or `SL:DESTINATION`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Label {
    kind: LabelKind,
    name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LabelError {
    #[error("label `{0}` does not start with IN: or SL:")]
    BadPrefix(String),
    #[error("label `{0}` has an empty name")]
    EmptyName(String),
    #[error("label `{0}` contains whitespace or brackets")]
    BadCharacter(String),
}

impl Label {
    pub fn new(kind: LabelKind, name: &str) -> Result<Label, LabelError> {
        if name.is_empty() {
            return Err(LabelError::EmptyName(name.to_string()));
        }
        if !is_atom(name) {
            return Err(LabelError::BadCharacter(name.to_string()));
        }
        Ok(Label { kind, name: name.to_string() })
    }

    pub fn intent(name: &str) -> Result<Label, LabelError> {
        Label::new(LabelKind::Intent, name)
    }

    pub fn slot(name: &str) -> Result<Label, LabelError> {
        Label::new(LabelKind::Slot, name)
    }

    pub fn kind(&self) -> LabelKind {
        self.kind
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn is_intent(&self) -> bool {
        self.kind == LabelKind::Intent
    }

    pub fn is_slot(&self) -> bool {
        self.kind == LabelKind::Slot
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.kind.prefix(), self.name)
    }
}

impl FromStr for Label {
    type Err = LabelError;

    fn from_str(s: &str) -> Result<Label, LabelError> {
        if let Some(name) = s.strip_prefix(INTENT_PREFIX) {
            Label::intent(name).map_err(|_| reprefix(s, name))
        } else if let Some(name) = s.strip_prefix(SLOT_PREFIX) {
            Label::slot(name).map_err(|_| reprefix(s, name))
        } else {
            Err(LabelError::BadPrefix(s.to_string()))
        }
    }
}

fn reprefix(full: &str, name: &str) -> LabelError {
    if name.is_empty() {
        LabelError::EmptyName(full.to_string())
    } else {
        LabelError::BadCharacter(full.to_string())
    }
}

/// True when `s` is usable as a token or label body: non-empty, no
/// whitespace, no square brackets.
pub fn is_atom(s: &str) -> bool {
    !s.is_empty() && !s.chars().any(|c| c.is_whitespace() || c == '[' || c == ']')
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct NonTerminal {
    pub label: Label,
    pub children: Vec<Node>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Node {
    NonTerminal(NonTerminal),
    Token(String),
}

impl Node {
    pub fn token(text: &str) -> Node {
        Node::Token(text.to_string())
    }

    pub fn nt(label: Label, children: Vec<Node>) -> Node {
        Node::NonTerminal(NonTerminal { label, children })
    }

    pub fn as_non_terminal(&self) -> Option<&NonTerminal> {
        match self {
            Node::NonTerminal(nt) => Some(nt),
            Node::Token(_) => None,
        }
    }
}

impl NonTerminal {
    pub fn new(label: Label, children: Vec<Node>) -> NonTerminal {
        NonTerminal { label, children }
    }

    /// Number of non-terminals in this subtree, itself included.
    pub fn non_terminal_count(&self) -> usize {
        1 + self
            .children
            .iter()
            .map(|c| match c {
                Node::NonTerminal(nt) => nt.non_terminal_count(),
                Node::Token(_) => 0,
            })
            .sum::<usize>()
    }

    pub fn depth(&self) -> usize {
        1 + self
            .children
            .iter()
            .map(|c| match c {
                Node::NonTerminal(nt) => nt.depth(),
                Node::Token(_) => 0,
            })
            .max()
            .unwrap_or(0)
    }

    pub fn collect_tokens(&self, out: &mut Vec<String>) {
        for child in &self.children {
            match child {
                Node::Token(t) => out.push(t.clone()),
                Node::NonTerminal(nt) => nt.collect_tokens(out),
            }
        }
    }

    pub fn write_bracketed(&self, out: &mut String) {
        out.push('[');
        out.push_str(self.label.kind.prefix());
        out.push_str(&self.label.name);
        for child in &self.children {
            out.push(' ');
            match child {
                Node::Token(t) => out.push_str(t),
                Node::NonTerminal(nt) => nt.write_bracketed(out),
            }
        }
        out.push_str(" ]");
    }

    pub fn to_bracketed(&self) -> String {
        let mut s = String::new();
        self.write_bracketed(&mut s);
        s
    }
}

/// A full annotation: an intent-rooted tree together with its utterance.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Tree {
    root: NonTerminal,
    tokens: Vec<String>,
}

impl Tree {
    /// Builds a tree whose utterance is the yield of `root`.
    pub fn new(root: NonTerminal) -> Tree {
        let mut tokens = Vec::new();
        root.collect_tokens(&mut tokens);
        Tree { root, tokens }
    }

    /// Builds a tree with an externally supplied utterance. The pair is not
    /// checked here; [`validate`] reports a mismatch.
    pub fn from_parts(root: NonTerminal, tokens: Vec<String>) -> Tree {
        Tree { root, tokens }
    }

    pub fn root(&self) -> &NonTerminal {
        &self.root
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn into_root(self) -> NonTerminal {
        self.root
    }

    pub fn non_terminal_count(&self) -> usize {
        self.root.non_terminal_count()
    }
}

impl fmt::Display for Tree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&serialize(self))
    }
}

impl FromStr for Tree {
    type Err = FormatError;

    fn from_str(s: &str) -> Result<Tree, FormatError> {
        parse_bracketed(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FormatErrorKind {
    UnbalancedBrackets,
    EmptyNonTerminal,
    BadLabelPrefix,
    TrailingInput,
    /// The input does not start with an opening bracket (this includes empty input).
    MissingRoot,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{kind:?} at byte offset {offset}")]
pub struct FormatError {
    pub kind: FormatErrorKind,
    pub offset: usize,
}

impl FormatError {
    fn new(kind: FormatErrorKind, offset: usize) -> FormatError {
        FormatError { kind, offset }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Lexeme<'a> {
    Open(&'a str),
    Close,
    Word(&'a str),
}

fn lex(text: &str) -> Vec<(usize, Lexeme<'_>)> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < text.len() {
        let c = text[i..].chars().next().unwrap();
        if c.is_whitespace() {
            i += c.len_utf8();
            continue;
        }
        match bytes[i] {
            b'[' => {
                let start = i + 1;
                let end = scan_atom(text, start);
                out.push((i, Lexeme::Open(&text[start..end])));
                i = end;
            }
            b']' => {
                out.push((i, Lexeme::Close));
                i += 1;
            }
            _ => {
                let end = scan_atom(text, i);
                out.push((i, Lexeme::Word(&text[i..end])));
                i = end;
            }
        }
    }
    out
}

fn scan_atom(text: &str, start: usize) -> usize {
    text[start..]
        .char_indices()
        .find(|&(_, c)| c.is_whitespace() || c == '[' || c == ']')
        .map(|(j, _)| start + j)
        .unwrap_or(text.len())
}

/// Parses one bracketed tree.
///
/// Whitespace between items may be any run of whitespace; a closing bracket
/// may follow a token directly. Only structure is checked.
pub fn parse_bracketed(text: &str) -> Result<Tree, FormatError> {
    let lexemes = lex(text);
    let mut stack: Vec<(usize, NonTerminal)> = Vec::new();
    let mut root: Option<NonTerminal> = None;

    for &(offset, lexeme) in &lexemes {
        if root.is_some() {
            return Err(FormatError::new(FormatErrorKind::TrailingInput, offset));
        }
        match lexeme {
            Lexeme::Open(label) => {
                let label: Label = label
                    .parse()
                    .map_err(|_| FormatError::new(FormatErrorKind::BadLabelPrefix, offset + 1))?;
                stack.push((offset, NonTerminal::new(label, Vec::new())));
            }
            Lexeme::Word(word) => match stack.last_mut() {
                Some((_, top)) => top.children.push(Node::Token(word.to_string())),
                None => return Err(FormatError::new(FormatErrorKind::MissingRoot, offset)),
            },
            Lexeme::Close => {
                let (_, done) = stack
                    .pop()
                    .ok_or(FormatError::new(FormatErrorKind::UnbalancedBrackets, offset))?;
                if done.children.is_empty() {
                    return Err(FormatError::new(FormatErrorKind::EmptyNonTerminal, offset));
                }
                match stack.last_mut() {
                    Some((_, parent)) => parent.children.push(Node::NonTerminal(done)),
                    None => root = Some(done),
                }
            }
        }
    }

    if let Some(&(offset, _)) = stack.last() {
        return Err(FormatError::new(FormatErrorKind::UnbalancedBrackets, offset));
    }
    root.map(Tree::new)
        .ok_or(FormatError::new(FormatErrorKind::MissingRoot, text.len()))
}

/// Canonical bracketed form of `tree`.
pub fn serialize(tree: &Tree) -> String {
    tree.root.to_bracketed()
}

/// A broken representation constraint, located by the child-index path from
/// the root (empty path = root).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum Violation {
    /// The top-level node is a slot.
    RootNotIntent { path: Vec<usize> },
    /// An intent has an intent as a direct child.
    IntentChildOfIntent { path: Vec<usize> },
    /// A slot mixes an intent with other children, or holds several intents.
    SlotMixedChildren { path: Vec<usize> },
    /// A slot has a slot as a direct child.
    SlotChildOfSlot { path: Vec<usize> },
    /// A non-terminal without children.
    EmptyNonTerminal { path: Vec<usize> },
    /// The leaves do not spell the utterance.
    YieldMismatch,
}

impl Violation {
    pub fn name(&self) -> &'static str {
        match self {
            Violation::RootNotIntent { .. } => "RootNotIntent",
            Violation::IntentChildOfIntent { .. } => "IntentChildOfIntent",
            Violation::SlotMixedChildren { .. } => "SlotMixedChildren",
            Violation::SlotChildOfSlot { .. } => "SlotChildOfSlot",
            Violation::EmptyNonTerminal { .. } => "EmptyNonTerminal",
            Violation::YieldMismatch => "YieldMismatch",
        }
    }

    pub fn path(&self) -> &[usize] {
        match self {
            Violation::RootNotIntent { path }
            | Violation::IntentChildOfIntent { path }
            | Violation::SlotMixedChildren { path }
            | Violation::SlotChildOfSlot { path }
            | Violation::EmptyNonTerminal { path } => path,
            Violation::YieldMismatch => &[],
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())?;
        if !matches!(self, Violation::YieldMismatch) {
            f.write_str(" at /")?;
            for (i, p) in self.path().iter().enumerate() {
                if i > 0 {
                    f.write_str("/")?;
                }
                write!(f, "{p}")?;
            }
        }
        Ok(())
    }
}

/// Checks the representation constraints: intent root, intents hold tokens
/// and slots, slots hold tokens or exactly one intent, and the leaves equal
/// the utterance.
pub fn validate(tree: &Tree) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut path = Vec::new();
    if !tree.root.label.is_intent() {
        out.push(Violation::RootNotIntent { path: Vec::new() });
    }
    check_node(&tree.root, &mut path, &mut out);
    let mut leaves = Vec::new();
    tree.root.collect_tokens(&mut leaves);
    if leaves != tree.tokens {
        out.push(Violation::YieldMismatch);
    }
    out
}

fn check_node(nt: &NonTerminal, path: &mut Vec<usize>, out: &mut Vec<Violation>) {
    if nt.children.is_empty() {
        out.push(Violation::EmptyNonTerminal { path: path.clone() });
    }
    match nt.label.kind {
        LabelKind::Intent => {
            let nested = nt
                .children
                .iter()
                .any(|c| matches!(c, Node::NonTerminal(n) if n.label.is_intent()));
            if nested {
                out.push(Violation::IntentChildOfIntent { path: path.clone() });
            }
        }
        LabelKind::Slot => {
            let intents = nt
                .children
                .iter()
                .filter(|c| matches!(c, Node::NonTerminal(n) if n.label.is_intent()))
                .count();
            let slots = nt
                .children
                .iter()
                .filter(|c| matches!(c, Node::NonTerminal(n) if n.label.is_slot()))
                .count();
            if slots > 0 {
                out.push(Violation::SlotChildOfSlot { path: path.clone() });
            }
            if intents > 0 && nt.children.len() > 1 {
                out.push(Violation::SlotMixedChildren { path: path.clone() });
            }
        }
    }
    for (i, child) in nt.children.iter().enumerate() {
        if let Node::NonTerminal(c) = child {
            path.push(i);
            check_node(c, path, out);
            path.pop();
        }
    }
}

/// Maximum number of non-terminals on any root-to-leaf path. A flat intent
/// with slots has depth 2.
pub fn depth(tree: &Tree) -> usize {
    tree.root.depth()
}

pub fn yield_tokens(tree: &Tree) -> Vec<String> {
    let mut out = Vec::new();
    tree.root.collect_tokens(&mut out);
    out
}

/// A non-terminal label over the half-open token range `[start, end)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct LabeledSpan {
    pub label: Label,
    pub start: usize,
    pub end: usize,
}

impl fmt::Display for LabeledSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[{},{})", self.label, self.start, self.end)
    }
}

/// One span per non-terminal, in pre-order.
pub fn labeled_spans(tree: &Tree) -> Vec<LabeledSpan> {
    let mut out = Vec::new();
    visit_spans(&tree.root, 0, &mut |nt, start, end| {
        out.push(LabeledSpan { label: nt.label.clone(), start, end });
    });
    out
}

/// Walks every non-terminal in pre-order with its token span. Returns the
/// end position of `nt`.
pub fn visit_spans<'a, F>(nt: &'a NonTerminal, start: usize, f: &mut F) -> usize
where
    F: FnMut(&'a NonTerminal, usize, usize),
{
    // Pre-order needs the end before the children are visited.
    let end = start + yield_len(nt);
    f(nt, start, end);
    let mut pos = start;
    for child in &nt.children {
        match child {
            Node::Token(_) => pos += 1,
            Node::NonTerminal(c) => pos = visit_spans(c, pos, f),
        }
    }
    end
}

fn yield_len(nt: &NonTerminal) -> usize {
    nt.children
        .iter()
        .map(|c| match c {
            Node::Token(_) => 1,
            Node::NonTerminal(n) => yield_len(n),
        })
        .sum()
}
