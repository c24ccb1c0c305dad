//! Corpus ingestion, vocabularies and corpus statistics.
//!
//! Corpus files are tab-separated: raw utterance, tokenized utterance
//! (single spaces), bracketed tree.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::preprocess::{is_number, reserved_symbols};
use crate::treebank::{self, FormatError, Label, LabelKind, Node, NonTerminal, Tree, Violation};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Example {
    pub raw_utterance: String,
    pub tokens: Vec<String>,
    pub tree: Tree,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Split {
    Train,
    Valid,
    Test,
    Unsplit,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub examples: Vec<Example>,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LineError {
    #[error("expected 3 tab-separated columns, found {0}")]
    BadColumnCount(usize),
    #[error("bad tree: {0}")]
    TreeFormat(FormatError),
    #[error("tree violates constraints: {0:?}")]
    ConstraintViolation(Vec<Violation>),
    #[error("tokenized column does not match the tree leaves")]
    TokenMismatch,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IngestError {
    #[error("line {line}: {error}")]
    Line { line: usize, error: LineError },
    #[error("corpus is empty")]
    EmptyCorpus,
}

/// A line dropped in lenient mode.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rejected {
    pub line: usize,
    pub error: LineError,
}

pub fn parse_line(line: &str) -> Result<Example, LineError> {
    let columns: Vec<&str> = line.split('\t').collect();
    if columns.len() != 3 {
        return Err(LineError::BadColumnCount(columns.len()));
    }
    let tree = treebank::parse_bracketed(columns[2]).map_err(LineError::TreeFormat)?;
    let tokens: Vec<String> = columns[1].split_whitespace().map(str::to_string).collect();
    if tokens.as_slice() != tree.tokens() {
        return Err(LineError::TokenMismatch);
    }
    let violations = treebank::validate(&tree);
    if !violations.is_empty() {
        return Err(LineError::ConstraintViolation(violations));
    }
    Ok(Example { raw_utterance: columns[0].to_string(), tokens, tree })
}

/// Parses a whole TSV document. Blank lines are skipped. In strict mode the
/// first bad line aborts; otherwise bad lines are returned as [`Rejected`].
pub fn parse_tsv(text: &str, split: Split, strict: bool) -> Result<(Corpus, Vec<Rejected>), IngestError> {
    let mut examples = Vec::new();
    let mut rejected = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match parse_line(line) {
            Ok(e) => examples.push(e),
            Err(error) if strict => return Err(IngestError::Line { line: i + 1, error }),
            Err(error) => rejected.push(Rejected { line: i + 1, error }),
        }
    }
    if examples.is_empty() {
        return Err(IngestError::EmptyCorpus);
    }
    Ok((Corpus { examples, split }, rejected))
}

impl Corpus {
    pub fn new(examples: Vec<Example>, split: Split) -> Result<Corpus, IngestError> {
        if examples.is_empty() {
            return Err(IngestError::EmptyCorpus);
        }
        Ok(Corpus { examples, split })
    }

    /// Corpus whose raw and tokenized columns are the tree yield.
    pub fn from_trees(trees: Vec<Tree>, split: Split) -> Result<Corpus, IngestError> {
        let examples = trees
            .into_iter()
            .map(|tree| Example { raw_utterance: tree.tokens().join(" "), tokens: tree.tokens().to_vec(), tree })
            .collect();
        Corpus::new(examples, split)
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn trees(&self) -> Vec<Tree> {
        self.examples.iter().map(|e| e.tree.clone()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub count: usize,
    pub intent_label_count: usize,
    pub slot_label_count: usize,
    pub depth_histogram: BTreeMap<usize, usize>,
    pub length_histogram: BTreeMap<usize, usize>,
    pub median_depth: usize,
    pub mean_depth: f64,
    pub median_length: usize,
    pub mean_length: f64,
    pub fraction_depth_gt_2: f64,
}

/// Statistics over `examples` (must be non-empty). Medians are lower medians.
pub fn compute_stats(examples: &[Example]) -> CorpusStats {
    let mut depth_histogram = BTreeMap::new();
    let mut length_histogram = BTreeMap::new();
    let mut intents = BTreeSet::new();
    let mut slots = BTreeSet::new();
    for e in examples {
        *depth_histogram.entry(treebank::depth(&e.tree)).or_insert(0) += 1;
        *length_histogram.entry(e.tokens.len()).or_insert(0) += 1;
        collect_labels(e.tree.root(), &mut intents, &mut slots);
    }
    let count = examples.len();
    let deep = depth_histogram.range(3..).map(|(_, c)| c).sum::<usize>();
    CorpusStats {
        count,
        intent_label_count: intents.len(),
        slot_label_count: slots.len(),
        median_depth: lower_median(&depth_histogram, count),
        mean_depth: mean(&depth_histogram, count),
        median_length: lower_median(&length_histogram, count),
        mean_length: mean(&length_histogram, count),
        fraction_depth_gt_2: if count == 0 { 0.0 } else { deep as f64 / count as f64 },
        depth_histogram,
        length_histogram,
    }
}

fn collect_labels(nt: &NonTerminal, intents: &mut BTreeSet<String>, slots: &mut BTreeSet<String>) {
    match nt.label.kind() {
        LabelKind::Intent => intents.insert(nt.label.name().to_string()),
        LabelKind::Slot => slots.insert(nt.label.name().to_string()),
    };
    for child in &nt.children {
        if let Node::NonTerminal(c) = child {
            collect_labels(c, intents, slots);
        }
    }
}

/// Element at sorted position `(n - 1) / 2`.
fn lower_median(hist: &BTreeMap<usize, usize>, n: usize) -> usize {
    if n == 0 {
        return 0;
    }
    let target = (n - 1) / 2;
    let mut seen = 0;
    for (&value, &c) in hist {
        seen += c;
        if seen > target {
            return value;
        }
    }
    0
}

fn mean(hist: &BTreeMap<usize, usize>, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    hist.iter().map(|(&v, &c)| (v * c) as f64).sum::<f64>() / n as f64
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabs {
    /// Reserved symbols first, then corpus words in lexicographic order.
    pub tokens: Vec<String>,
    pub intents: Vec<Label>,
    pub slots: Vec<Label>,
}

/// Word vocabulary (words seen at least `min_count` times, numbers excluded,
/// plus all reserved symbols) and the exhaustive label sets.
pub fn build_vocabs(examples: &[Example], min_count: usize) -> Vocabs {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    let mut intents = BTreeSet::new();
    let mut slots = BTreeSet::new();
    for e in examples {
        for t in &e.tokens {
            if !is_number(t) {
                *counts.entry(t).or_insert(0) += 1;
            }
        }
        collect_label_values(e.tree.root(), &mut intents, &mut slots);
    }
    let mut tokens = reserved_symbols();
    let reserved: BTreeSet<String> = tokens.iter().cloned().collect();
    tokens.extend(
        counts
            .into_iter()
            .filter(|&(w, c)| c >= min_count.max(1) && !reserved.contains(w))
            .map(|(w, _)| w.to_string()),
    );
    Vocabs { tokens, intents: intents.into_iter().collect(), slots: slots.into_iter().collect() }
}

fn collect_label_values(nt: &NonTerminal, intents: &mut BTreeSet<Label>, slots: &mut BTreeSet<Label>) {
    if nt.label.is_intent() {
        intents.insert(nt.label.clone());
    } else {
        slots.insert(nt.label.clone());
    }
    for child in &nt.children {
        if let Node::NonTerminal(c) = child {
            collect_label_values(c, intents, slots);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::format;
    use alloc::vec;

    const EVENT_TREE: &str = "[IN:GET_DIRECTIONS Driving directions to [SL:DESTINATION [IN:GET_EVENT the [SL:NAME_EVENT Eagles ] [SL:CAT_EVENT game ] ] ] ]";

    fn ex(tree: &str) -> Example {
        let tree = treebank::parse_bracketed(tree).unwrap();
        Example { raw_utterance: tree.tokens().join(" "), tokens: tree.tokens().to_vec(), tree }
    }

    #[test]
    fn parses_a_corpus_line() {
        let line = format!(
            "Driving directions to the Eagles game\tDriving directions to the Eagles game\t{EVENT_TREE}"
        );
        let (corpus, rejected) = parse_tsv(&line, Split::Train, true).unwrap();
        assert!(rejected.is_empty());
        assert_eq!(corpus.len(), 1);
        assert_eq!(corpus.examples[0].tokens.len(), 6);
        assert_eq!(corpus.examples[0].tree.to_string(), EVENT_TREE);
    }

    #[test]
    fn empty_input_is_an_error() {
        assert_eq!(parse_tsv("", Split::Train, true).unwrap_err(), IngestError::EmptyCorpus);
        assert_eq!(parse_tsv("\n\n", Split::Train, false).unwrap_err(), IngestError::EmptyCorpus);
    }

    #[test]
    fn line_errors() {
        assert_eq!(parse_line("a\tb").unwrap_err(), LineError::BadColumnCount(2));
        assert_eq!(parse_line("hello\thi\t[IN:X hello ]").unwrap_err(), LineError::TokenMismatch);
        assert!(matches!(parse_line("x\tx\t[IN:X x"), Err(LineError::TreeFormat(_))));
        assert!(matches!(parse_line("x\tx\t[SL:X x ]"), Err(LineError::ConstraintViolation(_))));
    }

    #[test]
    fn strict_and_lenient_modes() {
        let text = "a\ta\t[IN:X a ]\nbad line\nb\tb\t[IN:Y b ]\n";
        assert_eq!(
            parse_tsv(text, Split::Valid, true).unwrap_err(),
            IngestError::Line { line: 2, error: LineError::BadColumnCount(1) }
        );
        let (corpus, rejected) = parse_tsv(text, Split::Valid, false).unwrap();
        assert_eq!(corpus.len(), 2);
        assert_eq!(rejected.len(), 1);
        assert_eq!(rejected[0].line, 2);
    }

    #[test]
    fn stats_of_single_tree() {
        let s = compute_stats(&[ex("[IN:X hello ]")]);
        assert_eq!(s.count, 1);
        assert_eq!(s.median_depth, 1);
        assert_eq!(s.mean_depth, 1.0);
        assert_eq!(s.intent_label_count, 1);
        assert_eq!(s.slot_label_count, 0);
        assert_eq!(s.fraction_depth_gt_2, 0.0);
    }

    #[test]
    fn stats_of_three_trees() {
        let examples = [ex("[IN:X a ]"), ex("[IN:X a [SL:Y b ] ]"), ex(EVENT_TREE)];
        let s = compute_stats(&examples);
        assert_eq!(s.depth_histogram, BTreeMap::from([(1, 1), (2, 1), (4, 1)]));
        assert!((s.mean_depth - 7.0 / 3.0).abs() < 1e-15);
        assert_eq!(s.median_depth, 2);
        assert_eq!(s.median_length, 2);
        assert!((s.fraction_depth_gt_2 - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(s.length_histogram.values().sum::<usize>(), 3);
    }

    #[test]
    fn lower_median_on_even_counts() {
        let examples = [ex("[IN:X a ]"), ex("[IN:X a [SL:Y b ] ]")];
        assert_eq!(compute_stats(&examples).median_depth, 1);
    }

    #[test]
    fn vocabularies() {
        let v = build_vocabs(&[ex("[IN:X hello ]")], 1);
        assert!(v.tokens.contains(&"hello".to_string()));
        assert_eq!(v.tokens.len(), reserved_symbols().len() + 1);
        assert_eq!(v.intents, vec!["IN:X".parse().unwrap()]);

        let examples = [ex(EVENT_TREE), ex("[IN:GET_EVENT the game 845 ]")];
        let v = build_vocabs(&examples, 2);
        assert!(!v.tokens.contains(&"Eagles".to_string()));
        assert!(!v.tokens.contains(&"845".to_string()));
        assert!(v.tokens.contains(&"the".to_string()) && v.tokens.contains(&"game".to_string()));
        assert_eq!(v.intents.len(), 2);
        assert_eq!(v.slots.len(), 3);
    }
}
