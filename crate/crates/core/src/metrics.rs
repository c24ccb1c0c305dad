//! Evaluation: exact match, labeled bracketing P/R/F1, tree-labeled P/R/F1,
//! tree validity and top-k accuracy.
//!
//! Bracket scores are micro-averaged over the corpus. Every non-terminal
//! contributes one bracket, including those directly over tokens. A
//! tree-labeled item additionally carries the full serialized subtree, so a
//! predicted non-terminal only matches when everything below it is right.
//! Predictions that do not parse score zero but stay in the denominators.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::treebank::{self, labeled_spans, Label, LabeledSpan, Tree};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("gold has {gold} items but predictions have {pred}")]
    LengthMismatch { gold: usize, pred: usize },
}

fn same_len(gold: usize, pred: usize) -> Result<(), MetricsError> {
    if gold == pred {
        Ok(())
    } else {
        Err(MetricsError::LengthMismatch { gold, pred })
    }
}

fn percent(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        100.0 * num as f64 / den as f64
    }
}

/// Precision, recall and F1 in percent, with the underlying counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub matched: usize,
    pub predicted: usize,
    pub gold: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    pub fn from_counts(matched: usize, predicted: usize, gold: usize) -> Prf {
        let precision = percent(matched, predicted);
        let recall = percent(matched, gold);
        Prf { matched, predicted, gold, precision, recall, f1: f1(precision, recall) }
    }
}

pub fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// A non-terminal identified by label, span and its whole subtree.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct LabeledSubtreeItem {
    pub label: Label,
    pub start: usize,
    pub end: usize,
    pub subtree: String,
}

pub fn labeled_subtree_items(tree: &Tree) -> Vec<LabeledSubtreeItem> {
    let mut out = Vec::new();
    treebank::visit_spans(tree.root(), 0, &mut |nt, start, end| {
        out.push(LabeledSubtreeItem { label: nt.label.clone(), start, end, subtree: nt.to_bracketed() });
    });
    out
}

/// Size of the multiset intersection of two lists.
fn multiset_overlap<T: Ord + Clone>(a: &[T], b: &[T]) -> usize {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort();
    b.sort();
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            core::cmp::Ordering::Less => i += 1,
            core::cmp::Ordering::Greater => j += 1,
            core::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

/// Matched labeled brackets between one gold tree and one prediction.
pub fn bracket_matches(gold: &Tree, pred: &Tree) -> usize {
    multiset_overlap::<LabeledSpan>(&labeled_spans(gold), &labeled_spans(pred))
}

/// Matched tree-labeled items between one gold tree and one prediction.
pub fn tree_labeled_matches(gold: &Tree, pred: &Tree) -> usize {
    multiset_overlap(&labeled_subtree_items(gold), &labeled_subtree_items(pred))
}

/// Percentage of predictions equal to their gold tree.
pub fn exact_match(gold: &[Tree], pred: &[Option<Tree>]) -> Result<f64, MetricsError> {
    same_len(gold.len(), pred.len())?;
    let hits = gold
        .iter()
        .zip(pred)
        .filter(|(g, p)| p.as_ref() == Some(*g))
        .count();
    Ok(percent(hits, gold.len()))
}

fn micro_prf<F>(gold: &[Tree], pred: &[Option<Tree>], matches: F) -> Result<Prf, MetricsError>
where
    F: Fn(&Tree, &Tree) -> usize,
{
    same_len(gold.len(), pred.len())?;
    let (mut m, mut p, mut g) = (0, 0, 0);
    for (gt, pt) in gold.iter().zip(pred) {
        g += gt.non_terminal_count();
        if let Some(pt) = pt {
            p += pt.non_terminal_count();
            m += matches(gt, pt);
        }
    }
    Ok(Prf::from_counts(m, p, g))
}

pub fn bracket_prf(gold: &[Tree], pred: &[Option<Tree>]) -> Result<Prf, MetricsError> {
    micro_prf(gold, pred, bracket_matches)
}

pub fn tree_labeled_prf(gold: &[Tree], pred: &[Option<Tree>]) -> Result<Prf, MetricsError> {
    micro_prf(gold, pred, tree_labeled_matches)
}

/// Percentage of raw prediction strings that parse as bracketed trees.
/// Only bracket structure is required, not the representation grammar.
pub fn tree_validity<S: AsRef<str>>(raw: &[S]) -> f64 {
    let ok = raw.iter().filter(|s| treebank::parse_bracketed(s.as_ref()).is_ok()).count();
    percent(ok, raw.len())
}

/// Percentage of examples whose gold tree is among the first `k` entries of
/// its ranked hypothesis list.
pub fn top_k_accuracy(gold: &[Tree], beams: &[Vec<Tree>], k: usize) -> Result<f64, MetricsError> {
    same_len(gold.len(), beams.len())?;
    let hits = gold
        .iter()
        .zip(beams)
        .filter(|(g, beam)| beam.iter().take(k).any(|t| t == *g))
        .count();
    Ok(percent(hits, gold.len()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TopK {
    pub k: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub exact_match: f64,
    pub bracket_precision: f64,
    pub bracket_recall: f64,
    pub bracket_f1: f64,
    pub tl_precision: f64,
    pub tl_recall: f64,
    pub tl_f1: f64,
    pub tree_validity: f64,
    pub n_examples: usize,
    pub n_invalid_predictions: usize,
    pub bracket_counts: Prf,
    pub tl_counts: Prf,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub top_k: Vec<TopK>,
}

/// Scores raw prediction lines against gold trees.
pub fn evaluate<S: AsRef<str>>(gold: &[Tree], raw_pred: &[S]) -> Result<MetricsReport, MetricsError> {
    same_len(gold.len(), raw_pred.len())?;
    let pred: Vec<Option<Tree>> = raw_pred
        .iter()
        .map(|s| treebank::parse_bracketed(s.as_ref()).ok())
        .collect();
    let bracket = bracket_prf(gold, &pred)?;
    let tl = tree_labeled_prf(gold, &pred)?;
    Ok(MetricsReport {
        exact_match: exact_match(gold, &pred)?,
        bracket_precision: bracket.precision,
        bracket_recall: bracket.recall,
        bracket_f1: bracket.f1,
        tl_precision: tl.precision,
        tl_recall: tl.recall,
        tl_f1: tl.f1,
        tree_validity: tree_validity(raw_pred),
        n_examples: gold.len(),
        n_invalid_predictions: pred.iter().filter(|p| p.is_none()).count(),
        bracket_counts: bracket,
        tl_counts: tl,
        top_k: Vec::new(),
    })
}

impl MetricsReport {
    /// Adds Top-k rows computed from ranked hypothesis lists.
    pub fn with_top_k(mut self, gold: &[Tree], beams: &[Vec<Tree>], ks: &[usize]) -> Result<Self, MetricsError> {
        for &k in ks {
            self.top_k.push(TopK { k, accuracy: top_k_accuracy(gold, beams, k)? });
        }
        Ok(self)
    }

    /// Plain-text table with one row for `system`.
    pub fn to_table(&self, system: &str) -> String {
        let headers = [
            "Model",
            "Exact match",
            "F1",
            "Precision",
            "Recall",
            "TL-F1",
            "TL-Precision",
            "TL-Recall",
            "Tree Validity",
        ];
        let mut cells: Vec<String> = Vec::from([String::from(system)]);
        for v in [
            self.exact_match,
            self.bracket_f1,
            self.bracket_precision,
            self.bracket_recall,
            self.tl_f1,
            self.tl_precision,
            self.tl_recall,
            self.tree_validity,
        ] {
            cells.push(format!("{v:.2}"));
        }
        let widths: Vec<usize> = headers.iter().zip(&cells).map(|(h, c)| h.len().max(c.len())).collect();
        let mut out = String::new();
        let row = |out: &mut String, items: &[&str]| {
            out.push('|');
            for (item, w) in items.iter().zip(&widths) {
                let _ = write!(out, " {item:<w$} |");
            }
            out.push('\n');
        };
        row(&mut out, &headers);
        out.push('|');
        for w in &widths {
            out.push_str(&"-".repeat(w + 2));
            out.push('|');
        }
        out.push('\n');
        let cell_refs: Vec<&str> = cells.iter().map(String::as_str).collect();
        row(&mut out, &cell_refs);
        for t in &self.top_k {
            let _ = writeln!(out, "Top-{}: {:.2}", t.k, t.accuracy);
        }
        let _ = writeln!(out, "examples: {}  invalid predictions: {}", self.n_examples, self.n_invalid_predictions);
        out
    }
}
