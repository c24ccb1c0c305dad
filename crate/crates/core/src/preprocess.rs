//! Token normalization and pretrained embedding tables.
//!
//! Numbers collapse to [`NUM_SYMBOL`]. Out-of-vocabulary words map to one of
//! a fixed set of unknown-word classes built from orthographic features:
//!
//! * capitalization: `-INITC` (single capital, first word), `-CAP` (single
//!   capital elsewhere), `-CAPS` (several capitals), `-LC` (lowercase);
//! * `-NUM` if the word contains a digit, `-DASH` if it contains `-`;
//! * one suffix from `s ed ing ion er est ly ity y al`.
//!
//! So `Philly` in the middle of a sentence becomes `<UNK-CAP-ly>`.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const NUM_SYMBOL: &str = "<NUM>";
pub const UNK_SYMBOL: &str = "<UNK>";

const CAP_FEATURES: [&str; 5] = ["", "-INITC", "-CAP", "-CAPS", "-LC"];
const SUFFIXES: [&str; 9] = ["ed", "ing", "ion", "er", "est", "ly", "ity", "y", "al"];

/// Integers or decimals with optional sign and optional comma grouping:
/// `845`, `-3.5`, `1,000`, `.25`.
pub fn is_number(token: &str) -> bool {
    let body = token.strip_prefix(['+', '-']).unwrap_or(token);
    let (int, frac) = match body.split_once('.') {
        Some((i, f)) => (i, Some(f)),
        None => (body, None),
    };
    if let Some(f) = frac {
        if f.is_empty() || !f.bytes().all(|b| b.is_ascii_digit()) {
            return false;
        }
    } else if int.is_empty() {
        return false;
    }
    if int.is_empty() {
        return true;
    }
    if int.bytes().all(|b| b.is_ascii_digit()) {
        return true;
    }
    let mut groups = int.split(',');
    let head = groups.next().unwrap_or("");
    (1..=3).contains(&head.len())
        && head.bytes().all(|b| b.is_ascii_digit())
        && groups.all(|g| g.len() == 3 && g.bytes().all(|b| b.is_ascii_digit()))
}

/// Unknown-word class of `token` at sentence `position`.
pub fn unknown_class(token: &str, position: usize) -> String {
    let mut caps = 0usize;
    let mut has_lower = false;
    let mut has_digit = false;
    let mut has_dash = false;
    for c in token.chars() {
        if c.is_numeric() {
            has_digit = true;
        } else if c == '-' {
            has_dash = true;
        } else if c.is_alphabetic() {
            if c.is_lowercase() {
                has_lower = true;
            } else if c.is_uppercase() {
                caps += 1;
            }
        }
    }
    let mut out = String::from("<UNK");
    let first = token.chars().next();
    if first.is_some_and(char::is_uppercase) {
        if caps == 1 {
            out.push_str(if position == 0 { "-INITC" } else { "-CAP" });
        } else {
            out.push_str("-CAPS");
        }
    } else if first.is_some_and(|c| !c.is_alphabetic()) && caps > 0 {
        out.push_str("-CAPS");
    } else if has_lower {
        out.push_str("-LC");
    }
    if has_digit {
        out.push_str("-NUM");
    }
    if has_dash {
        out.push_str("-DASH");
    }
    let lower = token.to_lowercase();
    let chars: Vec<char> = lower.chars().collect();
    let n = chars.len();
    if n >= 3 && chars[n - 1] == 's' && !matches!(chars[n - 2], 's' | 'i' | 'u') {
        out.push_str("-s");
    } else if n >= 5 && !has_dash && !(has_digit && caps > 0) {
        if let Some(sfx) = SUFFIXES.iter().find(|s| lower.ends_with(*s)) {
            out.push('-');
            out.push_str(sfx);
        }
    }
    out.push('>');
    out
}

/// Every symbol [`unknown_class`] can produce, plus [`NUM_SYMBOL`].
pub fn reserved_symbols() -> Vec<String> {
    let mut out = vec![NUM_SYMBOL.to_string()];
    let suffixes: Vec<&str> = core::iter::once("").chain(core::iter::once("-s")).collect();
    for cap in CAP_FEATURES {
        for num in ["", "-NUM"] {
            for dash in ["", "-DASH"] {
                let base = alloc::format!("<UNK{cap}{num}{dash}");
                for sfx in &suffixes {
                    out.push(alloc::format!("{base}{sfx}>"));
                }
                for sfx in SUFFIXES {
                    out.push(alloc::format!("{base}-{sfx}>"));
                }
            }
        }
    }
    out
}

/// Maps surface tokens to vocabulary symbols.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenNormalizer {
    vocab: BTreeSet<String>,
}

impl TokenNormalizer {
    pub fn new<I, S>(vocab: I) -> TokenNormalizer
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        TokenNormalizer { vocab: vocab.into_iter().map(Into::into).collect() }
    }

    pub fn contains(&self, token: &str) -> bool {
        self.vocab.contains(token)
    }

    /// Numbers become `<NUM>`, known words pass through, anything else gets
    /// its unknown-word class.
    pub fn normalize(&self, token: &str, position: usize) -> String {
        if is_number(token) {
            NUM_SYMBOL.to_string()
        } else if self.vocab.contains(token) {
            token.to_string()
        } else {
            unknown_class(token, position)
        }
    }

    pub fn normalize_all(&self, tokens: &[String]) -> Vec<String> {
        tokens.iter().enumerate().map(|(i, t)| self.normalize(t, i)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EmbeddingError {
    #[error("line {line}: expected {expected} values, found {got}")]
    RaggedDimensions { line: usize, expected: usize, got: usize },
    #[error("line {line}: unparseable value")]
    BadValue { line: usize },
    #[error("no vectors in embedding file")]
    Empty,
}

/// Word vectors of a common dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    index: BTreeMap<String, usize>,
    vectors: Vec<Vec<f32>>,
    pretrained: Vec<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct EmbeddingLoadReport {
    /// Vectors taken from the file.
    pub loaded: usize,
    /// File entries not in the requested vocabulary.
    pub skipped: usize,
    /// Vocabulary words that received a random vector.
    pub missing: Vec<String>,
}

impl EmbeddingTable {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, word: &str) -> Option<&[f32]> {
        self.index.get(word).map(|&i| self.vectors[i].as_slice())
    }

    /// Whether `word` has a vector read from the file (as opposed to random).
    pub fn is_pretrained(&self, word: &str) -> bool {
        self.index.get(word).is_some_and(|&i| self.pretrained[i])
    }
}

/// Streams `word v1 … vd` lines into a table.
#[derive(Debug, Clone)]
pub struct EmbeddingTableBuilder {
    vocab: Option<Vec<String>>,
    wanted: Option<BTreeSet<String>>,
    dim: Option<usize>,
    entries: BTreeMap<String, Vec<f32>>,
    skipped: usize,
}

impl EmbeddingTableBuilder {
    /// With a vocabulary, only its words are kept and missing ones are
    /// randomly initialized; without one, every file entry is kept.
    pub fn new(vocab: Option<&[String]>) -> EmbeddingTableBuilder {
        EmbeddingTableBuilder {
            vocab: vocab.map(<[String]>::to_vec),
            wanted: vocab.map(|v| v.iter().cloned().collect()),
            dim: None,
            entries: BTreeMap::new(),
            skipped: 0,
        }
    }

    /// Adds one line (1-based `line` is used in errors). Blank lines are ignored.
    pub fn push_line(&mut self, line: usize, text: &str) -> Result<(), EmbeddingError> {
        let mut fields = text.split_whitespace();
        if line == 1 && is_header(text) {
            return Ok(());
        }
        let Some(word) = fields.next() else {
            return Ok(());
        };
        let values: Vec<f32> = fields
            .map(|f| f.parse::<f32>().map_err(|_| EmbeddingError::BadValue { line }))
            .collect::<Result<_, _>>()?;
        let expected = *self.dim.get_or_insert(values.len());
        if values.len() != expected || expected == 0 {
            return Err(EmbeddingError::RaggedDimensions { line, expected, got: values.len() });
        }
        if self.wanted.as_ref().is_some_and(|w| !w.contains(word)) {
            self.skipped += 1;
            return Ok(());
        }
        self.entries.entry(word.to_string()).or_insert(values);
        Ok(())
    }

    pub fn finish(self, seed: u64) -> Result<(EmbeddingTable, EmbeddingLoadReport), EmbeddingError> {
        let dim = self.dim.ok_or(EmbeddingError::Empty)?;
        let mut table = EmbeddingTable { dim, index: BTreeMap::new(), vectors: Vec::new(), pretrained: Vec::new() };
        let mut report = EmbeddingLoadReport { loaded: self.entries.len(), skipped: self.skipped, missing: Vec::new() };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bound = Float::sqrt(6.0 / (dim + 1) as f64);
        let order: Vec<String> = match &self.vocab {
            Some(v) => v.clone(),
            None => self.entries.keys().cloned().collect(),
        };
        let mut entries = self.entries;
        for word in order {
            if table.index.contains_key(&word) {
                continue;
            }
            let (vector, pretrained) = match entries.remove(&word) {
                Some(v) => (v, true),
                None => {
                    report.missing.push(word.clone());
                    ((0..dim).map(|_| rng.random_range(-bound..=bound) as f32).collect(), false)
                }
            };
            table.index.insert(word, table.vectors.len());
            table.vectors.push(vector);
            table.pretrained.push(pretrained);
        }
        Ok((table, report))
    }
}

/// A word2vec-style `count dim` first line.
fn is_header(text: &str) -> bool {
    let fields: Vec<&str> = text.split_whitespace().collect();
    fields.len() == 2 && fields.iter().all(|f| f.parse::<usize>().is_ok())
}

/// Parses a whole embedding file held in memory.
pub fn parse_embeddings(
    text: &str,
    vocab: Option<&[String]>,
    seed: u64,
) -> Result<(EmbeddingTable, EmbeddingLoadReport), EmbeddingError> {
    let mut builder = EmbeddingTableBuilder::new(vocab);
    for (i, line) in text.lines().enumerate() {
        builder.push_line(i + 1, line)?;
    }
    builder.finish(seed)
}
