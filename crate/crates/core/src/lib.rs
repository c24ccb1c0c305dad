//! Hierarchical intent/slot semantic parsing.
//!
//! The crate is `no_std` and only needs `alloc`. It contains the tree
//! representation and its bracketed text format ([`treebank`]), the top-down
//! transition system ([`transitions`]), a small reverse-mode differentiation
//! substrate ([`neural`]), the discriminative RNNG parser ([`rnng`]), token
//! normalization ([`preprocess`]), corpus ingestion and statistics
//! ([`dataset`]) and the evaluation metrics ([`metrics`]).
//!
//! Everything that touches the filesystem, threads or the command line lives
//! in the companion `topparse` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod dataset;
pub mod metrics;
pub mod neural;
pub(crate) mod persistent;
pub mod preprocess;
pub mod rnng;
pub mod transitions;
pub mod treebank;

pub use metrics::MetricsReport;
pub use rnng::{Model, RnngConfig};
pub use transitions::{Action, ParserState};
pub use treebank::{Label, LabelKind, Node, NonTerminal, Tree};
