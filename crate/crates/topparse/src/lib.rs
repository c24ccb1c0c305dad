//! File formats, command-line tools and multi-threaded training for the
//! `topparse-core` parser.

pub mod checkpoint;
pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod hogwild;
pub mod io;
pub mod synth;

pub use error::CliError;
