//! Argument parsing and dispatch.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::commands::{
    cmd_eval, cmd_gradcheck, cmd_oracle, cmd_parse, cmd_stats, cmd_synth, cmd_train, cmd_validate, Console, Globals,
    TrainArgs,
};
use crate::config::parse_override;

#[derive(Debug, Parser)]
#[command(name = "topparse", version, about = "Hierarchical intent/slot parsing with a discriminative RNNG")]
pub struct Cli {
    /// Random seed (overrides the configuration file).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Configuration file of key=value lines.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Abort on the first malformed corpus line instead of skipping it.
    #[arg(long, global = true)]
    pub strict: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check trees against the well-formedness constraints.
    Validate { trees: PathBuf },
    /// Corpus statistics as JSON and CSV histograms.
    Stats {
        #[arg(required = true)]
        corpora: Vec<PathBuf>,
        /// Output prefix for <prefix>.json, <prefix>.depth.csv and <prefix>.length.csv.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Oracle action sequences of gold trees.
    Oracle {
        trees: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Replay every sequence and report differences.
        #[arg(long)]
        verify: bool,
    },
    /// Train a parser and write a checkpoint.
    Train {
        corpus: PathBuf,
        #[arg(long)]
        valid: Option<PathBuf>,
        /// Pretrained word vectors in text format.
        #[arg(long)]
        embeddings: Option<PathBuf>,
        #[arg(long, short)]
        out: PathBuf,
        /// Per-epoch JSON log.
        #[arg(long)]
        log: Option<PathBuf>,
        /// Worker threads; more than one uses lock-free shared updates and is not reproducible.
        #[arg(long, default_value_t = 1)]
        workers: usize,
        #[arg(long)]
        epochs: Option<usize>,
        /// Configuration override, repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE", value_parser = parse_override)]
        set: Vec<(String, String)>,
    },
    /// Parse utterances with a trained checkpoint.
    Parse {
        checkpoint: PathBuf,
        utterances: PathBuf,
        #[arg(long)]
        beam: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score predictions against gold trees.
    Eval {
        gold: PathBuf,
        predictions: PathBuf,
        /// Top-k accuracies to report, e.g. 1,3,5.
        #[arg(long, value_delimiter = ',')]
        topk: Vec<usize>,
        /// System name for the table row.
        #[arg(long, default_value = "RNNG")]
        system: String,
        /// Also write the JSON report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Finite-difference check of the training gradient on a tiny model.
    Gradcheck {
        /// Deliberately corrupt one gradient entry.
        #[arg(long)]
        corrupt: bool,
        #[arg(long = "set", value_name = "KEY=VALUE", value_parser = parse_override)]
        set: Vec<(String, String)>,
    },
    /// Write a generated corpus in TSV form.
    Synth {
        #[arg(long, default_value_t = 200)]
        count: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Runs one command line, returning the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(err, "{}", e.render());
            return e.exit_code() as u8;
        }
    };
    let g = Globals { seed: cli.seed, config: cli.config, strict: cli.strict };
    let mut con = Console { out, err };
    let result = match cli.command {
        Command::Validate { trees } => cmd_validate(&trees, &mut con),
        Command::Stats { corpora, out } => cmd_stats(&g, &corpora, out.as_deref(), &mut con),
        Command::Oracle { trees, out, verify } => cmd_oracle(&trees, out.as_deref(), verify, &mut con),
        Command::Train { corpus, valid, embeddings, out, log, workers, epochs, mut set } => {
            if let Some(e) = epochs {
                set.push(("epochs".to_string(), e.to_string()));
            }
            let args = TrainArgs { train: corpus, valid, embeddings, out, log, workers, overrides: set };
            cmd_train(&g, &args, &mut con)
        }
        Command::Parse { checkpoint, utterances, beam, out } => {
            cmd_parse(&checkpoint, &utterances, beam, out.as_deref(), &mut con)
        }
        Command::Eval { gold, predictions, topk, system, out } => {
            cmd_eval(&gold, &predictions, &topk, &system, out.as_deref(), &mut con)
        }
        Command::Gradcheck { corrupt, set } => cmd_gradcheck(&g, &set, corrupt, &mut con),
        Command::Synth { count, out } => cmd_synth(&g, count, out.as_deref(), &mut con),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(con.err, "error: {e}");
            e.exit_code()
        }
    }
}

