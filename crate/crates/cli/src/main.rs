//! `serkit` command-line front end.
//!
//! Exit codes: 0 success, 1 internal failure, 2 user or configuration error.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Debug, thiserror::Error)]
pub enum Failure {
    #[error("{0}")]
    User(String),
    #[error("{0}")]
    Internal(String),
}

impl From<serkit::Error> for Failure {
    fn from(e: serkit::Error) -> Self {
        if e.is_user_error() {
            Failure::User(e.to_string())
        } else {
            Failure::Internal(e.to_string())
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "serkit", version, about = "Cross-lingual speech emotion recognition toolkit")]
pub struct Cli {
    /// Seed for synth/split/train; for `expt` it replaces the seed list.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for feature extraction and independent runs.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
    /// Force single-worker execution.
    #[arg(long, global = true)]
    pub strict: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a manifest CSV and clip-length statistics for a corpus directory.
    Scan {
        #[arg(long)]
        corpus: String,
        #[arg(long)]
        root: PathBuf,
        /// Manifest output (default: manifest_<corpus>.csv).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Extract MFCC features for manifests into the cache.
    Features {
        #[arg(long = "manifest", required = true)]
        manifests: Vec<PathBuf>,
        #[arg(long, default_value = "cache")]
        cache: PathBuf,
        /// MFCC config JSON (fields default individually).
        #[arg(long)]
        mfcc: Option<PathBuf>,
    },
    /// Write synthetic pseudo-language corpora.
    Synth {
        #[arg(long)]
        out: PathBuf,
        /// Synthesis spec JSON (default: built-in four-language spec).
        #[arg(long)]
        spec: Option<PathBuf>,
    },
    /// Generate and verify a split file.
    Split {
        /// mono, sent, cross or multi
        #[arg(long)]
        scenario: String,
        /// Source manifest(s); one for mono/sent/cross, 2-3 for multi.
        #[arg(long = "manifest", required = true)]
        manifests: Vec<PathBuf>,
        /// Test-corpus manifest for cross/multi.
        #[arg(long)]
        target: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one model on one split and save a checkpoint.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        split: PathBuf,
        #[arg(long, default_value = "VGGE")]
        model: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a checkpoint on a split's test partition.
    Eval {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        split: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run an experiment: mono, sent, cross or multi.
    Expt {
        kind: String,
        #[arg(long)]
        config: PathBuf,
    },
    /// Re-render tables from a results JSON after checking consistency.
    Report {
        #[arg(long)]
        results: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::User(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Internal(msg)) => {
            eprintln!("internal error: {msg}");
            ExitCode::from(1)
        }
    }
}
