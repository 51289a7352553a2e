mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use finqa_cbr::corpus::LinearizeMode;
use finqa_cbr::retrieval::IndexMode;

use crate::config::Overrides;

/// Case-based reasoning toolkit for numerical question answering over
/// financial reports.
#[derive(Debug, Parser)]
#[command(name = "finqa-cbr", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML run configuration; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Split name from [data], or a dataset file.
    #[arg(long, global = true)]
    split: Option<String>,
    /// Precision cutoffs, comma-separated.
    #[arg(long, global = true, value_delimiter = ',')]
    k: Option<Vec<usize>>,
    #[arg(long, global = true)]
    threshold: Option<f64>,
    /// Operation weight; the argument weight becomes 1 - w_ops.
    #[arg(long = "w-ops", global = true)]
    w_ops: Option<f64>,
    /// `all` or `top:<n>`.
    #[arg(long, global = true)]
    pool: Option<String>,
    #[arg(long = "index-mode", global = true)]
    index_mode: Option<IndexMode>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate a split and write its accepted records and a reject report.
    Ingest,
    /// Question-type, step-count and gold-coverage statistics.
    Stats {
        /// Gold-case file from `mine`, for the coverage histogram.
        #[arg(long)]
        gold: Option<PathBuf>,
    },
    /// Render each record's table as sentences.
    Linearize {
        #[arg(long)]
        id: Option<String>,
        #[arg(long)]
        mode: Option<LinearizeMode>,
    },
    /// Mine gold cases for every query of the split.
    Mine,
    /// Retrieve cases for every query and report precision@k.
    Retrieve {
        /// Gold-case file; mined on the fly when absent.
        #[arg(long)]
        gold: Option<PathBuf>,
    },
    /// Execute one program, or check every gold program of the split.
    Exec {
        #[arg(long)]
        program: Option<String>,
        /// JSON table grid (row 0 is the header).
        #[arg(long)]
        table: Option<PathBuf>,
    },
    /// Score a prediction file.
    Eval {
        #[arg(long)]
        predictions: PathBuf,
        /// Retrieval output to score with precision@k.
        #[arg(long)]
        retrieval: Option<PathBuf>,
        /// Gold-case file for the retrieval output.
        #[arg(long)]
        gold: Option<PathBuf>,
    },
    /// Program score and equivalence of two programs.
    Score {
        #[arg(long)]
        target: String,
        #[arg(long)]
        candidate: String,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let overrides = Overrides {
        split: cli.split.clone(),
        k: cli.k.clone(),
        threshold: cli.threshold,
        w_ops: cli.w_ops,
        pool: cli.pool.clone(),
        index_mode: cli.index_mode,
        seed: cli.seed,
        out: cli.out.clone(),
    };
    match commands::run(cli.command, cli.config.as_deref(), &overrides) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {:#}", failure.error);
            ExitCode::from(failure.code)
        }
    }
}
