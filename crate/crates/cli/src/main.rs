//! `bdsense`: configuration checks, scene simulation, single-dataset
//! estimation, Monte Carlo sweeps and result tables.
//!
//! Exit codes: 0 success, 1 a check failed, 2 usage or schema error, 3 I/O
//! error.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use bdsense::eval::Method;
use clap::{Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "bdsense", version, about = "BD-RIS assisted OFDM target parameter estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate identifiability conditions and the synthesis self-check.
    Check {
        /// Configuration file; built-in defaults when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Methods to check, comma separated; the config's list by default.
        #[arg(long, value_delimiter = ',')]
        method: Vec<Method>,
    },
    /// Synthesize one scene and write it as a dataset file.
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output dataset path.
        #[arg(long)]
        out: PathBuf,
        /// Master seed; overrides the config.
        #[arg(long, env = "BDSENSE_SEED")]
        seed: Option<u64>,
        /// SNR in dB (`inf` for a noiseless echo); the first configured SNR by default.
        #[arg(long)]
        snr: Option<f64>,
    },
    /// Run one method on a dataset and append a row to a per-trial CSV.
    Estimate {
        /// Dataset written by `simulate`.
        dataset: PathBuf,
        #[arg(long)]
        method: Method,
        /// Per-trial CSV to append to.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a Monte Carlo sweep and write `trials.csv` and `aggregate.csv`.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Worker threads; all available cores by default.
        #[arg(long)]
        workers: Option<usize>,
        /// Master seed; overrides the config.
        #[arg(long, env = "BDSENSE_SEED")]
        seed: Option<u64>,
        /// SNR list in dB, comma separated; overrides the config.
        #[arg(long, value_delimiter = ',')]
        snr: Option<Vec<f64>>,
        /// Trials per SNR point; overrides the config.
        #[arg(long)]
        trials: Option<usize>,
        /// Methods, comma separated; overrides the config.
        #[arg(long, value_delimiter = ',')]
        method: Vec<Method>,
    },
    /// Print an aggregate (or per-trial) CSV as a table.
    Report {
        csv: PathBuf,
        /// Configuration used for the sweep; only needed to aggregate a per-trial file.
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
