//! `dyntransync` command-line interface.
//!
//! Subcommands: `synth`, `estimate`, `bench`, `cv`, `ingest`, `diagnose`.
//! Every command accepts `--seed`, `--threads` and `--out-dir`, writes its
//! outputs under the output directory and records a manifest with the
//! resolved-configuration hash. Exit codes: 0 success, 2 configuration
//! error, 3 I/O failure, 4 estimator precondition or convergence failure.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dyntransync::Error as LibError;

#[derive(Parser)]
#[command(
    name = "dyntransync",
    version,
    about = "Dynamic translation synchronization toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Master seed; overrides the seed in the configuration file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Monte-Carlo fan-out cap; 1 is the bit-reproducible reference mode.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Directory receiving every output file.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic graphs, ground truth and observations.
    Synth {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Fit a strength trajectory to an observation file.
    Estimate {
        /// Observation set (JSON).
        #[arg(long)]
        obs: PathBuf,
        /// Estimator: ls, dls or dproj.
        #[arg(long)]
        method: config::MethodArg,
        /// Explicit penalty (dls) or threshold (dproj).
        #[arg(long, conflicts_with = "auto")]
        param: Option<f64>,
        /// Apply the closed-form parameter rule; requires --smoothness.
        #[arg(long, requires = "smoothness")]
        auto: bool,
        /// Smoothness budget used by --auto.
        #[arg(long)]
        smoothness: Option<f64>,
        /// Rate regime for the dls rule: fixed-graph, evolving or
        /// evolving-with-margin.
        #[arg(long, default_value = "evolving")]
        regime: config::RegimeArg,
        /// Solver tolerance.
        #[arg(long, default_value_t = 1e-10)]
        rel_tolerance: f64,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Run the Monte-Carlo benchmark harness over a horizon grid.
    Bench {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Cross-validate an estimator's tuning parameter.
    Cv {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Build observations from raw rating or match CSV data.
    Ingest {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Dense spectral diagnostics of a graph sequence.
    Diagnose {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
}

/// CLI-level failure with its exit code.
pub(crate) enum CliError {
    /// Invalid configuration or malformed input data (exit 2).
    Config(String),
    /// Filesystem failure (exit 3).
    Io(String),
    /// Estimator precondition or convergence failure (exit 4).
    Domain(String),
    /// Internal invariant violation (exit 1).
    Internal(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Internal(_) => 1,
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
            CliError::Domain(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Io(m) | CliError::Domain(m) | CliError::Internal(m) => {
                m
            }
        }
    }
}

impl From<LibError> for CliError {
    fn from(err: LibError) -> Self {
        match err {
            LibError::InvalidArgument(_) | LibError::Dimension(_) | LibError::Parse(_) => {
                CliError::Config(err.to_string())
            }
            LibError::Io(_) | LibError::Json(_) | LibError::Csv(_) => CliError::Io(err.to_string()),
            LibError::Precondition(_)
            | LibError::Convergence { .. }
            | LibError::UnsupportedSize(_) => CliError::Domain(err.to_string()),
            LibError::Internal(_) => CliError::Internal(err.to_string()),
        }
    }
}

pub(crate) type CliResult<T> = Result<T, CliError>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Synth { config, common } => commands::run_synth(&config, &common),
        Command::Estimate {
            obs,
            method,
            param,
            auto,
            smoothness,
            regime,
            rel_tolerance,
            common,
        } => commands::run_estimate(commands::EstimateArgs {
            obs,
            method,
            param,
            auto,
            smoothness,
            regime,
            rel_tolerance,
            common,
        }),
        Command::Bench { config, common } => commands::run_bench(&config, &common),
        Command::Cv { config, common } => commands::run_cv(&config, &common),
        Command::Ingest { config, common } => commands::run_ingest(&config, &common),
        Command::Diagnose { config, common } => commands::run_diagnose(&config, &common),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", err.message());
            ExitCode::from(err.exit_code())
        }
    }
}
