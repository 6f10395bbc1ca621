//! `dbnkit`: generate synthetic trajectories, learn structures, score
//! families and run benchmark sweeps.
//!
//! Exit codes:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 1 | I/O or other failure |
//! | 2 | usage error |
//! | 3 | invalid configuration |
//! | 4 | invalid data or input file |
//! | 5 | model or domain error |
//! | 6 | optimizer failure |
//! | 7 | time limit exceeded |
//! | 8 | problem size guard |

mod commands;
mod config;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use dbnkit::DbnError;

/// Schema or value error in a configuration file or option.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

/// Bad command-line usage detected after argument parsing.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DomainArg {
    Discrete,
    Continuous,
}

#[derive(Debug, Parser)]
#[command(name = "dbnkit", version, about = "Dynamic Bayesian network structure learning experiments")]
pub struct Cli {
    /// Worker threads for data-parallel stages (default: all cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, clap::Args)]
pub struct DataArgs {
    /// Long-format trajectory file with header traj,t,x1..xn.
    #[arg(long)]
    pub data: PathBuf,
    /// Static covariates with header traj,z1..zm.
    #[arg(long = "static")]
    pub statics: Option<PathBuf>,
    /// Value domain; discrete arities are inferred from the data.
    #[arg(long, value_enum)]
    pub domain: DomainArg,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample ground-truth models and trajectories for every replicate of a regime.
    Generate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one learner on a dataset and write its report as JSON.
    Learn {
        #[command(flatten)]
        data: DataArgs,
        /// exact, hill_climb, dynotears or bounded.
        #[arg(long)]
        learner: String,
        /// Hyperparameters as a JSON object, e.g. '{"score":"bde"}'.
        #[arg(long)]
        hyper: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        timeout_sec: Option<f64>,
        /// Report path (default: stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare a learner report with a ground truth; with data, also score a temporal hold-out.
    Eval {
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long = "static")]
        statics: Option<PathBuf>,
        #[arg(long, value_enum)]
        domain: Option<DomainArg>,
        #[arg(long, default_value_t = dbnkit::eval::DEFAULT_TRAIN_FRACTION)]
        fraction: f64,
        /// Count-ratio parameters; unseen test events give -inf.
        #[arg(long)]
        strict_loglik: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every (triple, replicate, learner) cell of a configured sweep.
    Benchmark {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        timeout_sec: Option<f64>,
        #[arg(long)]
        strict_loglik: bool,
    },
    /// Score one family.
    Score {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        node: usize,
        /// Comma-separated parents such as intra:1,inter:0,auto:1,static:0.
        #[arg(long, default_value = "")]
        parents: String,
        /// ll, aic, aicc, bic, bde or bge.
        #[arg(long, default_value = "bic")]
        score: String,
        #[arg(long, default_value_t = 1.0)]
        ess: f64,
        /// Lag window: child times start at max(1, p).
        #[arg(long, default_value_t = 1)]
        p: usize,
    },
    /// Validate a dataset and optionally a structure against it.
    Check {
        #[command(flatten)]
        data: DataArgs,
        /// truth.json, a learner report, or a bare structure.
        #[arg(long)]
        structure: Option<PathBuf>,
    },
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return 2;
        }
        if cause.is::<ConfigError>() {
            return 3;
        }
        if let Some(e) = cause.downcast_ref::<DbnError>() {
            return match e {
                DbnError::Io(_) => 1,
                DbnError::Range(_) => 3,
                DbnError::Parse(_) | DbnError::Data(_) | DbnError::Dimension(_) | DbnError::Split(_) => 4,
                DbnError::Domain(_) | DbnError::Model(_) | DbnError::Cycle { .. } | DbnError::Underdetermined { .. } => 5,
                DbnError::Optimizer(_) => 6,
                DbnError::Timeout => 7,
                DbnError::Size(_) => 8,
            };
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
