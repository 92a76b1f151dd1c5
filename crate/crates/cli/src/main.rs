//! `lens`: batch driver for instance generation, data collection, forest
//! training, benchmark runs and result reports.

mod commands;
mod config;
mod manifest;

use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lens_core::evaluation::EvalError;
use lens_core::instance_io::InstanceIoError;
use lens_core::learning::LearningError;
use lens_core::pipeline::PipelineError;

/// Exit 2 for unreadable or inconsistent input, 3 for data and model errors.
#[derive(Debug)]
pub enum CliError {
    Input(String),
    Data(String),
}

impl CliError {
    pub fn input(path: &Path, e: impl Display) -> Self {
        Self::Input(format!("{}: {e}", path.display()))
    }

    fn code(&self) -> u8 {
        match self {
            Self::Input(_) => 2,
            Self::Data(_) => 3,
        }
    }
}

impl Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Input(m) => write!(f, "input error: {m}"),
            Self::Data(m) => write!(f, "data error: {m}"),
        }
    }
}

impl From<InstanceIoError> for CliError {
    fn from(e: InstanceIoError) -> Self {
        Self::Input(e.to_string())
    }
}

impl From<LearningError> for CliError {
    fn from(e: LearningError) -> Self {
        match e {
            LearningError::SingleClass | LearningError::DimensionMismatch { .. } => Self::Data(e.to_string()),
            _ => Self::Input(e.to_string()),
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::ManifestMismatch | PipelineError::NoCandidates | PipelineError::NoRounds => {
                Self::Input(e.to_string())
            }
            PipelineError::Learning(inner) => inner.into(),
            _ => Self::Data(e.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::LengthMismatch(..) | EvalError::InconsistentRows { .. } | EvalError::Empty => {
                Self::Input(e.to_string())
            }
            _ => Self::Data(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "lens", version, about = "Learned neighborhood selection for VRPTW large neighborhood search")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML file with default settings; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Base seed; falls back to the config file, then LENS_SEED, then 0.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write the 10-instance training batch derived from a base instance.
    Generate(GenerateArgs),
    /// Run data collection and write a sample file.
    Collect(CollectArgs),
    /// Train a forest on one or more sample files.
    Train(TrainArgs),
    /// Run the LNS on one instance and write its trace.
    Solve(SolveArgs),
    /// Summarize solve traces into result tables and convergence series.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub base: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct CollectArgs {
    /// Instance file or directory of instance files.
    #[arg(long)]
    pub instances: PathBuf,
    /// `random` or the path of a trained model.
    #[arg(long, default_value = "random")]
    pub strategy: String,
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub n1: Option<usize>,
    #[arg(long)]
    pub runs: Option<usize>,
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, num_args = 1.., required = true)]
    pub samples: Vec<PathBuf>,
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Share of samples used for training; the rest is held out.
    #[arg(long)]
    pub split: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long)]
    pub instance: PathBuf,
    /// `random`, `oracle` or the path of a trained model.
    #[arg(long, default_value = "random")]
    pub selector: String,
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub n1: Option<usize>,
    /// Independent runs; with more than one, traces are named `<out>.r<k>`.
    #[arg(long)]
    pub runs: Option<usize>,
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Trace file; the best solution goes to `<out>.solution`.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Directory holding solve traces and their manifests.
    #[arg(long)]
    pub traces: PathBuf,
    /// Whitespace-separated `instance value` lines.
    #[arg(long)]
    pub bks: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Held-out sample files for selector validation.
    #[arg(long, num_args = 1..)]
    pub samples: Vec<PathBuf>,
    /// Models to validate on `--samples`.
    #[arg(long, num_args = 1..)]
    pub models: Vec<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(a) => commands::generate(&a),
        Command::Collect(a) => commands::collect(&a),
        Command::Train(a) => commands::train(&a),
        Command::Solve(a) => commands::solve(&a),
        Command::Report(a) => commands::report(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("lens: {e}");
            ExitCode::from(e.code())
        }
    }
}
