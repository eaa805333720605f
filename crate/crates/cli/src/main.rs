//! `rebalance`: inspect, rebalance, train on and evaluate embedding datasets.

mod commands;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "rebalance", version, about = "Rebalance class-imbalanced embedding datasets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print size, dimension, class histogram and origin counts.
    Inspect(InspectArgs),
    /// Oversample every class up to the majority count.
    Balance(BalanceArgs),
    /// Train the MLP classifier and write a checkpoint.
    Train(TrainArgs),
    /// Score a checkpoint on a dataset; metrics JSON goes to stdout.
    Evaluate(EvaluateArgs),
    /// Run the (method x size x fold) grid and write a JSON report.
    Sweep(SweepArgs),
    /// Project onto the top two principal components as `x,y,label,origin` CSV.
    Project(ProjectArgs),
    /// Write a seeded Gaussian-cluster dataset.
    MakeBenchmark(BenchmarkArgs),
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    pub path: PathBuf,
    /// `binary` or `csv`; inferred from the extension when omitted.
    #[arg(long)]
    pub format: Option<String>,
}

#[derive(Debug, Args)]
pub struct BalanceArgs {
    /// smote, borderline, adasyn, ros or vae.
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// JSON array with one entry per synthetic sample.
    #[arg(long)]
    pub provenance: Option<PathBuf>,
    /// Resampler settings as JSON; explicit flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Fall back to SMOTE for classes with no borderline samples.
    #[arg(long)]
    pub fallback: bool,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Early-stopping validation set.
    #[arg(long)]
    pub valid: Option<PathBuf>,
    #[arg(long)]
    pub model_out: PathBuf,
    /// Classifier settings as JSON; explicit flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub standardize: bool,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long = "in")]
    pub input: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Sweep spec as JSON, optionally with a `dataset` path.
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out_report: PathBuf,
    /// Dataset path; overrides the one in the config.
    #[arg(long = "in")]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads for grid cells; 0 picks one per core.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Args)]
pub struct ProjectArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// CSV destination; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    #[arg(long)]
    pub out: PathBuf,
    /// Full cluster spec as JSON; replaces the shape flags below.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    /// Distance between consecutive class means along the first axis.
    #[arg(long, default_value_t = 4.0)]
    pub separation: f64,
    #[arg(long, default_value_t = 1.0)]
    pub variance: f64,
    /// Samples per class, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = [100usize, 100])]
    pub counts: Vec<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("REBALANCE_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => e.exit(),
        Err(e) => {
            let first = e.to_string().lines().next().unwrap_or_default().trim_start_matches("error: ").to_string();
            return fail(CliError::usage(first));
        }
    };
    let result = match cli.command {
        Command::Inspect(a) => commands::inspect(&a),
        Command::Balance(a) => commands::balance(&a),
        Command::Train(a) => commands::train(&a),
        Command::Evaluate(a) => commands::evaluate(&a),
        Command::Sweep(a) => commands::sweep(&a),
        Command::Project(a) => commands::project(&a),
        Command::MakeBenchmark(a) => commands::make_benchmark(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e),
    }
}

fn fail(e: CliError) -> ExitCode {
    eprintln!("{e}");
    ExitCode::from(e.code as u8)
}
