//! `clonevet`: import, label, train, evaluate and serve clone validation models.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug)]
pub enum CliError {
    /// Bad invocation; exit code 1.
    Usage(String),
    /// Failure while running; exit code 2.
    Runtime(String),
    /// Stdout was closed by the reader.
    Closed,
}

impl From<clonevet_core::Error> for CliError {
    fn from(e: clonevet_core::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        if e.kind() == std::io::ErrorKind::BrokenPipe {
            return CliError::Closed;
        }
        CliError::Runtime(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "clonevet", version, about = "Validate code clone pairs reported by clone detectors")]
pub struct Cli {
    /// TOML file with defaults for any long flag (top level or per subcommand table)
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

/// Where labeled pairs come from. Exactly one is needed.
#[derive(Debug, Args, Clone, Default)]
pub struct DataArgs {
    /// Clone store file
    #[arg(long)]
    pub store: Option<PathBuf>,
    /// Benchmark directory written by `mutate`
    #[arg(long)]
    pub bench: Option<PathBuf>,
    /// Feature CSV written by `features`
    #[arg(long)]
    pub features: Option<PathBuf>,
    /// Only use labels given by these labelers (store only, comma separated)
    #[arg(long, value_delimiter = ',')]
    pub labeler: Option<Vec<String>>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Import detector reports or a benchmark directory into a store
    Import(ImportArgs),
    /// Label unlabeled pairs interactively on the terminal
    Label(LabelArgs),
    /// Write the feature CSV of a store or benchmark
    Features(FeaturesArgs),
    /// Cross-validate and train a model
    Train(TrainArgs),
    /// Score a model on labeled data: metrics, ROC/PR curves, chi-squared scores
    Evaluate(EvaluateArgs),
    /// Generate a mutation benchmark of true and false clone pairs
    Mutate(MutateArgs),
    /// Run the HTTP validation service
    Serve(ServeArgs),
    /// Feature distribution report and type-space export
    Report(ReportArgs),
    /// Validate one pair of files with a trained model
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
pub struct ImportArgs {
    #[arg(long)]
    pub store: Option<PathBuf>,
    /// generic-csv or pairs-directory
    #[arg(long)]
    pub format: Option<String>,
    #[arg(long)]
    pub path: Option<PathBuf>,
    /// Detector tag for rows that carry none
    #[arg(long)]
    pub detector: Option<String>,
}

#[derive(Debug, Args)]
pub struct LabelArgs {
    #[arg(long)]
    pub store: Option<PathBuf>,
    #[arg(long)]
    pub labeler: Option<String>,
    /// Stop after this many labels
    #[arg(long)]
    pub limit: Option<usize>,
}

#[derive(Debug, Args)]
pub struct FeaturesArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Append the two size features
    #[arg(long)]
    pub extras: bool,
    /// Output file; stdout when absent
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// nn, deep, nb or fica
    #[arg(long)]
    pub model: Option<String>,
    /// Cross-validation folds; 0 skips cross-validation
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Hidden layer widths, comma separated
    #[arg(long)]
    pub hidden: Option<String>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub dropout: Option<f64>,
    #[arg(long)]
    pub extras: bool,
    /// Model document to write
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Cross-validation report (JSON)
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Per-epoch mean test accuracy (CSV)
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Model document
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Directory for roc.csv and pr.csv
    #[arg(long)]
    pub curves: Option<PathBuf>,
    /// Chi-squared feature scores (CSV)
    #[arg(long)]
    pub chi2: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MutateArgs {
    /// Directory of Java files whose methods form the corpus
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Use a generated corpus of this many files instead
    #[arg(long)]
    pub synthetic_files: Option<usize>,
    #[arg(long)]
    pub synthetic_methods: Option<usize>,
    /// Minimum method length in lines
    #[arg(long)]
    pub min_lines: Option<usize>,
    #[arg(long = "true")]
    pub true_count: Option<usize>,
    #[arg(long = "false")]
    pub false_count: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Nine operator weights, comma separated
    #[arg(long)]
    pub mix: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, env = "CLONEVET_PORT")]
    pub port: Option<u16>,
    #[arg(long, env = "CLONEVET_STORE")]
    pub store: Option<PathBuf>,
    #[arg(long, env = "CLONEVET_MODEL")]
    pub model: Option<PathBuf>,
    #[arg(long, env = "CLONEVET_GAMMA")]
    pub gamma: Option<f64>,
    #[arg(long, env = "CLONEVET_CORS_ORIGIN")]
    pub cors_origin: Option<String>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Full distribution report with histograms (JSON)
    #[arg(long)]
    pub json: Option<PathBuf>,
    /// Type-space CSV; needs --model
    #[arg(long)]
    pub type_space: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub gamma: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub a: Option<PathBuf>,
    #[arg(long)]
    pub b: Option<PathBuf>,
    #[arg(long)]
    pub gamma: Option<f64>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .target(env_logger::Target::Stderr)
        .init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(cli) {
        Ok(()) | Err(CliError::Closed) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}\n\nRun `clonevet --help` for usage.");
            ExitCode::from(1)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
