//! The `agdt` command line: normalize, stats, split, decode, eval, compare,
//! train-mini and report.
//!
//! Exit codes: 0 success, 1 usage error, 2 input data error, 3 internal
//! invariant violation. Diagnostics go to stderr; data goes to files or
//! stdout.

mod commands;
mod files;

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

pub use commands::{cmd_report, cmd_stats, load_corpus};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Internal(_) => 3,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "agdt",
    version,
    about = "Treebank normalization, evaluation and model comparison"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Normalize treebank files (AGDT XML or CoNLL-U) into CoNLL-U.
    Normalize(NormalizeArgs),
    /// Token counts per document, optionally joined with a catalog.
    Stats(StatsArgs),
    /// Generate the test block and cross-validation runs.
    Split(SplitArgs),
    /// Decode score matrices into trees.
    Decode(DecodeArgs),
    /// Score a system file against a gold file.
    Eval(EvalArgs),
    /// Pairwise Bayesian correlated t-tests over per-run scores.
    Compare(CompareArgs),
    /// Train the small character-level parser.
    TrainMini(TrainMiniArgs),
    /// Mean (SD) table plus pairwise comparisons.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct NormalizeArgs {
    /// Input files; `.xml` is read as AGDT XML, anything else as CoNLL-U.
    #[arg(long = "input", required = true, num_args = 1..)]
    pub inputs: Vec<PathBuf>,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// TOML normalization config; defaults apply when absent.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Also write the aggregate report here.
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long = "input", required = true, num_args = 1..)]
    pub inputs: Vec<PathBuf>,
    /// Tab-separated document catalog.
    #[arg(long)]
    pub catalog: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    /// Normalized CoNLL-U files, concatenated in the given order.
    #[arg(long = "input", required = true, num_args = 1..)]
    pub inputs: Vec<PathBuf>,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Write only `manifest.txt`, not the per-run CoNLL-U files.
    #[arg(long)]
    pub manifest_only: bool,
}

#[derive(Debug, Args)]
pub struct DecodeArgs {
    /// Score-matrix file.
    #[arg(long)]
    pub scores: PathBuf,
    /// Allow several tokens to attach to the root.
    #[arg(long)]
    pub multi_root: bool,
    /// CoNLL-U file whose heads are replaced by the decoded trees.
    #[arg(long)]
    pub conllu: Option<PathBuf>,
    /// Output path; stdout when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub gold: PathBuf,
    #[arg(long)]
    pub system: PathBuf,
    /// Score invalid system trees instead of rejecting them.
    #[arg(long)]
    pub permissive: bool,
    #[arg(long, value_enum, default_value_t = EvalFormat::Table)]
    pub format: EvalFormat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum EvalFormat {
    Table,
    Kv,
}

#[derive(Debug, Args)]
pub struct RopeArgs {
    #[arg(long, default_value_t = -1.0, allow_negative_numbers = true)]
    pub rope_lo: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub rope_hi: f64,
    #[arg(long, default_value_t = agdt_core::bayes::DEFAULT_RHO)]
    pub rho: f64,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Score vectors, one `name<TAB>score...` line per model.
    #[arg(long)]
    pub scores: PathBuf,
    #[command(flatten)]
    pub rope: RopeArgs,
    /// Write one posterior density CSV per pair into this directory.
    #[arg(long)]
    pub grid_dir: Option<PathBuf>,
    #[arg(long, default_value_t = 201)]
    pub grid_points: usize,
    /// Grid half-width in posterior scale units.
    #[arg(long, default_value_t = 6.0)]
    pub grid_span: f64,
}

#[derive(Debug, Args)]
pub struct TrainMiniArgs {
    /// Training corpus in CoNLL-U.
    #[arg(long, conflicts_with = "toy", required_unless_present = "toy")]
    pub train: Option<PathBuf>,
    /// Train on this many generated toy sentences instead.
    #[arg(long)]
    pub toy: Option<usize>,
    /// TOML file of network and training settings.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub model_out: Option<PathBuf>,
    #[arg(long)]
    pub loss_csv: Option<PathBuf>,
    /// Annotate this CoNLL-U file with the trained model.
    #[arg(long, requires = "predictions")]
    pub predict: Option<PathBuf>,
    #[arg(long, requires = "predict")]
    pub predictions: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Score vectors named `model` or `model:metric`.
    #[arg(long)]
    pub scores: PathBuf,
    #[command(flatten)]
    pub rope: RopeArgs,
}

/// Parses `args` (program name first) and runs the command, writing data to
/// `out`. Help and version requests print and succeed.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> Result<(), CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    write!(out, "{e}").map_err(|e| CliError::Internal(e.to_string()))
                }
                _ => Err(CliError::Usage(e.render().to_string())),
            };
        }
    };
    commands::dispatch(cli.command, out)
}
