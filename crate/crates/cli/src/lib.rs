//! Command-line front end: `optimize`, `reconstruct`, `evaluate`, `theory`
//! and `tune-lr`. Exit code 0 on success, 1 on invalid input, 2 when a
//! computation or write fails.

pub mod commands;
pub mod config;
pub mod manifest;
pub mod pipeline;
pub mod plot;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use tmholo::geometry::Channel;
use tmholo::optimizer::Method;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error(transparent)]
    Runtime(#[from] anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

impl From<tmholo::Error> for CliError {
    fn from(e: tmholo::Error) -> Self {
        CliError::Runtime(e.into())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.into())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Runtime(e.into())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Runtime(e.into())
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(
    name = "tmholo",
    version,
    about = "Binary amplitude holograms with temporal multiplexing"
)]
pub struct Cli {
    /// Log level filter (error, warn, info, debug, trace).
    #[arg(long, global = true, default_value = "info")]
    pub log: String,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build targets and optimize a multiplexed hologram set per channel.
    Optimize(OptimizeArgs),
    /// Accumulated reconstructions of a run at chosen depths.
    Reconstruct(ReconstructArgs),
    /// PSNR, SSIM and contrast metrics of a run against its targets.
    Evaluate(EvaluateArgs),
    /// Tables and plots of the speckle model.
    Theory(TheoryArgs),
    /// Final B-SGD loss over a grid of learning rates.
    TuneLr(TuneLrArgs),
}

/// Flags that override fields of the job config.
#[derive(Debug, Args, Clone, Default)]
pub struct Overrides {
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Comma-separated channel list, e.g. `red,blue` or `g`.
    #[arg(long, value_delimiter = ',')]
    pub channel: Option<Vec<Channel>>,
    #[arg(long)]
    pub frames: Option<usize>,
    #[arg(long)]
    pub method: Option<Method>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// Output directory (relative to the working directory).
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[command(flatten)]
    pub overrides: Overrides,
    /// Validate and print the plan without computing.
    #[arg(long)]
    pub dry_run: bool,
}

#[derive(Debug, Args)]
pub struct ReconstructArgs {
    /// Run directory written by `optimize`.
    #[arg(long)]
    pub run: PathBuf,
    /// Comma-separated depths in meters.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, conflicts_with = "sweep")]
    pub depths: Option<Vec<f64>>,
    /// `start:stop:step` in meters, stop inclusive.
    #[arg(long, allow_hyphen_values = true)]
    pub sweep: Option<String>,
    /// Use only the first m frames.
    #[arg(long)]
    pub frames: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub channel: Option<Vec<Channel>>,
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub dry_run: bool,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub run: PathBuf,
    /// Comma-separated frame counts; default 1, 2, 4, 8, 16 and all frames.
    #[arg(long, value_delimiter = ',')]
    pub frames: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub channel: Option<Vec<Channel>>,
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub dry_run: bool,
}

#[derive(Debug, Args)]
pub struct TheoryArgs {
    #[arg(long, default_value = "theory")]
    pub output: PathBuf,
    /// Largest phasor count tabulated.
    #[arg(long, default_value_t = 16)]
    pub max_r: u32,
    /// Largest frame count tabulated.
    #[arg(long, default_value_t = 24)]
    pub frames: u32,
    /// Monte-Carlo samples per phasor count.
    #[arg(long, default_value_t = 200_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Optional job config whose geometry sets the overlap ratio.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub dry_run: bool,
}

#[derive(Debug, Args)]
pub struct TuneLrArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Comma-separated learning rates; default 1e2 to 1e5 in half decades.
    #[arg(long, value_delimiter = ',')]
    pub grid: Option<Vec<f64>>,
    #[command(flatten)]
    pub overrides: Overrides,
    #[arg(long)]
    pub dry_run: bool,
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    init_logging(&cli.log);
    match run(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            match &e {
                CliError::Validation(msg) => eprintln!("error: {msg}"),
                CliError::Runtime(err) => eprintln!("error: {err:#}"),
            }
            e.exit_code()
        }
    }
}

fn init_logging(filter: &str) {
    // A second initialization (tests calling in-process) is harmless.
    let _ = env_logger::Builder::new()
        .parse_filters(filter)
        .format_timestamp(None)
        .try_init();
}

pub fn run(command: Command) -> CliResult<()> {
    match command {
        Command::Optimize(a) => commands::optimize::run(&a),
        Command::Reconstruct(a) => commands::reconstruct::run(&a),
        Command::Evaluate(a) => commands::evaluate::run(&a),
        Command::Theory(a) => commands::theory::run(&a),
        Command::TuneLr(a) => commands::tune_lr::run(&a),
    }
}
