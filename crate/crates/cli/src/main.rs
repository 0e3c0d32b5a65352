//! `hmmvoi`: value of information for noisy Ornstein-Uhlenbeck status updates.
//!
//! Tables go to stdout or `--out`; diagnostics and the metadata of CSV
//! output written to stdout go to stderr.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use voi_core::VoiError;

#[derive(Parser, Debug)]
#[command(name = "hmmvoi", version, about = "Value of information for noisy Ornstein-Uhlenbeck updates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Exact VoI of one observation window, with the Markov bound and correction.
    Voi(VoiArgs),
    /// Exact VoI next to the high- and low-SNR approximations over a noise grid.
    Approx(ApproxArgs),
    /// Reproduce a figure table (2..8, low-snr) with caption defaults.
    Fig(FigArgs),
    /// Worst-case VoI distribution in an FCFS M/M/1 queue.
    Mm1(Mm1Args),
    /// Exact vs empirical VoI over a parameter grid.
    Sweep(SweepArgs),
}

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Args, Debug, Clone)]
pub struct OutputArgs {
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Output file; stdout if omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Random seed; a logged entropy seed is used if omitted.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug)]
#[command(allow_negative_numbers = true)]
pub struct VoiArgs {
    #[arg(long, default_value_t = 0.1)]
    pub kappa: f64,
    #[arg(long, default_value_t = 0.0)]
    pub theta: f64,
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    #[arg(long, default_value_t = 1.0)]
    pub noise_var: f64,
    /// Window size.
    #[arg(long, default_value_t = 1)]
    pub m: usize,
    /// Sampling interval of the uniform window.
    #[arg(long, default_value_t = 2.0)]
    pub dt: f64,
    /// Poisson sampling rate; draws random intervals instead of `--dt`.
    #[arg(long)]
    pub rate: Option<f64>,
    /// Time since the last observation.
    #[arg(long, conflicts_with = "t", required_unless_present = "t")]
    pub lag: Option<f64>,
    /// Absolute query time; the window starts at 0.
    #[arg(long)]
    pub t: Option<f64>,
    /// Also report the regime approximation and its validity flag.
    #[arg(long)]
    pub approx: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug)]
#[command(allow_negative_numbers = true)]
pub struct ApproxArgs {
    #[arg(long, default_value_t = 0.1)]
    pub kappa: f64,
    #[arg(long, default_value_t = 0.0)]
    pub theta: f64,
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    /// Comma-separated noise variances.
    #[arg(long, value_delimiter = ',', default_values_t = [0.1, 0.25, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0])]
    pub noise_var: Vec<f64>,
    #[arg(long, default_value_t = 5)]
    pub m: usize,
    #[arg(long, default_value_t = 2.0)]
    pub dt: f64,
    #[arg(long, default_value_t = 2.0)]
    pub lag: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

/// Grid overrides shared by `fig` and `sweep`. List flags take
/// comma-separated values.
#[derive(Args, Debug)]
pub struct GridArgs {
    #[arg(long, value_delimiter = ',')]
    pub kappa: Option<Vec<f64>>,
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub noise_var: Option<Vec<f64>>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub rate: Option<Vec<f64>>,
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub m: Option<Vec<usize>>,
    #[arg(long)]
    pub t: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub lag: Option<Vec<f64>>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub replications: Option<usize>,
    #[arg(long)]
    pub bins: Option<usize>,
    #[arg(long)]
    pub thin: Option<usize>,
}

#[derive(Args, Debug)]
#[command(allow_negative_numbers = true)]
pub struct FigArgs {
    /// Figure id: 2..8 or low-snr.
    pub figure: String,
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug)]
#[command(allow_negative_numbers = true)]
pub struct Mm1Args {
    #[arg(long, default_value_t = 0.1)]
    pub kappa: f64,
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    #[arg(long, default_value_t = 0.5)]
    pub noise_var: f64,
    /// Arrival (sampling) rate λ.
    #[arg(long, default_value_t = 0.5)]
    pub rate: f64,
    /// Service rate μ.
    #[arg(long, default_value_t = 1.0)]
    pub mu: f64,
    #[arg(long, default_value_t = 1_000_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 100)]
    pub bins: usize,
    /// Keep every n-th queued update.
    #[arg(long, default_value_t = 10)]
    pub thin: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug)]
#[command(allow_negative_numbers = true)]
pub struct SweepArgs {
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

/// A failed command: exit code and one-line message.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn usage(flag: &str, reason: impl std::fmt::Display) -> Self {
        Self { code: 2, message: format!("--{flag}: {reason}") }
    }

    pub fn io(err: std::io::Error) -> Self {
        Self { code: 1, message: err.to_string() }
    }
}

impl From<VoiError> for Failure {
    fn from(err: VoiError) -> Self {
        let code = match err {
            VoiError::NotPositiveDefinite { .. }
            | VoiError::RankDeficient { .. }
            | VoiError::ApproximationBreakdown { .. }
            | VoiError::InsufficientSamples { .. } => 3,
            _ => 2,
        };
        let message = match &err {
            VoiError::InvalidParameter { name, .. } => format!("--{}: {err}", flag_name(name)),
            VoiError::UnstableQueue { .. } => format!("--rate: {err}"),
            _ => err.to_string(),
        };
        Self { code, message }
    }
}

fn flag_name(param: &str) -> String {
    match param {
        "lambda" => "rate".into(),
        "last_interval" | "interval" => "dt".into(),
        other => other.replace('_', "-"),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Voi(a) => commands::voi(&a),
        Command::Approx(a) => commands::approx(&a),
        Command::Fig(a) => commands::fig(&a),
        Command::Mm1(a) => commands::mm1(&a),
        Command::Sweep(a) => commands::sweep(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
