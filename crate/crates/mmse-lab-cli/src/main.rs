//! Command-line surface for the MMSE sum-rate engines: SNR sweeps,
//! figure-reproduction presets, and verification suites.
//!
//! Exit codes: 0 success, 1 verification-tolerance failure, 2 flag or
//! configuration errors, 3 repeated eigenvalues without `--fallback`.

mod figures;
mod output;
mod sweep;
mod verify_cmd;

use clap::{Args, Parser, Subcommand};
use mmse_lab::Error;

#[derive(Parser)]
#[command(name = "mmse-lab", version, about = "MIMO MMSE achievable sum rate toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep a rate metric over SNR and emit CSV.
    Rate(RateArgs),
    /// Emit the dataset behind one of the reference figures.
    Figure(FigureArgs),
    /// Run a verification suite and emit a JSON report.
    Verify(VerifyArgs),
}

#[derive(Args, Clone)]
struct ModelArgs {
    /// Channel model: iid | separable | rician.
    #[arg(long, default_value = "iid")]
    model: String,
    /// Receive antennas.
    #[arg(long, default_value_t = 2)]
    nr: usize,
    /// Transmit antennas.
    #[arg(long, default_value_t = 2)]
    nt: usize,
    /// Exponential receive-correlation coefficient (separable model).
    #[arg(long)]
    rho_r: Option<f64>,
    /// Exponential transmit-correlation coefficient (separable model).
    #[arg(long)]
    rho_t: Option<f64>,
    /// Rician K-factor.
    #[arg(long)]
    k: Option<f64>,
    /// Angle of arrival of the specular component, radians.
    #[arg(long, default_value_t = 0.0)]
    theta_r: f64,
    /// Angle of departure of the specular component, radians.
    #[arg(long, default_value_t = 0.0)]
    theta_t: f64,
    /// JSON model description (overrides the model flags).
    #[arg(long)]
    config: Option<std::path::PathBuf>,
}

#[derive(Args)]
struct RateArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Inclusive dB range start:step:stop.
    #[arg(long, default_value = "0:5:30")]
    snr_db: String,
    /// Evaluation path: closed | mc | quad.
    #[arg(long, default_value = "closed")]
    method: String,
    /// Monte-Carlo samples per point.
    #[arg(long, default_value_t = 100_000)]
    samples: u64,
    /// Monte-Carlo seed.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Fall back to this path (mc | quad) when eigenvalues repeat.
    #[arg(long)]
    fallback: Option<String>,
    /// Write CSV here instead of stdout (write-then-rename).
    #[arg(long)]
    out: Option<std::path::PathBuf>,
}

#[derive(Args)]
struct FigureArgs {
    /// Figure id, 1-5.
    #[arg(long)]
    id: u32,
    /// Monte-Carlo samples per point where applicable.
    #[arg(long, default_value_t = 100_000)]
    samples: u64,
    /// Monte-Carlo seed.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Write CSV here instead of stdout (write-then-rename).
    #[arg(long)]
    out: Option<std::path::PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Suite: identity | specfun | closed-vs-mc | asymptote.
    #[arg(long)]
    suite: String,
    #[command(flatten)]
    model: ModelArgs,
    /// Random trials for the identity suite.
    #[arg(long, default_value_t = 1000)]
    trials: u64,
    /// Monte-Carlo samples per comparison point.
    #[arg(long, default_value_t = 100_000)]
    samples: u64,
    /// Seed for sampled suites.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<std::path::PathBuf>,
}

/// Failure carrying the process exit code.
pub(crate) struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Failure { code, message: message.into() }
    }

    pub(crate) fn config(message: impl Into<String>) -> Self {
        Failure::new(2, message)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::RepeatedEigenvalues { .. } => Failure::new(3, e.to_string()),
            _ => Failure::new(2, e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::new(2, format!("i/o error: {e}"))
    }
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Rate(args) => sweep::run_rate(&args),
        Command::Figure(args) => figures::run_figure(&args),
        Command::Verify(args) => verify_cmd::run_verify(&args),
    };
    if let Err(f) = result {
        eprintln!("error: {}", f.message);
        std::process::exit(f.code);
    }
}

pub(crate) use {FigureArgs as FigArgs, ModelArgs as MArgs, RateArgs as RArgs, VerifyArgs as VArgs};
