//! stateval: evaluate state estimates against a reference trajectory and
//! recover reference velocity by spectral differentiation of a Chebyshev
//! fit.
//!
//! Exit codes are a stable contract: 0 success, 2 input/parse errors,
//! 3 numeric or fit-file errors, 4 empty association, 5 violated metric
//! preconditions.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use stateval::chebyshev::Weights;
use stateval::metrics::AlignMode;

#[derive(Parser)]
#[command(
    name = "stateval",
    version,
    about = "Trajectory and state-estimation evaluation toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a Chebyshev polynomial to the translation channels and store it
    Fit(FitArgs),
    /// Synthesize linear velocity by differentiating a translation fit
    Velocity(VelocityArgs),
    /// Evaluate estimated trajectories against a reference
    Eval(EvalArgs),
    /// Fit and serialize a trajectory, reporting the compression ratio
    Compress(FitArgs),
    /// Resample a stored fit back to TUM text at a uniform rate
    Sample(SampleArgs),
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum MetricArg {
    Ase,
    Ate,
    Rpe,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum AlignArg {
    Sim3,
    Se3,
    None,
}

impl AlignArg {
    fn mode(self) -> AlignMode {
        match self {
            AlignArg::Sim3 => AlignMode::Sim3,
            AlignArg::Se3 => AlignMode::Se3,
            AlignArg::None => AlignMode::Identity,
        }
    }
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum, Default)]
enum FormatArg {
    #[default]
    Table,
    Json,
    Csv,
}

fn parse_weights(s: &str) -> Result<Weights<f64>, String> {
    let parts: Vec<&str> = s.split(',').collect();
    let parse_one = |p: &str| -> Result<f64, String> {
        p.trim()
            .parse::<f64>()
            .map_err(|_| format!("weight {p:?} is not a number"))
    };
    match parts.len() {
        1 => Ok(Weights::Scalar(parse_one(parts[0])?)),
        3 => Ok(Weights::PerAxis(vec![
            parse_one(parts[0])?,
            parse_one(parts[1])?,
            parse_one(parts[2])?,
        ])),
        n => Err(format!("expected one weight or wx,wy,wz, got {n} values")),
    }
}

#[derive(Args)]
struct FitArgs {
    /// Input trajectory (TUM text)
    input: PathBuf,
    /// Polynomial degree N (the fit has N+1 node values per axis)
    #[arg(long)]
    degree: usize,
    /// Inverse-variance weights: one value or wx,wy,wz
    #[arg(long, value_parser = parse_weights)]
    weights: Option<Weights<f64>>,
    /// Tikhonov ridge parameter for rank-deficient sample distributions
    #[arg(long)]
    ridge: Option<f64>,
    /// Widen the fit domain by this many seconds on each side
    #[arg(long, default_value_t = 0.0)]
    pad: f64,
    /// Output fit file (default: input with .cbf extension)
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t)]
    format: FormatArg,
}

#[derive(Args)]
struct VelocityArgs {
    /// Input trajectory (TUM text) or stored fit (.cbf)
    input: PathBuf,
    /// Polynomial degree N (required for trajectory input)
    #[arg(long)]
    degree: Option<usize>,
    /// Sampling rate in Hz (required for fit input)
    #[arg(long)]
    rate: Option<f64>,
    /// First query time (fit input; default: domain start)
    #[arg(long)]
    start: Option<f64>,
    /// Last query time (fit input; default: domain end)
    #[arg(long)]
    end: Option<f64>,
    /// Compare against centered finite differences
    #[arg(long)]
    compare_fd: bool,
    /// Reference trajectory with velocity columns to score against
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Association tolerance in seconds for --truth
    #[arg(long, default_value_t = 0.01)]
    max_diff: f64,
    #[arg(long, value_parser = parse_weights)]
    weights: Option<Weights<f64>>,
    #[arg(long)]
    ridge: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    pad: f64,
    /// Output trajectory with velocity columns (default: <input>.vel.tum)
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Also write a CSV of (t, velocity[, truth][, finite differences])
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t)]
    format: FormatArg,
}

#[derive(Args)]
struct EvalArgs {
    /// Estimated trajectories, one file per estimator
    #[arg(required = true)]
    est: Vec<PathBuf>,
    /// Reference (ground-truth) trajectory
    #[arg(long = "ref")]
    reference: PathBuf,
    #[arg(long, value_enum)]
    metric: MetricArg,
    #[arg(long, value_enum, default_value_t = AlignArg::Sim3)]
    align: AlignArg,
    /// RPE window in association steps
    #[arg(long, default_value_t = 1)]
    delta: usize,
    /// Association tolerance in seconds
    #[arg(long, default_value_t = 0.01)]
    max_diff: f64,
    /// Synthesize reference velocity from its translations (needs --degree)
    #[arg(long)]
    synth_vel: bool,
    /// Fit degree for --synth-vel
    #[arg(long)]
    degree: Option<usize>,
    #[arg(long, value_parser = parse_weights)]
    weights: Option<Weights<f64>>,
    #[arg(long)]
    ridge: Option<f64>,
    /// Include the per-step error series in JSON output
    #[arg(long)]
    per_step: bool,
    #[arg(long, value_enum, default_value_t)]
    format: FormatArg,
}

#[derive(Args)]
struct SampleArgs {
    /// Stored fit (.cbf)
    input: PathBuf,
    /// Sampling rate in Hz
    #[arg(long)]
    rate: f64,
    /// First sample time (default: domain start)
    #[arg(long)]
    start: Option<f64>,
    /// Last sample time (default: domain end)
    #[arg(long)]
    end: Option<f64>,
    /// Output trajectory (default: <input>.resampled.tum)
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t)]
    format: FormatArg,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Fit(args) => commands::fit(&args, false),
        Command::Compress(args) => commands::fit(&args, true),
        Command::Velocity(args) => commands::velocity(&args),
        Command::Eval(args) => commands::eval(&args),
        Command::Sample(args) => commands::sample(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
