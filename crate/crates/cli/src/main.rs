//! `fbm-seqtest`: solve, simulate, run and evaluate the optimal sequential
//! test for the sign of an fBm drift.
//!
//! Exit status: 0 on success, 2 on invalid parameters or usage, 1 on
//! numerical failures and failed checks.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod io;

#[derive(Debug, Parser)]
#[command(
    name = "fbm-seqtest",
    version,
    about = "Optimal Bayesian sequential test for the drift sign of a fractional Brownian motion"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the stopping boundary and write the table.
    Boundary(BoundaryArgs),
    /// Draw observation paths Z = θt + B^H.
    Simulate(SimulateArgs),
    /// Run the sequential test on simulated paths.
    Run(RunArgs),
    /// Estimate the Bayes risk in both coordinate systems.
    Risk(RiskArgs),
    /// Verify the invariants of a solved or loaded boundary table.
    Check(CheckArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Prior mean of the drift.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub mu: f64,
    /// Prior standard deviation of the drift.
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    /// Hurst index in (0, 1).
    #[arg(long)]
    pub hurst: f64,
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    /// Boundary grid intervals.
    #[arg(long, default_value_t = 500)]
    pub n_grid: usize,
    /// Residual tolerance of the integral equation.
    #[arg(long, default_value_t = 5e-3)]
    pub tolerance: f64,
    /// Also solve below t0, where the optimality theory does not apply.
    #[arg(long)]
    pub extend_below_t0: bool,
}

#[derive(Debug, Clone, Args)]
pub struct TableArgs {
    /// Use a saved JSON boundary table instead of solving.
    #[arg(long)]
    pub boundary: Option<PathBuf>,
    #[command(flatten)]
    pub solve: SolveArgs,
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Output file (written atomically); stdout when omitted.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Clone, Args)]
pub struct PathArgs {
    /// Uniform time steps per path.
    #[arg(long, default_value_t = 512)]
    pub n_steps: usize,
    /// Horizon in transformed time r; the path covers [0, t(r)].
    #[arg(long, default_value_t = 0.5)]
    pub horizon_r: f64,
    /// Base seed; path k uses seed + k. Generated and recorded when omitted.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct BoundaryArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub solve: SolveArgs,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub path: PathArgs,
    #[arg(long, default_value_t = 1)]
    pub n_paths: usize,
    /// Fixed drift; drawn from the prior when omitted.
    #[arg(long, allow_negative_numbers = true)]
    pub theta: Option<f64>,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub table: TableArgs,
    #[command(flatten)]
    pub path: PathArgs,
    #[arg(long, default_value_t = 1)]
    pub n_paths: usize,
    /// Fixed drift; drawn from the prior when omitted.
    #[arg(long, allow_negative_numbers = true)]
    pub theta: Option<f64>,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct RiskArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub table: TableArgs,
    #[command(flatten)]
    pub path: PathArgs,
    #[arg(long, default_value_t = 10_000)]
    pub n_paths: usize,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub table: TableArgs,
    /// Optional JSON report of the individual checks.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

/// Raised for problems with the invocation itself (exit status 2).
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn exit_code(err: &anyhow::Error) -> u8 {
    let usage = err.chain().any(|e| {
        e.is::<UsageError>()
            || matches!(
                e.downcast_ref::<fbm_seqtest::Error>(),
                Some(fbm_seqtest::Error::InvalidParams(_))
            )
    });
    if usage {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Boundary(a) => commands::boundary(&a),
        Command::Simulate(a) => commands::simulate(&a),
        Command::Run(a) => commands::run(&a),
        Command::Risk(a) => commands::risk(&a),
        Command::Check(a) => commands::check(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
