//! `ffl`: command-line driver for the Finsler flow laboratory.
//!
//! Exit codes: 0 success, 1 a check failed, 2 configuration or input error,
//! 3 numerical breakdown. `FFL_THREADS` caps the worker pool.

mod commands;
mod selftest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ffl_core::Error;

#[derive(Parser, Debug)]
#[command(
    name = "ffl",
    version,
    about = "Finsler geometry, Finsler-Ricci flow and Harnack checks on the flat 2-torus"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Dump the tensor calculus of a catalog norm at one point as JSON.
    Tensors(TensorsArgs),
    /// Run the coupled Finsler-Ricci flow and heat equation.
    Flow(RunArgs),
    /// Run the heat equation on the initial (static) norm.
    Heat(RunArgs),
    /// Check the differential and integrated Harnack estimates on a stored trajectory.
    VerifyHarnack(VerifyArgs),
    /// Evaluate the pointwise Bochner identity on a lattice.
    BochnerCheck(BochnerArgs),
    /// Run the built-in invariant suites.
    Selftest,
}

#[derive(Args, Debug)]
pub struct TensorsArgs {
    /// Catalog norm, e.g. `quartic:0.1` or `riemannian_diag:4,1`.
    #[arg(long)]
    pub norm: String,
    /// Base point `x1,x2`.
    #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
    pub x: [f64; 2],
    /// Direction angle of the unit reference vector.
    #[arg(long, allow_hyphen_values = true)]
    pub theta: f64,
    /// Write the JSON here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct RunArgs {
    /// TOML run configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Override the configured output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    /// Trajectory directory written by `flow` or `heat`.
    #[arg(long)]
    pub traj: PathBuf,
    /// Harnack parameter (> 1); repeatable.
    #[arg(long = "theta", required = true)]
    pub thetas: Vec<f64>,
    /// Parameter of the integrated estimate (> 1/2); repeatable.
    #[arg(long = "eps")]
    pub epsilons: Vec<f64>,
    /// Explicit pair `i1,j1,k1,i2,j2,k2` (lattice indices of x and y and
    /// snapshot indices k1 < k2); repeatable.
    #[arg(long = "pair", value_parser = parse_pair6)]
    pub pairs: Vec<[usize; 6]>,
    /// Number of seeded random pairs.
    #[arg(long)]
    pub random_pairs: Option<usize>,
    /// Seed for `--random-pairs` (defaults to the run seed).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override the configured slack factor.
    #[arg(long)]
    pub slack: Option<f64>,
    /// Directory for the report files (defaults to the trajectory).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct BochnerArgs {
    /// Catalog norm.
    #[arg(long)]
    pub norm: String,
    /// Initial-data preset; the function is `2 + amplitude * shape`.
    #[arg(long)]
    pub u: String,
    #[arg(long)]
    pub amplitude: f64,
    #[arg(long)]
    pub nx: usize,
    #[arg(long)]
    pub ntheta: usize,
    /// Gradient mask threshold relative to `max |Du|`.
    #[arg(long)]
    pub delta_grad: f64,
    /// Evaluate on the sampled field instead of the closed-form norm.
    #[arg(long)]
    pub sampled: bool,
    /// Fail (exit 1) if the core residual exceeds this value.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_pair(s: &str) -> Result<[f64; 2], String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("'{p}': {e}")))
        .collect::<Result<_, _>>()?;
    v.try_into()
        .map_err(|_| format!("expected two comma-separated numbers, got '{s}'"))
}

fn parse_pair6(s: &str) -> Result<[usize; 6], String> {
    let v: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse::<usize>().map_err(|e| format!("'{p}': {e}")))
        .collect::<Result<_, _>>()?;
    v.try_into()
        .map_err(|_| format!("expected i1,j1,k1,i2,j2,k2, got '{s}'"))
}

/// Outcome of a subcommand that ran to completion.
pub enum Verdict {
    Pass,
    Fail,
}

fn configure_threads() -> Result<(), Error> {
    let Ok(v) = std::env::var("FFL_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Error::Config(format!("FFL_THREADS must be a positive integer, got '{v}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(format!("cannot build thread pool: {e}")))
}

fn exit_code(e: &Error) -> u8 {
    if e.is_numerical() {
        3
    } else {
        2
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("ffl: {e}");
        return ExitCode::from(2);
    }
    let out = match cli.command {
        Command::Tensors(a) => commands::tensors(&a),
        Command::Flow(a) => commands::run(&a, ffl_core::evolution::Mode::Coupled),
        Command::Heat(a) => commands::run(&a, ffl_core::evolution::Mode::Static),
        Command::VerifyHarnack(a) => commands::verify_harnack(&a),
        Command::BochnerCheck(a) => commands::bochner_check(&a),
        Command::Selftest => selftest::run(),
    };
    match out {
        Ok(Verdict::Pass) => ExitCode::SUCCESS,
        Ok(Verdict::Fail) => ExitCode::from(1),
        Err(e) => {
            eprintln!("ffl: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
