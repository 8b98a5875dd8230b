//! `silt`: every experiment of the toolkit as a subcommand, writing one CSV
//! table or JSON document per run.
//!
//! Exit status: 0 on success, 1 when `validate-kernels` finds a mismatch or
//! the output cannot be written, 2 on a violated precondition, 3 on a
//! quadrature or overflow failure.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use silt_core::SiltError;

mod commands;
mod output;

use output::{Format, Report};

#[derive(Debug, Parser)]
#[command(name = "silt", version, about = "Self-intersection local times of Brownian motion")]
pub struct Args {
    #[command(subcommand)]
    command: Command,

    /// Space dimension d.
    #[arg(long, global = true, default_value_t = 2)]
    dim: usize,
    /// Time horizon T.
    #[arg(long = "T", global = true, allow_negative_numbers = true, default_value_t = 1.0)]
    horizon: f64,
    /// Chaos truncation N (default: the smallest admissible, floor(d/2)).
    #[arg(long = "N", global = true)]
    truncation: Option<usize>,
    /// Gaussian mollifier variance ε.
    #[arg(long, global = true, allow_negative_numbers = true)]
    eps: Option<f64>,
    /// Gap width Λ.
    #[arg(long, global = true, allow_negative_numbers = true)]
    gap: Option<f64>,
    /// Gap grid for `rate`.
    #[arg(long, global = true, allow_negative_numbers = true, value_delimiter = ',')]
    lambdas: Option<Vec<f64>>,
    /// Highest chaos order kept.
    #[arg(long, global = true, default_value_t = 12)]
    nmax: u32,
    /// Number of Monte Carlo paths.
    #[arg(long, global = true, default_value_t = 10_000)]
    paths: usize,
    /// Grid steps M per path (default: ceil(10 T / ε)).
    #[arg(long, global = true)]
    steps: Option<usize>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Coupling g.
    #[arg(long, global = true, allow_negative_numbers = true)]
    g: Option<f64>,
    /// Tail thresholds N, comma-separated.
    #[arg(long, global = true, allow_hyphen_values = true, value_delimiter = ',')]
    threshold: Option<Vec<f64>>,
    /// Rate α of the tail bound, in (0, 2π/T).
    #[arg(long, global = true, allow_negative_numbers = true)]
    alpha: Option<f64>,
    /// Divergence constant k (default: computed at the experiment's scale).
    #[arg(long = "k", global = true, allow_negative_numbers = true)]
    k_const: Option<f64>,
    /// Rate constant K (default: T times the largest rate ratio).
    #[arg(long = "K", global = true, allow_negative_numbers = true)]
    big_k: Option<f64>,
    /// Kernel family for `kernel`.
    #[arg(long, global = true, value_enum)]
    kind: Option<KindArg>,
    /// Multi-index entries n_i, comma-separated.
    #[arg(long, global = true, value_delimiter = ',')]
    index: Option<Vec<u32>>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    u: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    v: Option<f64>,
    /// Random points per kernel family and order.
    #[arg(long, global = true, default_value_t = 20)]
    samples: usize,
    /// Relative tolerance for `validate-kernels`.
    #[arg(long, global = true, default_value_t = 1e-7)]
    tol: f64,
    /// Which series `norms` evaluates.
    #[arg(long, global = true, value_enum, default_value_t = Series::Distance)]
    series: Series,
    /// Use the cut regularization in `norms --series variance`.
    #[arg(long, global = true)]
    cut: bool,
    /// Path functional for `simulate`.
    #[arg(long, global = true, value_enum, default_value_t = Estimator::Centered)]
    estimator: Estimator,
    /// Bin width of the occupation estimator.
    #[arg(long, global = true)]
    bin: Option<f64>,
    /// Output file (default: standard output).
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Record wall time in JSON metadata. Off by default so that repeated
    /// runs are byte-identical.
    #[arg(long, global = true)]
    timing: bool,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Closed-form expectation of the regularized local time.
    Expectation,
    /// One chaos kernel value at (u, v).
    Kernel,
    /// Compare closed-form kernels with the quadrature oracle.
    ValidateKernels,
    /// Chaos distance or variance series, order by order.
    Norms,
    /// Chaos distance over a gap grid, normalized by T Λ ln²Λ.
    Rate,
    /// Monte Carlo summary of a path functional.
    Simulate,
    /// Empirical lower tail against the Chebyshev bound.
    Tail,
    /// Monte Carlo partition function E exp(-g L).
    Partition,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Phi,
    PhiEps,
    Rho,
    Gap,
    Cut,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Series {
    Distance,
    Variance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Estimator {
    /// Gaussian-regularized local time.
    Raw,
    /// The same minus its exact expectation.
    Centered,
    /// d = 1 occupation-density estimator.
    Occupation,
}

impl Estimator {
    fn name(self) -> &'static str {
        match self {
            Estimator::Raw => "raw",
            Estimator::Centered => "centered",
            Estimator::Occupation => "occupation",
        }
    }
}

#[derive(Debug)]
pub enum CliError {
    Core(SiltError),
    Usage(String),
    Io(std::io::Error),
    Validation,
}

impl From<SiltError> for CliError {
    fn from(e: SiltError) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(SiltError::Precondition(_) | SiltError::Divergent(_)) | CliError::Usage(_) => 2,
            CliError::Core(SiltError::Quadrature(_) | SiltError::Overflow(_)) => 3,
            CliError::Io(_) | CliError::Validation => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Io(e) => write!(f, "cannot write output: {e}"),
            CliError::Validation => write!(f, "kernel validation failed"),
        }
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("SILT_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| CliError::Usage(format!("SILT_THREADS must be a positive integer (got {raw:?})")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(format!("cannot set up {n} workers: {e}")))
}

fn emit(args: &Args, report: &Report, wall: Option<f64>) -> Result<(), CliError> {
    let bytes = match args.format {
        Format::Csv => output::render_csv(report).map_err(CliError::Io)?,
        Format::Json => output::render_json(report, wall),
    };
    match &args.output {
        Some(path) => output::write_atomic(path, &bytes).map_err(CliError::Io),
        None => std::io::stdout().write_all(&bytes).map_err(CliError::Io),
    }
}

fn run(args: &Args) -> Result<(), CliError> {
    configure_threads()?;
    let start = Instant::now();
    let mut ok = true;
    let report = match args.command {
        Command::Expectation => commands::expectation(args)?,
        Command::Kernel => commands::kernel(args)?,
        Command::ValidateKernels => {
            let (r, pass) = commands::validate_kernels(args)?;
            ok = pass;
            r
        }
        Command::Norms => commands::norms(args)?,
        Command::Rate => commands::rate(args)?,
        Command::Simulate => commands::simulate(args)?,
        Command::Tail => commands::tail(args)?,
        Command::Partition => commands::partition(args)?,
    };
    let wall = args.timing.then(|| start.elapsed().as_secs_f64());
    emit(args, &report, wall)?;
    if ok {
        Ok(())
    } else {
        Err(CliError::Validation)
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
