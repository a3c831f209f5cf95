//! `hausdorff`: spectral analysis of Hausdorff operators from JSON specs.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use commands::Failure;

#[derive(Parser, Debug)]
#[command(
    name = "hausdorff",
    version,
    about = "Norms, spectra and residual checks for Hausdorff operators"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Export the symbol coefficients over the frequency grid.
    Symbol(Common),
    /// Operator norm, integral bound and maximizing frequency.
    Norm(Common),
    /// Eigenvalue cloud and point-spectrum candidates.
    Spectrum {
        #[command(flatten)]
        common: Common,
        /// Tolerance of the point-spectrum heuristic.
        #[arg(long, default_value_t = hausdorff::spectral::POINT_SPECTRUM_TOL)]
        tol: f64,
        /// Also write the point-spectrum candidates as CSV to this path.
        #[arg(long)]
        candidates: Option<PathBuf>,
    },
    /// Self-adjoint, positive, unitary, invertible and non-zero tests.
    Classify {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Apply the operator to a test function at points of an x-grid.
    Apply {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        function: FunctionArgs,
    },
    /// Run the residual suite; exits with status 2 if any check fails.
    Verify(Common),
    /// Count Galerkin singular values above a threshold for growing bases.
    ProbeCompactness {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_values_t = [32, 64, 128])]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
    },
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Operator spec (JSON).
    #[arg(long)]
    spec: PathBuf,
    /// Output format; each subcommand has its own default.
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Write to this file instead of standard output.
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Half-width S of the frequency box [-S, S]^n.
    #[arg(long)]
    s_max: Option<f64>,
    /// Frequency samples per axis.
    #[arg(long)]
    s_count: Option<usize>,
    /// Far-field magnitudes, comma separated; pass an empty string for none.
    #[arg(long, value_delimiter = ',')]
    far_field: Option<Vec<String>>,
    /// Lower end of the log grid, per axis.
    #[arg(long, allow_hyphen_values = true)]
    log_min: Option<f64>,
    /// Upper end of the log grid, per axis.
    #[arg(long, allow_hyphen_values = true)]
    log_max: Option<f64>,
    /// Log-grid points per axis (a power of two).
    #[arg(long)]
    log_points: Option<usize>,
    /// Override the quadrature's resolved frequency.
    #[arg(long)]
    max_frequency: Option<f64>,
    /// Evaluate sweeps on the calling thread only.
    #[arg(long)]
    sequential: bool,
}

#[derive(Args, Debug, Clone)]
struct FunctionArgs {
    /// `OCTANT:EXPR` in the variables `x` (n = 1) or `x_1..x_n`; repeatable.
    #[arg(long = "piece", required = true)]
    pieces: Vec<String>,
    /// `LO:HI` bounds on `log|x_l|` for each axis; defaults to the log grid.
    #[arg(long = "support", allow_hyphen_values = true)]
    support: Vec<String>,
    /// Evaluation points per axis run from `x-min` to `x-max`.
    #[arg(long, allow_hyphen_values = true)]
    x_min: f64,
    #[arg(long, allow_hyphen_values = true)]
    x_max: f64,
    #[arg(long, default_value_t = 101)]
    x_count: usize,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Csv,
    Json,
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var("HAUSDORFF_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw.trim().parse().map_err(|_| {
        Failure::Input(anyhow::anyhow!(
            "HAUSDORFF_THREADS must be a non-negative integer, got {raw:?}"
        ))
    })?;
    #[cfg(feature = "parallel")]
    if threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Failure::Input(e.into()))?;
    }
    #[cfg(not(feature = "parallel"))]
    let _ = threads;
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match configure_threads().and_then(|_| commands::run(cli.command)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Check(names)) => {
            eprintln!("verify failed: {}", names.join(", "));
            ExitCode::from(2)
        }
    }
}
