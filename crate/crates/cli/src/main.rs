use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use orffkit::kernels::KernelFamily;
use orffkit::learn::SolverMethod;
use orffkit::OrffError;

mod commands;

/// Operator-valued random Fourier features workbench.
#[derive(Parser, Debug)]
#[command(name = "orffkit", version, about, propagate_version = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct KernelArgs {
    /// Kernel family: dec, curl or div.
    #[arg(long)]
    kernel: KernelFamily,
    /// Input dimension.
    #[arg(long = "dim")]
    dim: usize,
    /// Gaussian bandwidth.
    #[arg(long, allow_negative_numbers = true, default_value_t = 1.0)]
    sigma: f64,
    /// Output coupling for dec: `identity` or a headerless CSV of matrix rows.
    #[arg(long, default_value = "identity")]
    coupling: String,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sup-norm approximation error of K̃ over a grid of feature counts.
    ApproxError {
        #[command(flatten)]
        kernel: KernelArgs,
        #[arg(long, default_value_t = 16)]
        dmin: usize,
        #[arg(long, default_value_t = 4096)]
        dmax: usize,
        #[arg(long, default_value_t = 100)]
        pairs: usize,
        #[arg(long, default_value_t = 10)]
        seeds: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Empirical single-feature variance against the b_D bound.
    Variance {
        #[command(flatten)]
        kernel: KernelArgs,
        #[arg(long, default_value_t = 20)]
        deltas: usize,
        #[arg(long, default_value_t = 10_000)]
        mc: usize,
        /// Displacements are drawn from [-radius, radius]^d.
        #[arg(long, allow_negative_numbers = true, default_value_t = 1.0)]
        radius: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluates the uniform tail bound and prints a JSON report.
    Bound {
        #[command(flatten)]
        kernel: KernelArgs,
        #[arg(long, allow_negative_numbers = true)]
        eps: f64,
        #[arg(long)]
        features: usize,
        #[arg(long, allow_negative_numbers = true)]
        diameter: f64,
        /// Use the appendix form of ū_D.
        #[arg(long)]
        appendix_ubar: bool,
        /// Random displacements searched for the largest b_D.
        #[arg(long, default_value_t = 20)]
        bd_samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Generates a synthetic dataset.
    Synth {
        #[arg(long)]
        which: Which,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        noisy: bool,
        /// Noise standard deviation for the field datasets.
        #[arg(long, allow_negative_numbers = true, default_value_t = 0.1)]
        noise_sd: f64,
        /// Random features of the dec generator.
        #[arg(long, default_value_t = 10_000)]
        dgen: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fits a ridge model and writes it as JSON.
    Fit {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        kernel: KernelFamily,
        /// Bandwidth; defaults to the median pairwise distance of the inputs.
        #[arg(long, allow_negative_numbers = true)]
        sigma: Option<f64>,
        /// dec only: `identity`, `empirical` (output covariance, unit norm) or a CSV path.
        #[arg(long, default_value = "identity")]
        coupling: String,
        #[arg(long)]
        features: usize,
        #[arg(long, allow_negative_numbers = true)]
        lambda: f64,
        #[arg(long, default_value = "cg")]
        solver: SolverMethod,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long, default_value_t = 20_000)]
        max_iter: usize,
        #[arg(long, allow_negative_numbers = true)]
        eta0: Option<f64>,
        #[arg(long, default_value_t = 20)]
        epochs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        model: PathBuf,
    },
    /// Predicts with a saved model.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Test RMSE against training-set size on the synthetic dec data.
    LearningCurve {
        #[arg(long, default_value_t = 100)]
        nmin: usize,
        #[arg(long, default_value_t = 10_000)]
        nmax: usize,
        #[arg(long, default_value_t = 100)]
        features: usize,
        #[arg(long, default_value_t = 10)]
        seeds: usize,
        #[arg(long, default_value_t = 10_000)]
        dgen: usize,
        /// Comma-separated λ grid searched on an inner holdout.
        #[arg(long, value_delimiter = ',', default_values_t = [1e-8, 1e-6, 1e-4, 1e-2])]
        lambdas: Vec<f64>,
        /// Also fit the exact kernel model where N·p ≤ 20000.
        #[arg(long)]
        ovk: bool,
        /// Append curl-field fit timings for ORFF and the exact model.
        #[arg(long)]
        timing: bool,
        /// Append the curl-free vs independent-RFF comparison on the curl field.
        #[arg(long)]
        field: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(clap::ValueEnum, Debug, Clone, Copy)]
enum Which {
    CurlField,
    DivField,
    Dec,
}

fn exit_code(err: &OrffError) -> u8 {
    match err {
        OrffError::InvalidParameter(_)
        | OrffError::DimensionMismatch { .. }
        | OrffError::Unsupported(_)
        | OrffError::Degenerate(_)
        | OrffError::Singular(_)
        | OrffError::Model(_)
        | OrffError::Json(_)
        | OrffError::Csv(_) => 2,
        OrffError::ConvergenceFailure { .. } | OrffError::StepSize { .. } => 3,
        OrffError::Resource(_) => 4,
        OrffError::Io(_) => 1,
    }
}

fn configure_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var("ORFFKIT_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| format!("ORFFKIT_THREADS must be a non-negative integer, got '{raw}'"))?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| e.to_string())?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(2);
    }
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
