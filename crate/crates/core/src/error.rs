use thiserror::Error;

/// Errors raised by kernel construction, sampling, solvers and I/O.
#[derive(Debug, Error)]
pub enum OrffError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("no convergence after {iterations} iterations (relative residual {residual:.3e})")]
    ConvergenceFailure { iterations: usize, residual: f64 },

    #[error("step size too large: objective grew from {initial:.3e} to {current:.3e}")]
    StepSize { initial: f64, current: f64 },

    #[error("resource guard: {0}")]
    Resource(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("model file: {0}")]
    Model(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, OrffError>;

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(OrffError::DimensionMismatch {
            what,
            expected,
            got,
        })
    }
}

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(OrffError::InvalidParameter(msg.into()))
}
