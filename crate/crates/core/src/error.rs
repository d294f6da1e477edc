use thiserror::Error;

/// Errors raised by the estimation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on user-supplied data or parameters was violated.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The complex would exceed the configured edge cap.
    #[error("edge cap exceeded: complex would have more than {cap} edges")]
    CapExceeded { cap: usize },

    /// An iterative method stopped before reaching its tolerance.
    #[error("{method} did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence {
        method: &'static str,
        iterations: usize,
        residual: f64,
    },

    /// Eigensolver failure carrying the best residuals it reached.
    #[error("eigensolver did not converge after {iterations} iterations (worst residual {:.3e})", worst(.residuals))]
    EigenNoConvergence {
        iterations: usize,
        residuals: Vec<f64>,
    },

    /// A linear system that must be nonsingular was not.
    #[error("singular system: {0}")]
    Singular(String),

    /// An internal consistency check failed.
    #[error("internal error: {0}")]
    Internal(String),

    /// A data file could not be parsed.
    #[error("malformed data at line {line}: {message}")]
    Malformed { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn worst(residuals: &[f64]) -> f64 {
    residuals.iter().copied().fold(0.0, f64::max)
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
