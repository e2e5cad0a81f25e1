use thiserror::Error;

/// Errors produced by this crate.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument is outside its documented range.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Mismatched vector/graph shapes or an out-of-range index.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A structural precondition does not hold (e.g. disconnected union graph).
    #[error("precondition failed: {0}")]
    Precondition(String),

    /// The iterative solver did not meet its tolerance within the iteration cap.
    #[error(
        "solver did not converge: relative residual {residual:.3e} after {iterations} iterations"
    )]
    Convergence { residual: f64, iterations: usize },

    /// A dense diagnostic was requested on an instance above its size cap.
    #[error("unsupported size: {0}")]
    UnsupportedSize(String),

    /// Malformed input data (CSV/JSON records).
    #[error("parse error: {0}")]
    Parse(String),

    /// An internal invariant was violated.
    #[error("internal error: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
