use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Shapes or grids that must agree do not.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A structural precondition (centering, symmetry, orthonormality) is violated.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// The requested cut level exceeds the number of usable eigenpairs.
    #[error("cut exceeds rank: k = {k} but the largest admissible k is {max_k}")]
    CutExceedsRank { k: usize, max_k: usize },

    /// The empirical covariance of the inputs vanishes.
    #[error("covariance has rank 0")]
    RankZero,

    /// An iterative routine failed to converge.
    #[error("numeric failure: {message} (residual {residual:e})")]
    Numeric { message: String, residual: f64 },

    /// The requested computation is not defined for this input family.
    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::Numeric { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
