use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// A grid index is out of range.
    #[error("index out of range: {0}")]
    Index(String),
    /// A requested matrix exceeds the configured size cap.
    #[error("covariance matrix of dimension {dim} exceeds the size cap {cap}; raise the cap explicitly if this is intended")]
    SizeCap { dim: usize, cap: usize },
    /// The matrix is indefinite beyond the clamping tolerance.
    #[error("factorization failed: pivot {pivot:e} at index {index} is below the tolerance -{tol:e}")]
    Indefinite { index: usize, pivot: f64, tol: f64 },
    /// Adaptive quadrature hit its subdivision limit.
    #[error("quadrature did not converge: achieved tolerance {achieved:e}, requested {requested:e}")]
    Quadrature { achieved: f64, requested: f64 },
    /// Malformed CSV input.
    #[error("csv parse error at row {row}, column {col}: {msg}")]
    Csv { row: usize, col: usize, msg: String },
    /// Invalid configuration or inconsistent inputs.
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
