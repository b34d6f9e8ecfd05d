use thiserror::Error;

/// Errors shared across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not unitary: ||A*A - I||_F = {defect:.3e} exceeds tolerance {tol:.3e}")]
    NotUnitary { defect: f64, tol: f64 },

    #[error("matrix is not symmetric: ||A - A^T||_F = {defect:.3e} exceeds tolerance {tol:.3e}")]
    NotSymmetric { defect: f64, tol: f64 },

    #[error("matrix is not skew-hermitian: ||X + X*||_F = {defect:.3e}")]
    NotSkewHermitian { defect: f64 },

    #[error("simultaneous diagonalization failed: residual {residual:.3e} above tolerance {tol:.3e}")]
    DiagonalizationFailure { residual: f64, tol: f64 },

    #[error("index {value} is not an integer within {tol:.1e}")]
    NonIntegerIndex { value: f64, tol: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("decode error at {path}: {message}")]
    Decode { path: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
