use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not positive definite (smallest eigenvalue {min_eig:e}, tolerance {tol:e})")]
    NotPositiveDefinite { min_eig: f64, tol: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("series did not converge by weight {weight} (partial value {partial:e})")]
    NonConvergence { weight: usize, partial: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("pole: delta {delta:e} is within {tol:e} of rho at weight {weight}")]
    Pole { delta: f64, weight: usize, tol: f64 },

    #[error("internal consistency check failed: {0}")]
    Consistency(String),

    #[error("data format error: {0}")]
    Format(String),

    #[error("io error: {0}")]
    Io(String),

    #[error("not implemented: {0}")]
    NotImplemented(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl Error {
    /// True for errors caused by the input data rather than by the caller's
    /// arguments or by the library itself.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Format(_)
                | Error::Io(_)
                | Error::NotPositiveDefinite { .. }
                | Error::DegenerateSample(_)
                | Error::DimensionMismatch { .. }
        )
    }
}
