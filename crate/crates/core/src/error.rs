use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid spectrum: {0}")]
    InvalidSpectrum(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// `tau` does not exceed `1/alpha`, so the power sum of the eigenvalues diverges.
    #[error("power sum diverges: tau = {tau} must exceed 1/alpha = {threshold}")]
    Divergence { tau: f64, threshold: f64 },

    #[error("unsupported operation: {0}")]
    UnsupportedOperation(String),

    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),

    #[error("dimension mismatch: expected d = {expected}, found d = {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid cost model: {0}")]
    InvalidModel(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("unsupported scale: {0}")]
    UnsupportedScale(String),

    /// The requested threshold lies below the region where a truncated
    /// spectrum enumerates eigenvalues exactly.
    #[error("threshold {requested:e} is below the certified floor {floor:e} of the truncated spectrum")]
    CertificationExceeded { requested: f64, floor: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
