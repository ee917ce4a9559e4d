use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("argument outside the function domain: {0}")]
    Domain(String),
    #[error("parameter outside its cone: {0}")]
    ConeViolation(String),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("moment parameter outside the dual domain: {0}")]
    DualDomain(String),
    #[error("unsupported dimension d = {0}")]
    UnsupportedDimension(usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("EM fit failed: {0}")]
    EmFailure(String),
}

pub type Result<T> = std::result::Result<T, Error>;
