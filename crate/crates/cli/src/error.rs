use thiserror::Error;

/// Failures mapped onto the process exit codes.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Invalid(String),
    #[error("{0}")]
    UnsupportedDimension(String),
    #[error("{0}")]
    FitFailure(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Invalid(_) => 2,
            Self::UnsupportedDimension(_) => 4,
            Self::FitFailure(_) => 5,
            Self::Io(_) => 1,
        }
    }
}

impl From<hyperstat::Error> for CliError {
    fn from(e: hyperstat::Error) -> Self {
        use hyperstat::Error as E;
        match e {
            E::UnsupportedDimension(_) => Self::UnsupportedDimension(e.to_string()),
            E::EmFailure(_) => Self::FitFailure(e.to_string()),
            _ => Self::Invalid(e.to_string()),
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        Self::Invalid(format!("malformed CSV: {e}"))
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn invalid<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Invalid(msg.into()))
}
