use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Crate-wide error type. `Validation` covers malformed inputs (scenarios,
/// configs, traces, out-of-range arguments); the remaining variants are
/// runtime failures. The CLI maps validation errors to exit code 2 and
/// everything else to 3.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Environment(String),
    #[error("{0}")]
    Policy(String),
    #[error("{0}")]
    Fit(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub fn environment(msg: impl Into<String>) -> Self {
        Error::Environment(msg.into())
    }

    pub fn policy(msg: impl Into<String>) -> Self {
        Error::Policy(msg.into())
    }

    pub fn fit(msg: impl Into<String>) -> Self {
        Error::Fit(msg.into())
    }

    pub fn is_validation(&self) -> bool {
        matches!(self, Error::Validation(_))
    }
}
