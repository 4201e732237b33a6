use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum RegenError {
    /// An argument lies outside the domain of the operation (e.g. a query
    /// time beyond the simulated horizon).
    #[error("domain error: {0}")]
    Domain(String),

    /// Input data or parameters failed validation.
    #[error("validation error: {0}")]
    Validation(String),

    /// A trajectory needed more cycles than the configured cap.
    #[error("cycle budget exceeded: more than {limit} cycles needed")]
    Budget { limit: u64 },

    /// A declared precondition (certificate) is missing.
    #[error("precondition not met: {0}")]
    Precondition(String),

    /// The model does not satisfy the hypotheses of the requested check.
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    /// Invalid experiment configuration.
    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, RegenError>;

impl From<std::io::Error> for RegenError {
    fn from(e: std::io::Error) -> Self {
        RegenError::Io(e.to_string())
    }
}
