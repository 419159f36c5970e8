use thiserror::Error;

/// Errors produced by the solver, simulator and harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("index out of range: {0}")]
    Index(String),

    #[error("dimension mismatch: {0}")]
    Shape(String),

    #[error("invalid observation: {0}")]
    InvalidObservation(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Errors caused by malformed user input rather than by a failed computation.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::InvalidSpec(_)
                | Error::InvalidInput(_)
                | Error::Config(_)
                | Error::Shape(_)
                | Error::Index(_)
                | Error::Json(_)
        )
    }
}
