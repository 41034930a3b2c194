use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration document failed validation. `path` names the offending field.
    #[error("{path}: {message}")]
    Config { path: String, message: String },

    #[error("dimension mismatch for {what}: expected {expected}, got {actual}")]
    Dimension {
        what: String,
        expected: String,
        actual: String,
    },

    #[error("step {requested} is beyond the model horizon (last available step is {available})")]
    HorizonExceeded { requested: usize, available: usize },

    #[error("{what} is numerically singular (condition estimate {condition:.3e})")]
    Singular { what: String, condition: f64 },

    #[error("{what} is not positive definite")]
    NotPositiveDefinite { what: String },

    #[error("innovation covariance at step {step} is not positive definite")]
    IndefiniteInnovation { step: usize },

    #[error("model is not observable within {horizon} steps")]
    NotObservable { horizon: usize },

    #[error("{0}")]
    InvalidArgument(String),

    #[error("overflow: {0}")]
    Overflow(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn dimension(
        what: impl Into<String>,
        expected: impl std::fmt::Display,
        actual: impl std::fmt::Display,
    ) -> Self {
        Error::Dimension {
            what: what.into(),
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }

    /// True for failures caused by the caller's inputs rather than the filesystem.
    pub fn is_input_error(&self) -> bool {
        !matches!(self, Error::Io(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
