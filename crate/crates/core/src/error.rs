use thiserror::Error;

pub type Result<T, E = UqdError> = std::result::Result<T, E>;

/// Errors raised by the library. Everything except [`UqdError::Io`] is a
/// usage error: the caller handed in something the contract forbids.
#[derive(Debug, Error)]
pub enum UqdError {
    #[error("sample list is empty")]
    EmptySamples,

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("value {value} outside [{low}, {high}]")]
    OutOfDomain { value: f64, low: f64, high: f64 },

    #[error("invalid preference: {0}")]
    InvalidPreference(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid task definition: {0}")]
    InvalidTask(String),

    #[error("unknown task `{0}`")]
    UnknownTask(String),

    #[error("malformed archive file at line {line}: {message}")]
    Format { line: usize, message: String },

    #[error("{0}")]
    InvalidInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl UqdError {
    pub fn is_usage(&self) -> bool {
        !matches!(self, UqdError::Io(_))
    }
}
