use thiserror::Error;

/// Errors produced by model construction, data handling and imputation.
#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on caller-supplied data was violated (shape mismatch,
    /// empty input, missing values where none are allowed, bad parameter).
    #[error("invalid input: {0}")]
    Input(String),

    /// Structured text (matrix grammar, CSV, ground-truth record) failed to
    /// parse; the message carries the offending location.
    #[error("parse error: {0}")]
    Parse(String),

    /// The kernel matrix stayed non-positive-definite after the full jitter
    /// escalation; `jitter` is the last value tried.
    #[error("kernel matrix is not positive definite (jitter escalated to {jitter:e})")]
    Conditioning { jitter: f64 },

    /// A non-finite value appeared mid-computation.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// A component fit failed mid-training; wraps the underlying error with
    /// the cycle and component it happened in.
    #[error("training failed at cycle {cycle}, component {component} ({label}): {source}")]
    Training {
        cycle: usize,
        component: usize,
        label: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn parse(msg: impl Into<String>) -> Self {
        Error::Parse(msg.into())
    }
}
