use thiserror::Error;

/// Unified error type for the whole pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// Case or mapping file could not be parsed.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// The network violates a structural requirement (radiality, substation
    /// count, coverage).
    #[error("invalid network: {0}")]
    Topology(String),

    /// Region assignment or scenario configuration is inconsistent.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A vector or matrix had the wrong dimension for the operation.
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    /// Dense linear algebra failure (non-positive-definite system, singular
    /// matrix, shape error).
    #[error("linear algebra error: {0}")]
    Linalg(String),

    /// An iterative solver failed to converge within its budget.
    #[error("solver did not converge: {0}")]
    NoConvergence(String),

    /// Ledger integrity violation (broken hash chain, bad access, replay
    /// mismatch).
    #[error("ledger error: {0}")]
    Ledger(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}
