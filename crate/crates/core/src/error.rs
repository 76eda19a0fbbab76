use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Inputs are well formed but inconsistent with each other
    /// (wrong parameter variant for a pair, state/species mismatch, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("model family mismatch: {0}")]
    FamilyMismatch(String),

    #[error("majorant exceeded too often: {violations} of {candidates} candidates (max rate {max_rate:e}); largest ratio {worst_ratio:.4}")]
    MajorantViolation {
        violations: u64,
        candidates: u64,
        max_rate: f64,
        worst_ratio: f64,
    },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
