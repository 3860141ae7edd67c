use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A value left the normalized data domain `[-1, 1]`. Signals that the
    /// caller fed unnormalized data into a basis or critic evaluation.
    #[error("value {0} lies outside [-1, 1]; normalize inputs first")]
    OutOfDomain(f64),

    /// Structurally invalid arguments: shape mismatches, empty batches,
    /// nonpositive bounds, stale backward caches.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Data-file ingestion failed (unreadable file, missing column,
    /// too few usable rows).
    #[error("ingestion failed: {0}")]
    Ingestion(String),

    /// An experiment plan file failed to parse. Carries line diagnostics.
    #[error("plan error: {0}")]
    Plan(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
