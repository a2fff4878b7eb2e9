//! Error type shared across the library.

use thiserror::Error;

/// Failure modes of library operations.
#[derive(Debug, Error)]
pub enum TgvError {
    /// A scalar or index outside its documented range.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Matrix or image dimensions that do not match an operation's contract.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// A request above a documented practical size cap.
    #[error("capacity exceeded: {0}")]
    CapacityExceeded(String),

    /// Structurally well-formed input that violates a required invariant.
    #[error("inconsistent input: {0}")]
    InconsistentInput(String),
}

pub type Result<T> = std::result::Result<T, TgvError>;
