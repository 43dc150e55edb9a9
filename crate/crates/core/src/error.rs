//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by the simulator library.
#[derive(Debug, Error)]
pub enum SimError {
    /// An argument violated a documented precondition or invariant.
    #[error("domain error: {0}")]
    Domain(String),
    /// A referenced entity (user, channel, allocation) does not exist.
    #[error("lookup error: {0}")]
    Lookup(String),
    /// Shapes of tensors / images / layers do not chain.
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    /// Training produced a non-finite loss.
    #[error("training diverged at epoch {epoch}, batch {batch}: loss {loss}")]
    Diverged { epoch: usize, batch: usize, loss: f64 },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    /// A persisted file is not in the expected format.
    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, SimError>;
