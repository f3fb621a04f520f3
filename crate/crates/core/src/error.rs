//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by kernel operations.
#[derive(Debug, Error)]
pub enum Error {
    /// Tensor shapes do not conform for the requested operation.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// An argument is outside its documented range.
    #[error("range error: {0}")]
    Range(String),

    /// A neuron or layer configuration is invalid for the requested mode.
    #[error("config error: {0}")]
    Config(String),

    /// An operation was called in a mode it does not support.
    #[error("mode error: {0}")]
    Mode(String),

    /// A Monte-Carlo check was asked for too few samples to be meaningful.
    #[error("sample-size error: need at least {min} samples, got {got}")]
    SampleSize { min: usize, got: usize },

    /// Spike statistics were not recorded during the forward pass.
    #[error("instrumentation error: {0}")]
    Instrumentation(String),

    /// A network contains a layer the transformation cannot handle.
    #[error("unsupported layer: {0}")]
    UnsupportedLayer(String),

    /// Training diverged.
    #[error("training error: loss became non-finite at epoch {epoch}")]
    Training { epoch: usize },

    /// A dataset file or row could not be parsed.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// A checkpoint file is malformed, truncated, or from another version.
    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    /// Underlying I/O failure.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
