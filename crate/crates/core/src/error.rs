use std::path::PathBuf;

use thiserror::Error;

/// Failures while reading MNIST IDX containers.
#[derive(Debug, Error)]
pub enum LoadError {
    #[error("{path}: bad magic number {found:#010x}, expected {expected:#010x}")]
    BadMagic {
        path: PathBuf,
        found: u32,
        expected: u32,
    },
    #[error("{path}: truncated payload, expected {expected} bytes but found {found}")]
    Truncated {
        path: PathBuf,
        expected: usize,
        found: usize,
    },
    #[error("item count mismatch: {images} images vs {labels} labels")]
    CountMismatch { images: usize, labels: usize },
    #[error("{path}: images are {rows}x{cols}, expected 28x28")]
    BadDimensions {
        path: PathBuf,
        rows: usize,
        cols: usize,
    },
    #[error("{path}: label {label} out of range")]
    BadLabel { path: PathBuf, label: u8 },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Error)]
pub enum WtaError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Load(#[from] LoadError),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error("config hash mismatch: checkpoint was written by {stored}, current config is {current}")]
    HashMismatch { stored: String, current: String },
    #[error("runtime error: {0}")]
    Runtime(String),
}

impl WtaError {
    pub fn config(msg: impl Into<String>) -> Self {
        WtaError::Config(msg.into())
    }

    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        WtaError::Io {
            context: context.into(),
            source,
        }
    }

    /// Process exit code for this failure class (config 2, I/O 3, runtime 4).
    pub fn exit_code(&self) -> i32 {
        match self {
            WtaError::Config(_) | WtaError::HashMismatch { .. } => 2,
            WtaError::Load(_) | WtaError::Io { .. } | WtaError::Checkpoint(_) => 3,
            WtaError::Runtime(_) => 4,
        }
    }
}

pub type Result<T, E = WtaError> = std::result::Result<T, E>;
