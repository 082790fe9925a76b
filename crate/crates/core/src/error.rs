use thiserror::Error;

/// Errors raised by configuration, learning and I/O paths of the simulator.
#[derive(Debug, Error)]
pub enum EhflError {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid configuration: `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("non-finite loss at slot {slot} (client {client}): training diverged")]
    Divergence { slot: u64, client: usize },

    #[error("expected {expected} per-batch feature sums, got {got}")]
    IncompleteTraining { expected: usize, got: usize },

    #[error("data partition failed: {0}")]
    Partition(String),

    #[error("dataset file: {0}")]
    DatasetFormat(String),

    #[error("cannot normalize an all-zero group")]
    AllZeroGroup,

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl EhflError {
    pub(crate) fn config(key: &str, reason: impl Into<String>) -> Self {
        EhflError::Config {
            key: key.to_string(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, EhflError>;
