//! Error type shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, FrogError>;

#[derive(Debug, Error)]
pub enum FrogError {
    /// Invalid user-facing configuration: bad hyperparameter ranges, unknown
    /// keys, malformed CLI values. Maps to exit code 2.
    #[error("config: {0}")]
    Config(String),

    /// Structurally invalid data: node ids out of range, duplicate or
    /// self-loop edges, dimension mismatches between graph components.
    #[error("structure: {0}")]
    Structure(String),

    /// Dataset files missing, unreadable, or failing checksum validation.
    #[error("data: {0}")]
    Data(String),

    /// Numerical failure during training or evaluation (non-finite loss,
    /// empty contrast sets, degenerate splits).
    #[error("numeric: {0}")]
    Numeric(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl FrogError {
    /// Process exit code for the CLI: config errors are 2, everything else 1.
    pub fn exit_code(&self) -> i32 {
        match self {
            FrogError::Config(_) => 2,
            _ => 1,
        }
    }
}
