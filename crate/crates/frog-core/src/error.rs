//! Crate-wide error type.

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{op}: shape mismatch, expected {expected}, got {got}")]
    ShapeMismatch {
        op: String,
        expected: String,
        got: String,
    },

    #[error("{op}: empty input")]
    EmptyInput { op: &'static str },

    #[error("unknown user id {id}")]
    UnknownUser { id: u32 },

    #[error("duplicate parameter id {0}")]
    DuplicateParam(String),

    #[error("unknown parameter id {0}")]
    UnknownParam(String),

    #[error("config key `{key}`: {reason}")]
    InvalidConfig { key: String, reason: String },

    #[error("{file}:{line}: {reason}")]
    DataFormat {
        file: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("modality `{0}` enabled but no vector present for user {1}")]
    MissingModality(String, u32),

    #[error("non-finite loss at epoch {epoch}, batch {batch} ({detail})")]
    NonFiniteLoss {
        epoch: usize,
        batch: usize,
        detail: String,
    },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("failed to parse {path}: {source}")]
    TomlParse {
        path: PathBuf,
        #[source]
        source: Box<toml::de::Error>,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
