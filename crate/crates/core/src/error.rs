use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{op}: shape mismatch, expected {expected}, got {actual}")]
    Shape {
        op: &'static str,
        expected: String,
        actual: String,
    },

    #[error("{op}: {msg}")]
    Precondition { op: &'static str, msg: String },

    #[error("invalid hyper-parameter `{field}`: {msg}")]
    HyperParam { field: &'static str, msg: String },

    #[error("batch norm `{0}` has no running statistics; initialize or train the model first")]
    UninitializedStats(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("manifest {path}, row {row}: {msg}")]
    Manifest {
        path: PathBuf,
        row: usize,
        msg: String,
    },

    #[error("weights file, offset {offset}: {msg}")]
    Weights { offset: u64, msg: String },

    #[error("image {path}: {msg}")]
    Image { path: PathBuf, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn shape_err<T>(
    op: &'static str,
    expected: impl std::fmt::Debug,
    actual: impl std::fmt::Debug,
) -> Result<T> {
    Err(Error::Shape {
        op,
        expected: format!("{expected:?}"),
        actual: format!("{actual:?}"),
    })
}

pub(crate) fn precondition<T>(op: &'static str, msg: impl Into<String>) -> Result<T> {
    Err(Error::Precondition {
        op,
        msg: msg.into(),
    })
}
