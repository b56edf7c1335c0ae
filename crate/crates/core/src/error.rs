use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("non-finite value at row {row}, channel {channel:?}")]
    NonFinite { row: usize, channel: String },

    #[error("window [{start}, {end}) out of range for recording of length {len}")]
    Bounds { start: usize, end: usize, len: usize },

    #[error("channel {0:?} is constant")]
    DegenerateChannel(String),

    #[error("unknown channel {0:?}")]
    UnknownChannel(String),

    #[error("insufficient length: need more than {needed} samples, have {available}")]
    InsufficientLength { needed: usize, available: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate point cloud: {0}")]
    DegenerateCloud(String),

    #[error("no scaling region: {0}")]
    NoScalingRegion(String),

    #[error("no lag in the lag set produced a valid dimension estimate")]
    NoValidLag,

    #[error("trajectory diverged at index {index} (value {value})")]
    Divergence { index: usize, value: f64 },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("size error: {0}")]
    Size(String),

    #[error("stratification error: {0}")]
    Stratification(String),

    #[error("schema mismatch: {0}")]
    Schema(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
