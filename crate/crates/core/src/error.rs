use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid time window [{start}, {end})")]
    InvalidWindow { start: i64, end: i64 },

    #[error("time {t} us outside [{start}, {end}]")]
    OutOfRange { t: i64, start: i64, end: i64 },

    #[error("event at index {index} (t = {t} us) lies outside window [{start}, {end}]")]
    EventOutsideWindow {
        index: usize,
        t: i64,
        start: i64,
        end: i64,
    },

    #[error("shape mismatch: expected {expected:?}, got {actual:?}")]
    Shape {
        expected: (usize, usize),
        actual: (usize, usize),
    },

    #[error("{frames} frames do not align with a schedule of {times} timestamps")]
    Alignment { frames: usize, times: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("trajectory generation failed after {rounds} rounds: {reason}")]
    Generation { rounds: usize, reason: String },

    #[error("sampling schedule exceeded {cap} intervals (pathological motion)")]
    PathologicalMotion { cap: usize },

    #[error("cannot split a 1 us interval at t = {t} us with displacement {displacement:.4} px")]
    UnresolvableMotion { t: i64, displacement: f64 },

    #[error("{path}: bad format: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("{path}: corrupt file: {reason}")]
    Corrupt { path: PathBuf, reason: String },

    #[error("invalid event stream: {0}")]
    InvalidStream(crate::event::Violation),

    #[error("sample {index}: {source}")]
    Sample {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("packaging failed: {0}")]
    Packaging(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
