use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("ball of radius {radius} at {center:?} leaves the grid domain")]
    OutOfDomain { center: Vec<f64>, radius: f64 },
    #[error("radius {radius} is below the sampling guard {min_radius}")]
    RadiusTooSmall { radius: f64, min_radius: f64 },
    #[error("samples live on different lattices")]
    LatticeMismatch,
    #[error("no pair of defined samples to compare")]
    AllUndefined,
    #[error("format error at byte {offset}: {message}")]
    Format { offset: u64, message: String },
    #[error("dimension {0} is not supported (1 <= n <= 3)")]
    DimensionUnsupported(usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("empty input")]
    EmptyInput,
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("region contains no defined samples")]
    EmptyRegion,
    #[error("region contains infinite values; map them through the arctan transform first")]
    NonFiniteValues,
    #[error("half-ball for the winning direction holds only {nodes} nodes")]
    DegenerateHalf { nodes: usize },
    #[error("no family ball has oscillation below {threshold}")]
    NoQuietBall { threshold: f64 },
    #[error("degenerate cone: {0}")]
    DegenerateCone(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("point {0:?} does not admit every sampled radius")]
    Insufficient(Vec<f64>),
    #[error("invalid corpus spec: {0}")]
    InvalidSpec(String),
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
