use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("invalid mask: {0}")]
    InvalidMask(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: String, actual: String },

    #[error("invalid attribution: {0}")]
    InvalidAttribution(String),

    #[error("invalid ordering: {0}")]
    InvalidOrdering(String),

    #[error("index {index} out of bounds for {len}")]
    OutOfBounds { index: usize, len: usize },

    #[error("requested {requested} superpixels but the image has only {pixels} pixels")]
    TooManySuperpixels { requested: usize, pixels: usize },

    #[error("no kept pixels: inpainting has no boundary to grow from")]
    NoBoundary,

    #[error("empty reference pool")]
    EmptyPool,

    #[error("external imputer timed out after {0:?}")]
    Timeout(std::time::Duration),

    #[error("external imputer failed: {0}")]
    External(String),

    #[error("invalid probabilities: {0}")]
    InvalidProbabilities(String),

    #[error("model error: {0}")]
    Model(String),

    #[error("too many players for exact enumeration: {n} > {max}")]
    TooManyPlayers { n: usize, max: usize },

    #[error("undefined correlation: {0}")]
    UndefinedCorrelation(String),

    #[error("invalid ranking input: {0}")]
    Ranking(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image codec error: {0}")]
    Codec(#[from] image::ImageError),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
