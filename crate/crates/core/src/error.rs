use std::path::PathBuf;

/// Crate-wide error type.
///
/// `InvalidConfig` and `Usage` signal caller mistakes; the remaining
/// variants signal bad data (files, maps, splits). The CLI maps usage
/// errors to exit code 1 and data errors to exit code 2.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("index ({y}, {x}) out of bounds for {height}x{width} image")]
    OutOfBounds {
        y: i64,
        x: i64,
        height: usize,
        width: usize,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// True for errors caused by bad arguments rather than bad data.
    pub fn is_usage(&self) -> bool {
        matches!(self, Error::InvalidConfig(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
