use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("invalid label distribution: {0}")]
    InvalidLabel(String),

    #[error("invalid cut: position {position} is not strictly inside (0, {extent})")]
    InvalidCut { position: usize, extent: usize },

    #[error("invalid concat: {0}")]
    InvalidConcat(String),

    #[error("image of {height}x{width} is too small to cut in either dimension")]
    CannotCut { height: usize, width: usize },

    #[error("invalid layout: {0}")]
    InvalidLayout(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unsupported channel count {channels}: {reason}")]
    UnsupportedChannels {
        channels: usize,
        reason: &'static str,
    },

    #[error("invalid mix: {0}")]
    InvalidMix(String),

    #[error("invalid comparison: {0}")]
    InvalidComparison(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("policy parse error at line {line}: {message}")]
    PolicyParse { line: usize, message: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("format error in {path} at byte {offset}: {message}")]
    Format {
        path: PathBuf,
        offset: u64,
        message: String,
    },

    #[error("prediction log line {line}: {message}")]
    PredictionLog { line: usize, message: String },

    #[error("unsupported output format: {0}")]
    UnsupportedFormat(String),

    #[error("image codec error for {path}: {source}")]
    Codec {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("io error for {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
