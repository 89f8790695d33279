//! Crate-wide error type.

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image error on {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("image has a zero dimension")]
    ZeroDimension,

    #[error("unsupported color type {0}; expected 8-bit grayscale or RGB")]
    UnsupportedColor(String),

    #[error("unsupported output format {0:?}; use .png or .pgm")]
    UnsupportedFormat(String),

    #[error("coordinate ({x}, {y}) out of bounds for {width}x{height} mask")]
    OutOfBounds { x: u32, y: u32, width: u32, height: u32 },

    #[error("mask dimensions differ: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(u32, u32, u32, u32),

    #[error("mask has no foreground pixels")]
    EmptyForeground,

    #[error("mask has no background pixels; half-thickness is undefined")]
    NoBackground,

    #[error("window around ({x}, {y}) holds {found} skeleton pixels; need at least 2")]
    DegenerateWindow { x: u32, y: u32, found: usize },

    #[error("{0}x{1} image is smaller than the {2}x{2} SSIM window")]
    TooSmallForSsim(u32, u32, u32),

    #[error("need at least 3 samples to partition stages, got {0}")]
    TooFewSamples(usize),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("config error at line {line}: {msg}")]
    Config { line: usize, msg: String },

    #[error("usage error: {0}")]
    Usage(String),

    #[error("{0}")]
    Data(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn image(path: impl Into<PathBuf>, source: image::ImageError) -> Self {
        Error::Image { path: path.into(), source }
    }
}
