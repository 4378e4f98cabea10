use std::path::PathBuf;

/// Errors produced by the eyespot library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Unreadable {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot write {path}: {source}")]
    Unwritable {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),

    #[error("image decode error: {0}")]
    Decode(String),

    #[error("image dimensions {width}x{height} exceed the supported limit")]
    DimensionOverflow { width: u64, height: u64 },

    #[error("invalid image dimensions {width}x{height}")]
    InvalidDimensions { width: usize, height: usize },

    #[error("rectangle {x},{y} {w}x{h} does not fit inside a {width}x{height} image")]
    OutOfBounds {
        x: usize,
        y: usize,
        w: usize,
        h: usize,
        width: usize,
        height: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("bad magic: expected {expected:?}")]
    BadMagic { expected: &'static str },

    #[error("truncated input: {0}")]
    Truncated(String),

    #[error("model dimensions {n_in}x{n_hidden} exceed the supported limit")]
    ModelOverflow { n_in: u64, n_hidden: u64 },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("degenerate feature points: {0}")]
    Degenerate(String),

    #[error("manifest line {line}: {message}")]
    Manifest { line: usize, message: String },

    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
