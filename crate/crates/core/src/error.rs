use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: expected {expected} columns, found {found}")]
    ColumnCount {
        line: usize,
        expected: usize,
        found: usize,
    },

    #[error("line {line}: frame index {index} does not increase (previous {previous})")]
    NonMonotonic {
        line: usize,
        index: u64,
        previous: u64,
    },

    #[error("invalid recording: {0}")]
    InvalidRecording(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("stream of {frames} frames never primed the pipeline ({needed} needed)")]
    NotPrimed { frames: usize, needed: usize },

    #[error("misaligned inputs: frame {frame} vs velocity frame {velocity}")]
    Misaligned { frame: u64, velocity: u64 },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("model file checksum mismatch")]
    Checksum,

    #[error("bad model file magic")]
    BadMagic,

    #[error("unsupported model file version {0}")]
    Version(u32),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}
