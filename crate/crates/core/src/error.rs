use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeomError {
    #[error("dimension mismatch: {left:?} vs {right:?}")]
    DimensionMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("invalid bounding box ({x_min}, {y_min}, {x_max}, {y_max})")]
    InvalidBox {
        x_min: f64,
        y_min: f64,
        x_max: f64,
        y_max: f64,
    },
    #[error("buffer of length {got} does not match {width}x{height}x{channels}")]
    BufferSize {
        width: usize,
        height: usize,
        channels: usize,
        got: usize,
    },
    #[error("keypoint count mismatch: {0} vs {1}")]
    JointCount(usize, usize),
    #[error("sequence too short: need at least {need} frames, got {got}")]
    SequenceTooShort { need: usize, got: usize },
    #[error("malformed grid encoding: {0}")]
    Codec(String),
}

pub type Result<T, E = GeomError> = std::result::Result<T, E>;
