use crate::types::GridDims;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid grid dimensions {width}x{height}")]
    InvalidDims { width: usize, height: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimsMismatch { expected: GridDims, found: GridDims },

    #[error("buffer of length {len} does not match dims {dims}")]
    LengthMismatch { dims: GridDims, len: usize },

    #[error("value out of range: {0}")]
    OutOfRange(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("malformed data: {0}")]
    Format(String),

    #[error("need {needed} buffered frames, have {have}")]
    NotEnoughFrames { needed: usize, have: usize },

    #[error("mask is empty")]
    EmptyMask,

    #[error("no path between endpoints inside the mask")]
    NoPath,

    #[error("pixel ({col}, {row}) outside {dims}")]
    OutOfBounds { col: usize, row: usize, dims: GridDims },

    #[error("unknown scene {0:?}")]
    UnknownScene(String),

    #[error("tick budget of {0} exhausted")]
    BudgetExceeded(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
