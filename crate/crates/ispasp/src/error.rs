use thiserror::Error;

/// Errors produced across the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix must have at least one row and one column")]
    EmptyMatrix,
    #[error("matrix data length {got} does not match {rows}x{cols}")]
    BadDataLength { rows: usize, cols: usize, got: usize },
    #[error("matrix entries must all be finite")]
    NonFiniteEntry,
    #[error("matrix must be entrywise non-negative")]
    NegativeEntry,
    #[error("shape mismatch in {op}: left is {left_rows}x{left_cols}, right is {right_rows}x{right_cols}")]
    ShapeMismatch {
        op: &'static str,
        left_rows: usize,
        left_cols: usize,
        right_rows: usize,
        right_cols: usize,
    },
    #[error("index {index} out of range for universe of size {universe}")]
    IndexOutOfRange { index: usize, universe: usize },
    #[error("index set over universe {set_universe} does not apply to {expected} rows")]
    UniverseMismatch { set_universe: usize, expected: usize },
    #[error("empty index set not allowed here")]
    EmptyIndexSet,
    #[error("k = {k} out of range 1..={len}")]
    KOutOfRange { k: usize, len: usize },
    #[error("target size s = {s} out of range 1..={max}")]
    SparsityOutOfRange { s: usize, max: usize },
    #[error("p = {p} must lie strictly inside (0, 1)")]
    InvalidP { p: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("training diverged: non-finite loss at epoch {epoch}")]
    TrainingDiverged { epoch: usize },
    #[error("support enumeration too large: C({n}, {r}) exceeds guard of {guard}")]
    EnumerationTooLarge { n: usize, r: usize, guard: u64 },
    #[error("eigensolver did not converge within {sweeps} sweeps")]
    EigenNotConverged { sweeps: usize },
    #[error("weight norm list has length {got}, expected {expected}")]
    LayerCountMismatch { expected: usize, got: usize },
    #[error("bad idx magic {got:#010x}, expected {expected:#010x}")]
    IdxBadMagic { expected: u32, got: u32 },
    #[error("idx file truncated: need {need} bytes, have {have}")]
    IdxTruncated { need: usize, have: usize },
    #[error("idx payload of {got} bytes does not match declared dimensions ({expected} bytes)")]
    IdxDimMismatch { expected: usize, got: usize },
    #[error("label {label} outside 0..=9 at position {position}")]
    LabelOutOfRange { label: u8, position: usize },
    #[error("image/label counts differ: {images} images, {labels} labels")]
    CountMismatch { images: usize, labels: usize },
    #[error("bad checkpoint file: {0}")]
    BadCheckpoint(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("slope fit needs at least 3 positive points, have {have}")]
    TooFewPoints { have: usize },
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
