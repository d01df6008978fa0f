use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Error, Debug)]
pub enum Error {
    #[error("index ({row}, {col}) out of bounds for {n_rows}x{n_cols} matrix")]
    OutOfBounds {
        row: usize,
        col: usize,
        n_rows: usize,
        n_cols: usize,
    },

    #[error("duplicate entry at ({row}, {col})")]
    DuplicateEntry { row: usize, col: usize },

    #[error("size mismatch: {0}")]
    SizeMismatch(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },

    #[error("k = {k} too large for {available} candidate sources")]
    KTooLarge { k: usize, available: usize },

    #[error("pattern is not square ({n_rows}x{n_cols})")]
    NotSquare { n_rows: usize, n_cols: usize },

    #[error("bandwidth must be positive and finite, got {0}")]
    NonPositiveBandwidth(f64),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("embedding dimension {0} not supported (1..=3)")]
    DimTooHigh(usize),

    #[error("level {level} out of range (tree depth {depth})")]
    LevelOutOfRange { level: usize, depth: usize },

    #[error("pattern has no nonzeros")]
    EmptyPattern,

    #[error("instance too large for exhaustive search: {0}")]
    TooLarge(String),

    #[error("tree span {tree} does not match matrix dimension {matrix}")]
    SpanMismatch { tree: usize, matrix: usize },

    #[error("cluster span {span} exceeds the 16-bit local index range")]
    LocalIndexOverflow { span: usize },

    #[error("non-finite value at ({row}, {col})")]
    NonFiniteValue { row: usize, col: usize },

    #[error("vector layout does not match matrix ordering")]
    OrderingMismatch,

    #[error("all kernel weights underflowed for target {target}")]
    ZeroWeight { target: usize },

    #[error("{n} is not divisible by block size {block}")]
    NotDivisible { n: usize, block: usize },

    #[error("{per_row} entries per row exceed row length {n}")]
    TooWide { per_row: usize, n: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("malformed record at byte offset {offset}: {reason}")]
    MalformedRecord { offset: u64, reason: String },

    #[error("inconsistent dimension in record {record}: expected {expected}, got {got}")]
    InconsistentDim {
        record: usize,
        expected: usize,
        got: usize,
    },

    #[error("file contains no records")]
    EmptyFile,

    #[error("parse error on line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("checksum mismatch for scheme {scheme}: {got} vs reference {expected}")]
    ChecksumMismatch {
        scheme: String,
        expected: f64,
        got: f64,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
