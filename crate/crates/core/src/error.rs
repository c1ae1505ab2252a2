//! Error type shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("tree has {nodes} nodes, exceeding max_len {max_len}")]
    TooLarge { nodes: usize, max_len: usize },

    #[error("illegal node value at position {position}: {reason}")]
    IllegalValue { position: usize, reason: String },

    #[error("invalid encoding: {0}")]
    InvalidEncoding(String),

    #[error("node index {index} out of range (tree length {len})")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("invalid configuration: {0}")]
    ConfigError(String),

    #[error("configuration does not match problem: {0}")]
    ConfigMismatch(String),

    #[error("population is empty")]
    EmptyPopulation,

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("expression parse error: {0}")]
    ExprParse(String),

    #[error("grid contains a pole at {axis} = 0")]
    PoleOnGrid { axis: &'static str },

    #[error("bad grid: {0}")]
    BadGrid(String),

    #[error("line {line}: cannot parse {field:?} as a number")]
    ParseError { line: usize, field: String },

    #[error("line {line}: row has {got} fields, expected {expected}")]
    ShapeError {
        line: usize,
        got: usize,
        expected: usize,
    },

    #[error("line {line}: non-finite value {field:?}")]
    NonFinite { line: usize, field: String },

    #[error("class label {label} out of range [0, {classes})")]
    LabelOutOfRange { label: f64, classes: usize },

    #[error("all arguments must be positive, got {0}")]
    NonPositiveInput(String),

    #[error("unsupported checkpoint version {0}")]
    VersionMismatch(u32),

    #[error("checkpoint checksum mismatch")]
    CorruptChecksum,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}
