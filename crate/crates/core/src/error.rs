use thiserror::Error;

/// Errors raised across the valuation toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("probability {value} at row {row}, column {column} is outside [0, 1]")]
    ProbabilityOutOfRange { row: usize, column: usize, value: f64 },

    #[error("label {value} at row {row} is not binary (expected 0 or 1)")]
    NonBinaryLabel { row: usize, value: String },

    #[error("row {row} has {found} probabilities, expected {expected}")]
    RaggedRow { row: usize, expected: usize, found: usize },

    #[error("dataset must contain at least one data point and one model")]
    EmptyDataset,

    #[error("{what} has length {found}, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("weight {value} of model {index} violates the bound 0 <= w <= 1/m = {bound}")]
    WeightOutOfBounds { index: usize, value: f64, bound: f64 },

    #[error("weights sum to {0}, which exceeds 1")]
    WeightSumExceedsOne(f64),

    #[error("cutoff {0} is outside [0, 1]")]
    CutoffOutOfRange(f64),

    #[error("game has {players} players; exact enumeration is limited to {limit}")]
    TooManyPlayers { players: usize, limit: usize },

    #[error("degenerate weight distribution (zero variance); set a positive stability parameter delta")]
    DegenerateVariance,

    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),

    #[error("entropy is undefined for an all-zero vector")]
    UndefinedEntropy,

    #[error("vector contains negative component {value} at index {index}")]
    NegativeComponent { index: usize, value: f64 },

    #[error("AUC is undefined when only one class is present")]
    UndefinedAuc,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("malformed header: {0}")]
    MalformedHeader(String),

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse { row: usize, column: usize, message: String },

    #[error("{0}")]
    Io(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
