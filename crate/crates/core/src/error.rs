use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("joint distribution has no entries")]
    EmptyMatrix,

    #[error("joint distribution rows have different lengths (row {row} has {len}, expected {expected})")]
    RaggedMatrix {
        row: usize,
        len: usize,
        expected: usize,
    },

    #[error("entry ({row}, {col}) is not a finite number")]
    NonFiniteEntry { row: usize, col: usize },

    #[error("entry ({row}, {col}) is negative: {value}")]
    NegativeEntry { row: usize, col: usize, value: f64 },

    #[error("joint distribution sums to {sum}, expected 1")]
    NotNormalized { sum: f64 },

    #[error("observation {0} has zero probability")]
    ZeroWeightObservation(usize),

    #[error("cluster has zero weight; its impurity gradient is undefined")]
    EmptyCluster,

    #[error("invalid cluster count K = {k} for {m} observations")]
    InvalidK { k: usize, m: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("search space too large: {0}")]
    TooLarge(String),

    #[error("operation requires N = 2 hidden inputs, got N = {0}")]
    WrongDimension(usize),

    #[error("failed to parse joint distribution: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
