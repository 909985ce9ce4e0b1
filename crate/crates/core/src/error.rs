use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point coordinate {value} lies outside the open interval (-1, 1)")]
    Domain { value: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("index set would contain more than {cap} indices")]
    CardinalityCap { cap: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("index set is not lower (downward closed)")]
    NotLower,

    #[error("weight vector has {found} entries but the index set has {expected}")]
    MissingWeight { expected: usize, found: usize },

    #[error("constraint set is empty: data is not in the range of the measurement matrix")]
    Infeasible,

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("problem size {size} exceeds the cap {cap} for {what}")]
    SizeCap { what: &'static str, size: usize, cap: usize },

    #[error("matrix has numerical rank zero")]
    RankZero,

    #[error("quadrature budget exceeded: {nodes} nodes requested, cap {cap}")]
    QuadratureBudget { nodes: u128, cap: u128 },

    #[error("unknown function id `{id}`; available: {available}")]
    UnknownFunction { id: String, available: String },

    #[error("function evaluation failed: {0}")]
    Evaluation(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
