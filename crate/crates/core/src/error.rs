use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid max-plus scalar `{0}`")]
    InvalidScalar(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix dimension must be positive")]
    EmptyMatrix,

    #[error("row {row} is entirely -inf; the matrix does not define a topical operator")]
    InvalidOperator { row: usize },

    #[error("exact evaluation needs rational matrix entries")]
    NotRational,

    #[error("vector entries must be finite")]
    NonFiniteVector,

    #[error("coordinate index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("graph has no circuit")]
    Acyclic,

    #[error("graph of the matrix is not strongly connected")]
    NotStronglyConnected,

    #[error("maximal circuit length must be at least 1")]
    InvalidCircuitLength,

    #[error("malformed operator law: {0}")]
    InvalidLaw(String),

    #[error("malformed experiment plan: {0}")]
    InvalidPlan(String),

    #[error("law must have finite support for this operation")]
    NotFiniteSupport,

    #[error("no rank-1 product found in the explored semigroup")]
    NoRankOne,

    #[error("lattice test needs at least one value")]
    EmptyValues,

    #[error("degenerate instance: {0}")]
    Degenerate(String),

    #[error("instance is algebraically arithmetic (lattice {offset} + {step}Z); refusing local limit estimate")]
    Arithmetic { offset: String, step: String },

    #[error("renewal sums need a positive Lyapunov exponent, got {0}")]
    NonPositiveDrift(f64),

    #[error("need at least {needed} horizons, got {got}")]
    InsufficientHorizons { needed: usize, got: usize },

    #[error("need at least one trial")]
    NoTrials,

    #[error("empty sample")]
    EmptySample,

    #[error("{0}")]
    Io(String),
}
