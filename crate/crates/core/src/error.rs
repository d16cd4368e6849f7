use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum DfpiError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("non-finite value encountered")]
    NonFinite,

    #[error("zero diagonal entry in row {row}")]
    ZeroDiagonal { row: usize },

    #[error("zero or near-zero pivot in row {row} during incomplete factorization")]
    ZeroPivot { row: usize },

    #[error("rank-deficient system: numerical rank {rank} of {dim}")]
    RankDeficient { rank: usize, dim: usize },

    #[error("trouble space capacity {capacity} exceeded")]
    CapacityExceeded { capacity: usize },

    #[error("trouble space is empty")]
    EmptySpace,

    #[error("matrix is not symmetric (relative defect {defect:e})")]
    NotSymmetric { defect: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for DfpiError {
    fn from(e: std::io::Error) -> Self {
        DfpiError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, DfpiError>;
