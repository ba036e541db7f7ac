use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("check {0} has no variables")]
    EmptyRow(usize),
    #[error("variable {0} has no checks")]
    EmptyColumn(usize),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(&'static str),
    #[error("expected length {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("entry ({row}, {col}) is not binary")]
    NonBinaryEntry { row: usize, col: usize },
    #[error("index {index} out of range for {bound}")]
    IndexOutOfRange { index: usize, bound: usize },
    #[error("duplicate edge between variable {var} and check {chk}")]
    DuplicateEdge { var: usize, chk: usize },
    #[error("n * dv = {0} is not divisible by dc = {1}")]
    DivisibilityViolation(usize, usize),
    #[error("invalid degree: dv and dc must be at least 2")]
    InvalidDegree,
    #[error("no simple regular graph found after {0} attempts")]
    ConstructionFailure(usize),
    #[error("code rate {0} outside (0, 1)")]
    InvalidRate(f64),
    #[error("noise variance {0} must be positive")]
    NonPositiveVariance(f64),
    #[error("equality operator needs at least one input")]
    EmptyInput,
    #[error("chain has f + g = 0")]
    DegenerateChain,
    #[error("probability {0} outside [0, 1]")]
    InvalidProbability(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
    #[error("L (dc - 1)(dv - 1) = {0} must exceed 1")]
    InvalidRegime(f64),
    #[error("sum-product did not converge within {0} iterations")]
    NoConvergence(usize),
    #[error("{n} variables exceeds the enumeration limit of {limit}")]
    TooLarge { n: usize, limit: usize },
}
