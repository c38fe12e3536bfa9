use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix must have at least one row and one column, got {rows}x{cols}")]
    EmptyMatrix { rows: usize, cols: usize },
    #[error("expected {expected} entries for a {rows}x{cols} matrix, got {got}")]
    DimensionMismatch {
        rows: usize,
        cols: usize,
        expected: usize,
        got: usize,
    },
    #[error("non-finite entry at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("empty submatrix")]
    EmptySubmatrix,
    #[error("row index {index} out of range for {len} rows")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("invalid exponent {0}: must be in [1, inf]")]
    InvalidExponent(f64),
    #[error("column {0} is identically zero")]
    ZeroColumn(usize),
    #[error("matrix is identically zero")]
    ZeroMatrix,
    #[error("{rows} rows exceed the exhaustive limit of {max}; use the heuristic method")]
    TooLarge { rows: usize, max: usize },
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error("no nontrivial partition of a single row")]
    NoNontrivialPartition,
    #[error("target fraction {0} outside [1/2, 1]")]
    InvalidTarget(f64),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("row {row}: convex solver {solver} disagrees with closed form {closed_form}")]
    SolverDisagreement {
        row: usize,
        solver: f64,
        closed_form: f64,
    },
}
