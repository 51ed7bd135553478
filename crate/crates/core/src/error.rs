use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid gaussian mixture: {0}")]
    InvalidMixture(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("dimension {dim} needs {needed} halton bases but only {available} primes are available")]
    PrimeTableExhausted {
        dim: usize,
        needed: usize,
        available: usize,
    },

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("matrix is not positive semidefinite (min eigenvalue {0:e})")]
    NotPositiveSemidefinite(f64),

    #[error("marginal kernel eigenvalue {0:e} outside [0, 1]")]
    InvalidMarginalKernel(f64),

    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("index {index} out of range for ground set of size {n}")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("requested k = {k} exceeds numerical rank {rank}")]
    InsufficientRank { k: usize, rank: usize },

    #[error("enumeration over {n} items exceeds the cap of {cap}")]
    CapExceeded { n: usize, cap: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("no pair satisfies the sign condition")]
    NoPositivePair,

    #[error("CMA-ES step size blew up to {sigma:e} at generation {generation}")]
    CovarianceBlowup { sigma: f64, generation: usize },

    #[error("objective became non-finite ({0}); the step size is likely too large")]
    Diverged(String),

    #[error("non-numeric cell {value:?} at row {row}, column {col}")]
    NonNumericCell { row: usize, col: usize, value: String },

    #[error("ragged rows: row {row} has {got} columns, expected {expected}")]
    RaggedRows { row: usize, expected: usize, got: usize },

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}
