use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("local dimensions must all be >= 2, got {0:?}")]
    InvalidDims(Vec<usize>),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("matrix is not square ({rows}x{cols})")]
    NonSquare { rows: usize, cols: usize },
    #[error("matrix is not Hermitian (max deviation {deviation:e})")]
    NotHermitian { deviation: f64 },
    #[error("trace must be 1, got {trace}")]
    TraceViolation { trace: f64 },
    #[error("matrix is not positive semidefinite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositive { min_eigenvalue: f64 },
    #[error("subsystem index {index} is out of range for {parties} parties")]
    InvalidSubsystem { index: usize, parties: usize },
    #[error("rank {rank} is out of range 1..={total}")]
    RankOutOfRange { rank: usize, total: usize },
    #[error("invalid Bell-diagonal spectrum: {0}")]
    InvalidSpectrum(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("order {0} is not supported")]
    UnsupportedOrder(usize),
    #[error("order-3 Weingarten values are singular at d = {d} (need d >= 3)")]
    SingularWeingarten { d: usize },
    #[error("permutation orders differ ({0} vs {1})")]
    OrderMismatch(usize, usize),
    #[error("invalid estimator configuration: {0}")]
    InvalidConfig(String),
    #[error("reconstruction residual {residual:e} exceeds {limit:e}")]
    Residual { residual: f64, limit: f64 },
    #[error("state file: {0}")]
    StateFile(String),
}
