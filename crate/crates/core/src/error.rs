use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not Hermitian (max |M - M^H| = {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("operator is not positive semidefinite (min eigenvalue {min_eigenvalue:e})")]
    NotPsd { min_eigenvalue: f64 },

    #[error("environment dimension {env_dim} is smaller than the rank {rank}")]
    EnvironmentTooSmall { env_dim: usize, rank: usize },

    #[error("reduced operators differ by {residual:e}; states are not purifications of the same operator")]
    ReducedMismatch { residual: f64 },

    #[error("purification connection failed at step {step}: {reason}")]
    Connection { step: usize, reason: String },

    #[error("catalyst is infeasible: {0}")]
    InfeasibleCatalyst(String),

    #[error("adversary bound is infinite; no finite-step algorithm exists")]
    InfiniteBound,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("solver failed: {0}")]
    Solver(String),
}

pub type Result<T> = std::result::Result<T, Error>;
