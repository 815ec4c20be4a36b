//! Error type shared by every module in the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, QvdError>;

#[derive(Debug, Error)]
pub enum QvdError {
    #[error("matrix is not Hermitian: deviation {deviation:.3e} exceeds tolerance {tol:.3e}")]
    NotHermitian { deviation: f64, tol: f64 },

    #[error("trace deviates from 1 by {deviation:.3e} (tolerance {tol:.3e})")]
    TraceDeviation { deviation: f64, tol: f64 },

    #[error("matrix has eigenvalue {min_eigenvalue:.3e} below -{tol:.3e}")]
    NotPositive { min_eigenvalue: f64, tol: f64 },

    #[error("dimension mismatch: {context}")]
    DimensionMismatch { context: String },

    #[error("Kraus completeness violated: deviation {deviation:.3e}")]
    CompletenessViolation { deviation: f64 },

    #[error("channel has no representation to convert from")]
    MissingRepresentation,

    #[error("Kraus extraction requires a PSD Choi matrix (min eigenvalue {min_eigenvalue:.3e})")]
    NonPsdChoi { min_eigenvalue: f64 },

    #[error("kraus_rank {rank} outside 1..={max}")]
    InvalidKrausRank { rank: usize, max: usize },

    #[error("scalar function undefined at eigenvalue {eigenvalue:.6e}")]
    FunctionUndefined { eigenvalue: f64 },

    #[error("cost guard exceeded: {context}")]
    CostGuard { context: String },

    #[error("quadrature failed to converge: {context}")]
    QuadratureFailure { context: String },

    #[error("finite-difference step leaves the positive cone (max feasible step {max_step:.3e})")]
    StepInfeasible { max_step: f64 },

    #[error("no positive step along the requested direction keeps the state valid")]
    InfeasibleDirection,

    #[error("degenerate probability vector: entry {index} is {value:.3e}")]
    DegenerateSpectrum { index: usize, value: f64 },

    #[error("kernel weight sum underflowed to zero")]
    WeightUnderflow,

    #[error("lattice point does not sum to n: got {got}, expected {expected}")]
    LatticeSumMismatch { got: usize, expected: usize },

    #[error("order fit needs at least 3 positive errors, {kept} remained after dropping {dropped}")]
    TooFewFitPoints { kept: usize, dropped: usize },

    #[error("matrix is singular beyond the positivity floor (min eigenvalue {min_eigenvalue:.3e})")]
    SingularMatrix { min_eigenvalue: f64 },

    #[error("boundary state reached by a map declared interior-only (weight {weight:.3e})")]
    BoundaryState { weight: f64 },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl QvdError {
    /// Process exit code for the CLI: config/usage problems are 2, numerical
    /// failures are 3.
    pub fn exit_code(&self) -> i32 {
        match self {
            QvdError::Config(_) | QvdError::Io(_) | QvdError::Json(_) => 2,
            _ => 3,
        }
    }
}
