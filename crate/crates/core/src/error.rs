use thiserror::Error;

/// Errors raised by the channel, duality and balance operations.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not Hermitian (relative residual {residual:.3e})")]
    NotHermitian { residual: f64 },

    #[error("matrix is not positive semidefinite (minimum eigenvalue {min_eigenvalue:.3e})")]
    NotPositive { min_eigenvalue: f64 },

    #[error("state trace is {trace}, expected 1")]
    NotNormalized { trace: f64 },

    #[error("state is not invertible (eigenvalue {eigenvalue:.3e} at or below rank tolerance)")]
    NonInvertibleState { eigenvalue: f64 },

    #[error("output state sigma is not invertible (eigenvalue {eigenvalue:.3e} at or below rank tolerance)")]
    NonInvertibleSigma { eigenvalue: f64 },

    #[error("zero-eigenvalue inverse power requested with kernel policy `reject`")]
    SingularPower,

    #[error(
        "channel does not satisfy elementary transition detailed balance (residual {residual:.3e})"
    )]
    EtdbNotSatisfied { residual: f64 },

    #[error("operation requires a channel from a system to itself (got {dim_in} -> {dim_out})")]
    NonSquare { dim_in: usize, dim_out: usize },

    #[error("reversing operation does not fix the state (residual {residual:.3e})")]
    ThetaStateMismatch { residual: f64 },

    #[error("reversing operation is not diagonal in the supplied basis (off-diagonal norm {residual:.3e})")]
    NotDiagonalizedJointly { residual: f64 },

    #[error("operator is not an involution: {0}")]
    NotInvolution(String),

    #[error("basis is not unitary or does not diagonalize the state: {0}")]
    InvalidBasis(String),

    #[error("invalid Markov chain: {0}")]
    InvalidChain(String),

    #[error("output distribution has zero component at index {index}")]
    ZeroSigmaComponent { index: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("malformed JSON at line {line}, column {column}: {message}")]
    Json {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("Jacobi eigensolver did not converge (off-diagonal norm {off_norm:.3e})")]
    NoConvergence { off_norm: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
