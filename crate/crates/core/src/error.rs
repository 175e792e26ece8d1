use thiserror::Error;

/// Errors raised by the library. Witness outcomes (non-quasielliptic input,
/// inconclusive refinement) are values, not errors; see [`crate::qpoly::NonQeWitness`].
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("{0} is not a prime")]
    NotPrime(u64),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("prime mismatch: {0} vs {1}")]
    PrimeMismatch(u64, u64),

    #[error("polynomial is constant")]
    ConstantPolynomial,

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("invalid rational literal '{0}'")]
    ParseRational(String),

    #[error("refinement depth {depth} is below the minimum {min}")]
    DepthTooSmall { depth: i64, min: i64 },

    #[error("cell budget of {0} exceeded")]
    CellBudget(usize),

    #[error("function size p^{exponent} exceeds the dense coefficient limit")]
    TooLarge { exponent: u32 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("function is not in the Lizorkin space {0}")]
    NotInLizorkin(String),

    #[error("integral diverges: {0}")]
    Divergent(String),

    #[error("polynomial is not certified quasielliptic: {0}")]
    NotCertified(String),

    #[error("not semi-quasielliptic: term {term:?} has weighted degree {degree} >= {d}")]
    NotSemiQuasielliptic { term: Vec<u32>, degree: u64, d: u64 },

    #[error("boundary-shell verification failed: {0}")]
    VerificationFailed(String),

    #[error("tolerance {tol:e} not reachable: {reason}")]
    Tolerance { tol: f64, reason: String },

    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
