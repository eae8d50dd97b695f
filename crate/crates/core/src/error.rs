use thiserror::Error;

/// Errors raised by the dense linear algebra layer.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: String, got: String },
    #[error("non-finite entry at position {0}")]
    NonFinite(usize),
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("singular matrix (pivot {pivot:e} below threshold)")]
    SingularMatrix { pivot: f64 },
    #[error("tolerance must be positive, got {0}")]
    BadTolerance(f64),
    #[error("parse error: {0}")]
    Parse(String),
}

/// Which inequality of the small-noise regime failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegimeViolation {
    /// `||w||_alpha < c1 * tau` does not hold.
    NoiseTooLarge,
    /// `tau <= c2 * x_min` does not hold.
    TauTooLarge,
    /// Both inequalities fail.
    Both,
}

impl std::fmt::Display for RegimeViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RegimeViolation::NoiseTooLarge => write!(f, "||w||_alpha < c1*tau"),
            RegimeViolation::TauTooLarge => write!(f, "tau <= c2*x_min"),
            RegimeViolation::Both => write!(f, "||w||_alpha < c1*tau and tau <= c2*x_min"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("problem is infeasible")]
    Infeasible,
    #[error("problem is unbounded")]
    Unbounded,
    #[error("iteration limit reached ({iterations} iterations, kkt residual {kkt_residual:e})")]
    MaxIter { iterations: usize, kkt_residual: f64 },
    #[error("x0 is not identifiable: no dual certificate exists")]
    NotIdentifiable,
    #[error("restricted injectivity fails: {0}")]
    NotInjective(String),
    #[error("tau = {tau} outside the admissible range (0, {upper})")]
    TauOutOfRange { tau: f64, upper: f64 },
    #[error("small-noise regime violated: {0}")]
    NoiseRegimeViolated(RegimeViolation),
    #[error("degenerate dual margin: mu = {0} (no admissible noise level)")]
    MuDegenerate(f64),
    #[error("instance too large for enumeration: {0}")]
    TooLarge(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("postcondition failed: {0}")]
    Postcondition(String),
    #[error("signs are not within tolerance of +-1: {0}")]
    SignSnap(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
