use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid lattice: {0}")]
    InvalidLattice(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("blocks overlap at position {0}")]
    OverlappingBlocks(usize),

    #[error("label {0} not present in matrix")]
    UnknownLabel(usize),

    /// `D - lambda` is numerically singular: `lambda` is resonant with the
    /// eliminated index set.
    #[error("complement block is singular at lambda = {lambda}: gap {gap:e} <= threshold {threshold:e}")]
    SingularComplement { lambda: f64, gap: f64, threshold: f64 },

    /// The measured complement gap is below the window required at this scale.
    #[error("window violated at scale {scale}: complement gap {gap:e} < required {required:e}")]
    WindowViolated { scale: usize, gap: f64, required: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("Neumann series does not converge: contraction factor {0} >= 1")]
    NeumannDivergent(f64),

    #[error("fixed-point iteration not contracting (ratio {ratio}) near lambda = {lambda}")]
    NotContracting { lambda: f64, ratio: f64 },

    #[error("near-degenerate eigenvalues at lambda = {lambda}: separation {separation:e}")]
    NearDegenerate { lambda: f64, separation: f64 },

    #[error("eigenvector residual {residual:e} exceeds tolerance {tolerance:e}")]
    ResidualTooLarge { residual: f64, tolerance: f64 },

    #[error("polynomial fit residual {residual:e} exceeds {tolerance:e}")]
    FitResidual { residual: f64, tolerance: f64 },

    #[error("probe too large: {0}")]
    ProbeTooLarge(String),

    #[error("serialization: {0}")]
    Serde(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serde(e.to_string())
    }
}
