use thiserror::Error;

/// Errors raised by the numerical routines.
///
/// Variants split into configuration problems (bad sizes, out-of-range
/// parameters) and numerical failures; [`Error::is_numerical`] tells them apart
/// so drivers can map them to different exit codes.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("eigensolver failed on a {dim}x{dim} matrix (max-norm {norm:e}): {reason}")]
    Eigensolver { dim: usize, norm: f64, reason: String },

    #[error("no complex sector: every eigenvalue has |Im E| <= {threshold:e}")]
    NoComplexSector { threshold: f64 },

    #[error("eigenvalue collision: spectrum comes within {distance:e} of delta at parameter {at}")]
    EigenvalueCollision { at: f64, distance: f64 },

    #[error(
        "winding estimators disagree on a {grid}-point grid: {jumps} signed jumps vs phase accumulation {accumulation}"
    )]
    EstimatorDisagreement { grid: usize, jumps: i64, accumulation: f64 },

    #[error("biorthogonal overlap {overlap:e} is below 1e-10 (near an exceptional point)")]
    DegenerateBiorthogonalOverlap { overlap: f64 },

    #[error("branch folding ambiguity: quasienergy real part {value} sits at the zone edge {edge}")]
    BranchFoldingAmbiguity { value: f64, edge: f64 },

    #[error("propagator did not converge: change {change:e} between the last two iterates at {steps} steps")]
    PropagatorNonConvergence { steps: usize, change: f64 },
}

impl Error {
    /// True for failures of a numerical procedure, false for rejected input.
    pub fn is_numerical(&self) -> bool {
        !matches!(self, Error::InvalidParameter(_) | Error::DimensionMismatch { .. })
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
