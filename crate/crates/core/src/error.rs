use alloc::string::String;

use thiserror::Error;

/// Failure to read a numeric literal.
#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("malformed numeric literal {0:?}")]
    Malformed(String),
    #[error("zero denominator in {0:?}")]
    ZeroDenominator(String),
}

/// Errors raised by the library operations.
#[derive(Clone, Debug, PartialEq, Error)]
pub enum Error {
    #[error("zero modulus in a log-ratio")]
    ZeroModulus,
    #[error("denominator of a log-ratio has unit modulus")]
    UnitModulusDenominator,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("diagonal moduli are not strictly increasing at index {index}")]
    SpectralOrderViolation { index: usize },
    #[error("stage {stage} out of range for dimension {dim}")]
    StageOutOfRange { stage: usize, dim: usize },
    #[error("A - I is singular")]
    SingularAminusI,
    #[error("generating-pair order violated: {0}")]
    PrecViolation(String),
    #[error("first coordinate is zero")]
    ZeroFirstCoordinate,
    #[error("seed has zero first coordinate")]
    SeedFirstCoordinateZero,
    #[error("lifted orbit point has first coordinate within tolerance of zero")]
    PhiDivergence,
    #[error("search budget exhausted: {0}")]
    NotFound(String),
    #[error("enumeration of {words} words exceeds the cap {cap}")]
    BudgetExceeded { words: u128, cap: u128 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("system has not been validated: {0}")]
    NotValidated(String),
    #[error(transparent)]
    Parse(#[from] ParseError),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
