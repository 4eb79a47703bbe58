use thiserror::Error;

/// Errors raised by the estimation library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("window length {window} out of range for series of length {len}")]
    WindowOutOfRange { window: usize, len: usize },

    #[error("GLRR order {order} too large for series of length {len}")]
    OrderTooLarge { order: usize, len: usize },

    #[error("GLRR coefficient vector must be nonzero with at least two entries")]
    InvalidGlrr,

    #[error("index {index} out of range 1..={max}")]
    IndexOutOfRange { index: usize, max: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("model components: {0}")]
    InvalidComponent(String),

    #[error("AR coefficients are not stationary (reflection coefficient {0} has modulus >= 1)")]
    UnstableAr(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("operation requires {required} weights, got {found}")]
    WeightVariant {
        required: &'static str,
        found: &'static str,
    },

    #[error("matrix is not positive definite (pivot {pivot} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },

    #[error("circulant spectrum is degenerate: no grid rotation avoids the roots of g_a")]
    DegenerateSpectrum,

    #[error("complex basis does not realize: residual {defect:e} exceeds {tol:e}")]
    NotReal { defect: f64, tol: f64 },

    #[error("weighted design is rank deficient (sigma_min/sigma_max = {ratio:e})")]
    RankDeficient { ratio: f64 },

    #[error("series too short: need at least {needed} values, got {len}")]
    SeriesTooShort { needed: usize, len: usize },

    #[error("no observed values")]
    NoObservations,

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
