use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("point is off the manifold: constraint violation {violation:e} exceeds {tolerance:e}")]
    ConstraintViolation { violation: f64, tolerance: f64 },

    #[error("frame is not elliptic: singular value {singular_value:e} of the frame matrix is below {tolerance:e}")]
    Ellipticity { singular_value: f64, tolerance: f64 },

    #[error("retraction failed at distance {distance:e} from the manifold; {hint}")]
    Retraction { distance: f64, hint: &'static str },

    #[error("field index {index} out of range for {n} frame fields")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("time grid mismatch: expected {expected} steps, found {found}")]
    GridMismatch { expected: usize, found: usize },

    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    #[error("invalid flow parameters: {0}")]
    InvalidFlow(String),

    #[error("finite-difference configuration: {0}")]
    FiniteDifference(String),

    #[error(
        "frame metric differs from the induced metric by {discrepancy:e} (tolerance {tolerance:e})"
    )]
    FrameMetric { discrepancy: f64, tolerance: f64 },

    #[error("need at least {required} samples, got {got}")]
    TooFewSamples { required: usize, got: usize },
}
