use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("config: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("grid too small: clamped mass {clamped:e} exceeds threshold {threshold:e}")]
    GridTooSmall { clamped: f64, threshold: f64 },

    #[error("combined support size {size} exceeds cap {cap}")]
    SupportCap { size: usize, cap: usize },

    #[error("scenario tree with {size} leaves exceeds cap {cap}")]
    TreeCap { size: usize, cap: usize },

    #[error("convexity violated at chord {index} (defect {defect:e})")]
    NotConvex { index: usize, defect: f64 },

    #[error("infeasible ambiguity set: {0}")]
    InfeasibleAmbiguity(String),

    #[error("horizon mismatch: {left} vs {right}")]
    HorizonMismatch { left: usize, right: usize },

    #[error("second moment {moment:e} of {what} exceeds cap {cap:e}")]
    MomentCap { what: String, moment: f64, cap: f64 },

    #[error("transport solver did not terminate after {0} pivots")]
    TransportStalled(usize),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
