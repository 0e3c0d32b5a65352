use thiserror::Error;

/// Errors raised by the VoI toolkit.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum VoiError {
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("time sequence is not strictly increasing at index {index}")]
    NonMonotoneTimes { index: usize },

    #[error("timestamps at index {index} are closer than {min_gap:e} time units")]
    DuplicateTimestamps { index: usize, min_gap: f64 },

    #[error("matrix is not positive definite: leading minor of order {minor} is not positive")]
    NotPositiveDefinite { minor: usize },

    #[error("no update has been received by time {t}")]
    NoUpdateReceived { t: f64 },

    #[error("window of {requested} updates requested but only {available} received")]
    InsufficientUpdates { requested: usize, available: usize },

    #[error("value {value} lies outside the support (0, {upper})")]
    OutsideSupport { value: f64, upper: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("need more than {required} samples, got {got}")]
    InsufficientSamples { required: usize, got: usize },

    #[error("sample covariance is rank deficient (leading minor {minor})")]
    RankDeficient { minor: usize },

    #[error("truncated series is undefined here: log argument {argument} is not positive")]
    ApproximationBreakdown { argument: f64 },

    #[error("unstable queue: arrival rate {lambda} must be below service rate {mu}")]
    UnstableQueue { lambda: f64, mu: f64 },

    #[error("degenerate input: {0}")]
    Degenerate(&'static str),
}

pub type Result<T> = std::result::Result<T, VoiError>;

pub(crate) fn require_positive(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(VoiError::InvalidParameter {
            name,
            value,
            reason: "must be finite and > 0",
        })
    }
}

pub(crate) fn require_nonnegative(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() && value >= 0.0 {
        Ok(value)
    } else {
        Err(VoiError::InvalidParameter {
            name,
            value,
            reason: "must be finite and >= 0",
        })
    }
}

pub(crate) fn require_finite(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(VoiError::InvalidParameter {
            name,
            value,
            reason: "must be finite",
        })
    }
}
