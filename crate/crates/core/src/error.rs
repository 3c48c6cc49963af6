use thiserror::Error;

/// Errors produced by the simulation and detection library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid transfer function: {0}")]
    InvalidTransferFunction(String),

    #[error("transfer function is not proper (numerator degree {num} > denominator degree {den})")]
    NotProper { num: usize, den: usize },

    #[error("sample time must be positive, got {0}")]
    InvalidSampleTime(f64),

    #[error("non-finite input sample")]
    NonFiniteInput,

    #[error("system has a pole at z = 1: infinite DC gain")]
    InfiniteDcGain,

    #[error("invalid controller parameters: {0}")]
    InvalidControllerParams(String),

    #[error("invalid attacker configuration: {0}")]
    InvalidAttackerConfig(String),

    #[error("invalid detector parameters: {0}")]
    InvalidDetectorParams(String),

    #[error("detector threshold has not been calibrated")]
    ThresholdUnset,

    #[error("stealth bound undefined: requires delta > r_norm + sqrt(d)*sigma")]
    BoundUndefined,

    #[error("invalid simulation configuration: {0}")]
    InvalidConfig(String),

    #[error("simulation aborted at sample {0}: output diverged")]
    Unstable(usize),

    #[error("output error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
