use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error(transparent)]
    Core(#[from] mfgkit_core::Error),
    #[error("kernel invalid at an encountered empirical measure (t={t}): {message}")]
    KernelProbeFailure { t: f64, message: String },
    #[error("{needed} replications required, got {got}")]
    InsufficientReplications { got: usize, needed: usize },
    #[error("particle position {value} blew up at t={t}")]
    NumericalBlowup { t: f64, value: f64 },
    #[error("invalid step: {0}")]
    StepInvalid(String),
    #[error("distribution difference is not integrable: {0}")]
    NonIntegrable(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T, E = SimError> = std::result::Result<T, E>;
