use thiserror::Error;

/// Errors raised by the simulator library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite angle {0}")]
    NonFiniteAngle(f64),

    #[error("distance must be positive, got {0} m")]
    NonPositiveDistance(f64),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid arm {arm} (num_arms = {num_arms})")]
    InvalidArm { arm: usize, num_arms: usize },

    #[error("duplicate arm {0} in stream set")]
    DuplicateArm(usize),

    #[error("reward {0} outside [0, 1]")]
    RewardOutOfRange(f64),

    #[error("gap must be positive, got {0}")]
    NonPositiveGap(f64),

    #[error("timeslot {slot} outside traverse horizon of {horizon} slots")]
    SlotOutOfRange { slot: u64, horizon: u64 },

    #[error("invalid configuration: {field}: {reason}")]
    Config { field: String, reason: String },

    #[error("failed to parse configuration: {0}")]
    ConfigParse(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
