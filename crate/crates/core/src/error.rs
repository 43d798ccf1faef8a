use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid sparse feature vector: {0}")]
    InvalidSparse(String),

    #[error("non-finite scalar {0} passed to a vector update")]
    NonFiniteScalar(f64),

    #[error("replacing traces need binary features: feature {index} has value {value}")]
    NonBinaryFeature { index: usize, value: f64 },

    #[error("learner has diverged; reset it before stepping again")]
    Diverged,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid MRP: {0}")]
    InvalidMrp(String),

    #[error("state {state} out of range for {k} states")]
    StateOutOfRange { state: usize, k: usize },

    #[error("cannot sample a transition from a terminal state")]
    TerminalState,

    #[error("linear system is singular: {0}")]
    Singular(String),

    #[error("signal value {value} on channel {channel} is outside [0, 1]")]
    SignalOutOfRange { channel: usize, value: f64 },

    #[error("signal data: {0}")]
    Signal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
