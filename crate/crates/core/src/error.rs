use thiserror::Error;

/// Errors raised by the experiment modules.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("exact mode requires an even integer exponent, got p = {0}")]
    OddExponent(f64),

    #[error("exact grid too large: {points} points (~{bytes} bytes) exceeds the configured cap of {cap_bytes} bytes")]
    GridTooLarge { points: u128, bytes: u128, cap_bytes: u64 },

    #[error("Monte-Carlo needs at least 100 samples, got {0}")]
    TooFewSamples(usize),

    #[error("non-positive moment {value} at N = {n}")]
    NonPositiveMoment { n: u64, value: f64 },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("size cap exceeded: {0}")]
    SizeCap(String),

    #[error("regime violation: {0}")]
    Regime(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
