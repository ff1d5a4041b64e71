use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("sample rate mismatch: signal at {signal} Hz, stack expects {expected} Hz")]
    RateMismatch { signal: u32, expected: u32 },

    #[error("backward called on node {0} which was never recorded")]
    NotRecorded(usize),

    #[error("node {0} is not a scalar")]
    NotScalar(usize),

    #[error("training diverged at step {step}: loss is {loss}")]
    Diverged { step: usize, loss: f64 },

    #[error("stacks differ beyond bias and first-layer activation: {0}")]
    StackMismatch(String),

    #[error("wav: {0}")]
    Wav(#[from] hound::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
