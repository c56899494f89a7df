use thiserror::Error;

/// Errors raised across the motion-primitive pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("state too close to the latent origin (radius {radius:e})")]
    DegenerateOrigin { radius: f64 },

    #[error("singular Jacobian")]
    SingularJacobian,

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("{0} must not be empty")]
    Empty(&'static str),

    #[error("periodic subset is empty")]
    EmptyPeriodicSubset,

    #[error("conditioning interpolation needs at least two distinct conditionings, found {0}")]
    TooFewConditionings(usize),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("timestamps not strictly increasing at row {index}")]
    NonMonotoneTimestamps { index: usize },

    #[error("coordinate {coordinate} has zero range")]
    ZeroRange { coordinate: usize },

    #[error("invalid Savitzky-Golay window {window} for order {order} and length {len}")]
    InvalidWindow { window: usize, order: usize, len: usize },

    #[error("unknown oracle kind `{0}`")]
    UnknownOracle(String),

    #[error("non-finite loss at epoch {epoch}")]
    TrainingDiverged { epoch: usize },

    #[error("unsupported file format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
