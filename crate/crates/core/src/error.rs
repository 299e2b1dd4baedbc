use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid Lie algebra: {0}")]
    InvalidAlgebra(String),

    #[error("algebra is not nilpotent: upper central series stalls at dimension {stalled_at} of {dim}")]
    NotNilpotent { stalled_at: usize, dim: usize },

    #[error("algebra is not 2-step nilpotent (max |[x,[y,z]]| = {residual:e})")]
    NotTwoStep { residual: f64 },

    #[error("dimension condition fails: {0}")]
    ConditionFails(String),

    #[error("vectors are linearly dependent and do not span a plane")]
    DegenerateSpan,

    #[error("geodesic did not leave the ball of radius {radius} within horizon {horizon}")]
    HorizonExceeded { radius: f64, horizon: f64 },

    #[error("point lies on the axis r = 0 where cylindrical coordinates degenerate")]
    AxisDegenerate,

    #[error("geodesic is not escaping relative to the support ball on its domain")]
    NonEscaping,

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("sequence is not nested at index {0}")]
    NotNested(usize),

    #[error("integration failed: {0}")]
    Integration(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
