use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("immersion failure at u = {u:?}: metric determinant {det:e}")]
    ImmersionFailure { u: Vec<f64>, det: f64 },

    #[error("stencil room: parameter {u:?} needs a margin of {margin} on axis {axis}")]
    StencilRoom { u: Vec<f64>, axis: usize, margin: f64 },

    #[error("curve invariant violated: {0}")]
    CurveInvariant(String),

    #[error("numerical failure at t = {t}: {reason}")]
    NumericalFailure { t: f64, reason: String },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("misaligned snapshot grids: {0}")]
    MisalignedGrids(String),

    #[error("scenario error: {0}")]
    Scenario(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
