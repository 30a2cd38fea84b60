use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("index out of range: {0}")]
    Index(String),

    #[error("no positions selected for evaluation")]
    EmptyEvaluation,

    #[error("insufficient data: need at least {needed}, have {have}")]
    InsufficientData { needed: usize, have: usize },

    #[error("trace captured at {have} level, {needed} required")]
    InsufficientCapture {
        needed: &'static str,
        have: &'static str,
    },

    #[error("probe calibration failed: margin {margin:.6} below required {required:.6}")]
    CalibrationFailed { margin: f64, required: f64 },

    #[error("circuit construction failed: measured {what} {measured:.4}, required {required:.4}")]
    ConstructionFailed {
        what: &'static str,
        measured: f64,
        required: f64,
    },

    #[error("training diverged at step {step} (last good checkpoint: {last_good:?})")]
    Divergence { step: usize, last_good: Option<PathBuf> },

    #[error("checkpoint format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
