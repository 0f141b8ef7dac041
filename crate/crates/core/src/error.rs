use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("field is not normalized (norm {norm:.3e}, tolerance {tol:.1e})")]
    NotNormalized { norm: f64, tol: f64 },

    #[error("evaluation failed at ({x}, {y}): {source}")]
    Sampling {
        x: f64,
        y: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("operation unsupported for {potential}: {hint}")]
    Unsupported {
        potential: &'static str,
        hint: &'static str,
    },

    #[error(transparent)]
    Dynamics(#[from] crate::dynamics::DynamicsError),

    #[error(transparent)]
    Shooting(#[from] crate::shooting::ShootError),

    #[error("grid spacing {spacing:.4} on axis {axis} exceeds the Nyquist limit {required:.4}")]
    Nyquist {
        axis: usize,
        spacing: f64,
        required: f64,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("unknown preset `{name}` (available: {available})")]
    UnknownPreset { name: String, available: String },

    #[error("method `{method}` is incompatible with scenario `{scenario}`: {reason}")]
    Incompatible {
        method: String,
        scenario: String,
        reason: String,
    },

    #[error("malformed file {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
