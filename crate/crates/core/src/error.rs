//! Error type shared by every module of the crate.

use thiserror::Error;

/// Errors produced while building problems, applying operators or solving.
#[derive(Debug, Error)]
pub enum HelmError {
    /// Grid dimensions cannot be coarsened to the requested number of levels.
    #[error("hierarchy error: {0}")]
    Hierarchy(String),

    /// Invalid velocity model (non-positive or non-finite velocity, bad geometry).
    #[error("model error: {0}")]
    Model(String),

    /// A field does not match the level or grid it is applied on.
    #[error("shape error: expected {expected}, got {got}")]
    Shape { expected: String, got: String },

    /// A transfer or operator was requested for a level that does not exist.
    #[error("level error: {0}")]
    Level(String),

    /// Explicit assembly was requested for a grid above the configured limit.
    #[error("capacity error: {rows} rows exceeds the assembly limit of {limit}")]
    Capacity { rows: usize, limit: usize },

    /// NaN or infinity appeared inside a Krylov basis or a kernel result.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// Bi-CGSTAB broke down. The best iterate found so far is carried along.
    #[error("Bi-CGSTAB breakdown after {iterations} iterations ({reason})")]
    Breakdown {
        reason: &'static str,
        iterations: usize,
        best: Vec<num_complex::Complex64>,
        relres: f64,
    },

    /// A smoothing sweep grew the residual by more than the allowed factor.
    #[error("multigrid smoother diverged on sub-level {sublevel}: residual grew by {growth:.3e}")]
    MgDivergence { sublevel: usize, growth: f64 },

    /// Invalid configuration text or values.
    #[error("config error (line {line}): {msg}")]
    Config { line: usize, msg: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl HelmError {
    pub(crate) fn config(line: usize, msg: impl Into<String>) -> Self {
        HelmError::Config {
            line,
            msg: msg.into(),
        }
    }

    pub(crate) fn shape(expected: impl ToString, got: impl ToString) -> Self {
        HelmError::Shape {
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }
}

pub type Result<T, E = HelmError> = std::result::Result<T, E>;
