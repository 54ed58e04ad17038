use std::path::PathBuf;

use thiserror::Error;

use crate::io::config::ConfigError;
use crate::verification::CheckReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("divergent integral: exponent r = {r} must exceed {limit}")]
    DivergentIntegral { r: f64, limit: f64 },

    #[error("invalid mesh: {0}")]
    Mesh(String),

    #[error("length mismatch: expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("fields live on different meshes")]
    MeshMismatch,

    #[error("brute-force oracle refuses {cells} cells (limit {limit})")]
    OracleTooLarge { cells: usize, limit: usize },

    #[error(
        "numerical instability at t = {t}: cell {cell} (z = {z}) reached {value}; \
         retry with a smaller time step"
    )]
    Instability {
        t: f64,
        cell: usize,
        z: f64,
        value: f64,
    },

    #[error("step size underflow at t = {t} (dt = {dt}); the system is too stiff for the explicit integrator")]
    StepUnderflow { t: f64, dt: f64 },

    #[error("constraint violated: {0}")]
    Constraint(String),

    #[error(transparent)]
    Config(#[from] ConfigError),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed {what}: {detail}")]
    Parse { what: &'static str, detail: String },

    #[error("check `{}` failed: {}", .0.name, .0.summary())]
    CheckFailed(Box<CheckReport>),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures caused by the time integration itself rather than
    /// by the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Instability { .. } | Error::StepUnderflow { .. }
        )
    }
}
