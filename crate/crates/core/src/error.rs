use std::path::PathBuf;

use thiserror::Error;

/// Everything that can go wrong between generating data and writing a report.
#[derive(Debug, Error)]
pub enum Error {
    #[error("integration left the finite range at step {step}")]
    NonFinite { step: usize },

    #[error("training trajectory left the basin of `{attractor}` ({detail})")]
    BasinEscape { attractor: String, detail: String },

    #[error("reservoir matrix has no eigenvalue with positive real part after {attempts} draws")]
    DegenerateSpectrum { attempts: usize },

    #[error("regularized Gram matrix is numerically singular")]
    SingularSystem,

    #[error("expected {expected} points, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("series is empty")]
    EmptySeries,

    #[error("reference absolute mean of `{component}` is zero")]
    ZeroNormalizer { component: &'static str },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unknown attractor `{0}`")]
    UnknownAttractor(String),

    #[error("unknown scenario `{0}` (expected A or B)")]
    UnknownScenario(String),

    #[error("path {0} escapes the output directory")]
    PathEscape(PathBuf),

    #[error("malformed file: {0}")]
    Format(String),

    #[error("{}: {source}", path.display())]
    File { path: PathBuf, source: Box<Error> },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("config: {0}")]
    Toml(#[from] toml::de::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Attaches `path` to any error raised while handling that file.
pub(crate) fn in_file<T>(path: &std::path::Path, f: impl FnOnce() -> Result<T>) -> Result<T> {
    f().map_err(|e| match e {
        e @ Error::File { .. } => e,
        e => Error::File { path: path.to_path_buf(), source: Box::new(e) },
    })
}
