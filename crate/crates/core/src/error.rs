use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A value fell outside the domain an operation accepts.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("pixel ({row}, {col}) = {value} is outside [0, 1]")]
    PixelOutOfRange { row: usize, col: usize, value: f64 },

    #[error("shape mismatch: expected {expected:?}, got {actual:?}")]
    Shape {
        expected: (usize, usize),
        actual: (usize, usize),
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("zero energy: {0}")]
    ZeroEnergy(String),

    #[error("non-finite value encountered at iteration {iteration}")]
    NonFinite { iteration: usize },

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("operator has no adjoint: {0}")]
    Unsupported(String),

    #[error("malformed file {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),
}

impl Error {
    pub(crate) fn shape(expected: (usize, usize), actual: (usize, usize)) -> Self {
        Error::Shape { expected, actual }
    }
}
