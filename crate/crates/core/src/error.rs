use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the library can report.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("destination points {first} and {second} are {distance:e} apart (minimum 1e-8)")]
    DuplicatePoints {
        first: usize,
        second: usize,
        distance: f64,
    },

    #[error("destination points are collinear; the affine part of the spline is undetermined")]
    Collinear,

    #[error("spline system is numerically singular (condition estimate {condition:e})")]
    Singular { condition: f64 },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid parameters: {0}")]
    Parameter(String),

    #[error("label {label} out of range for {m} identities")]
    LabelOutOfRange { label: usize, m: usize },

    #[error("degenerate configuration: {0}")]
    Degenerate(String),

    #[error("optimization diverged after {} iterations", trajectory.len())]
    Divergence { trajectory: Vec<f64> },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image codec: {0}")]
    Codec(String),

    #[error("malformed input: {0}")]
    Format(String),
}
