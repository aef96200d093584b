use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid curve: {0}")]
    InvalidCurve(String),

    #[error("invalid discretization: {0}")]
    InvalidDiscretization(String),

    #[error("invalid perturbation: {0}")]
    InvalidPerturbation(String),

    #[error("coincident points: target {target} and source {src}")]
    CoincidentPoints { target: usize, src: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid tolerance {0}: must lie in (0, 1)")]
    InvalidTolerance(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("singular block at tree node {node}")]
    SingularBlock { node: usize },

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("problem too large for dense path: {n} unknowns exceeds cap {cap}")]
    TooLarge { n: usize, cap: usize },

    #[error("factors do not belong to this geometry: {0}")]
    GeometryMismatch(String),

    #[error("accuracy violation: {0}")]
    Accuracy(String),

    #[error("config error at {path}:{line}: {message}")]
    Config {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("malformed data: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
