use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error(
        "vertex {vertex} has zero local scale: its {m}-th nearest neighbor is a duplicate point"
    )]
    ZeroLocalScale { vertex: usize, m: usize },

    #[error("vertex {0} is isolated (degree 0)")]
    IsolatedVertex(usize),

    #[error(
        "eigensolver did not converge within {matvecs} matrix applications (worst residual {worst:.3e})"
    )]
    NoConvergence {
        matvecs: usize,
        worst: f64,
        residuals: Vec<f64>,
    },

    #[error(
        "landmark kernel block is near-singular (numerical rank {rank} < {needed} requested pairs); \
         use a larger sample or a wider kernel"
    )]
    SingularLandmarks { rank: usize, needed: usize },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("{path}: {msg}")]
    Format { path: PathBuf, msg: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
