use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the synchronization pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is singular or rank-deficient (smallest/largest singular value ratio {0:e})")]
    SingularInput(f64),

    #[error("{path}:{line}: {reason}")]
    Parse {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),

    #[error("bad vertex id {id} (vertex count {n})")]
    BadVertexId { id: usize, n: usize },

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("view graph is disconnected")]
    Disconnected,

    #[error("graph has no triplet loops to score")]
    EmptyGraph,

    #[error("invalid factorization depth {0}: must be even and at least 2")]
    InvalidDepth(usize),

    #[error("degenerate solution: {0}")]
    DegenerateSolution(String),

    #[error("orientation block {0} is singular")]
    SingularBlock(usize),

    #[error("eigensolver did not converge within {0} iterations")]
    NoConvergence(usize),

    #[error("every depth candidate failed: {0}")]
    AllCandidatesFailed(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
