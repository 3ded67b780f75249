use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    #[error("edge {parent} -> {child} has zero length")]
    ZeroLengthEdge { parent: usize, child: usize },

    #[error("insufficient triangles for fit: found {found}, need {required}")]
    InsufficientTriangles { found: usize, required: usize },

    #[error("degenerate fit: weighted normal vanishes")]
    DegenerateFit,

    #[error("mesh is empty")]
    EmptyMesh,

    #[error("too few points: have {have}, need {need}")]
    TooFewPoints { have: usize, need: usize },

    #[error("point cloud has no normals")]
    MissingNormals,

    #[error("point cloud is empty")]
    EmptyCloud,

    #[error("point set is empty")]
    EmptySet,

    #[error("malformed header: {0}")]
    MalformedHeader(String),

    #[error("truncated payload: expected {expected} vertices, found {found}")]
    TruncatedPayload { expected: usize, found: usize },

    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn file(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::File {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn stage(stage: &str, source: Error) -> Self {
        Error::Stage {
            stage: stage.to_string(),
            source: Box::new(source),
        }
    }
}
