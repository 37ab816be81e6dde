use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the pose estimation library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("point cloud is empty")]
    EmptyCloud,

    #[error("candidate cloud is empty")]
    EmptyCandidate,

    #[error("mesh has no usable triangles")]
    EmptyMesh,

    #[error("no valid pixels carry class {0}")]
    EmptySegment(u8),

    #[error("viewpoint {0} sees no model points")]
    EmptyCrop(usize),

    #[error("degenerate point configuration: {0}")]
    Degenerate(&'static str),

    #[error("no correspondences within {max_distance} m")]
    NoCorrespondences { max_distance: f64 },

    #[error("dimension mismatch: expected {expected:?}, got {actual:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },

    #[error("mesh bounding box spans {extent:.3} m, larger than 10 m (wrong units?)")]
    UnitSanity { extent: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image error in {path}: {message}")]
    Image { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn parse(context: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            context: context.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
