use thiserror::Error;

use crate::grid::Cell;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("world generation failed after {attempts} attempts: {reason}")]
    Generation { attempts: usize, reason: String },

    #[error("invalid pose {0:?}: not a free cell inside the world")]
    InvalidPose(Cell),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("cvar of an empty sample set")]
    EmptySamples,

    #[error("policy references edge {0} which is not in the graph")]
    DanglingEdge(usize),

    #[error("path length mismatch: reference has {reference} waypoints, executed has {executed}")]
    LengthMismatch { reference: usize, executed: usize },

    #[error("no candidate policy available")]
    NoPolicy,

    #[error("unsupported {what} version {found} (expected {expected})")]
    Version {
        what: &'static str,
        found: u32,
        expected: u32,
    },

    #[error("malformed {what}: {reason}")]
    Malformed { what: &'static str, reason: String },

    #[error("invalid config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
