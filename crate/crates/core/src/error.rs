use thiserror::Error;

use crate::semigroup::SemigroupKind;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("vertex {vertex} out of range (n = {n})")]
    VertexOutOfRange { vertex: u64, n: usize },

    #[error("graph is empty")]
    EmptyGraph,

    #[error("graph is not connected: vertex {0} unreachable from vertex 0")]
    Disconnected(u32),

    #[error("invalid edge ({0}, {1}): {2}")]
    InvalidEdge(u64, u64, &'static str),

    #[error("payload kind mismatch: {left:?} vs {right:?}")]
    KindMismatch {
        left: SemigroupKind,
        right: SemigroupKind,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("vertex {0} has three or more neighbors one step closer to the reference vertex; graph is not cube-free")]
    NotCubeFree(u32),

    #[error("not a median graph: {0}")]
    NotMedian(String),

    #[error("set is not gated: vertex {0} has no unique gate")]
    NotGated(u32),

    #[error("structural violation: {0}")]
    Structure(String),

    #[error("input rejected by verifier: {0}")]
    Rejected(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("generation failed after {attempts} attempts: {message}")]
    GenerationFailed { attempts: u32, message: String },

    #[error("instance too large for brute-force verification (n = {n} > {limit}); use force")]
    TooLarge { n: usize, limit: usize },

    #[error("index file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn structure(msg: impl Into<String>) -> Error {
    Error::Structure(msg.into())
}
