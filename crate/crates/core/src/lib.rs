//! Semigroup interval queries on cube-free median graphs.

pub mod error;
pub mod forest;
pub mod generator;
pub mod graph;
pub mod oracle;
pub mod persist;
pub mod semigroup;
pub mod bench;
pub mod engine;
pub mod staircase;

pub use engine::{BuildOptions, BuildStats, IntervalIndex};
pub use error::{Error, Result};
pub use graph::{Graph, VertexSet, NONE};
pub use semigroup::{PayloadValue, Semigroup, SemigroupKind, SemigroupSpec};
