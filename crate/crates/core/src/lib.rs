//! Reasons for and reasons against knowledge-graph recommendations.
//!
//! - [`graph`]: immutable triple store with forward and inverse adjacency.
//! - [`paths`]: path types and the search for their simple instances.
//! - [`reasons`]: reasons for, and reasons against under schemes S1/S3/S4/S5.
//! - [`embed`]: TransE training, scoring and top-N recommendation.
//! - [`eval`]: coverage/support harness over simulated interactions.

pub mod embed;
pub mod error;
pub mod eval;
pub mod fixtures;
pub mod graph;
pub mod paths;
pub mod reasons;
pub mod synthetic;

pub use error::{Error, Result};
pub use graph::{Direction, EntityId, KnowledgeGraph, RelationId, Triple};
pub use paths::{PathInstance, PathType, ReasonKey, RelationStep};
pub use reasons::{Reason, Scheme};
