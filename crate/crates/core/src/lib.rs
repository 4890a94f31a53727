//! Error detection for noisy knowledge graphs.
//!
//! The crate is organized around one pipeline: inject controlled noise into a
//! triple store ([`noise`]), score every triple's plausibility with a
//! path-ranking classifier ([`pathrank`]), train translation embeddings whose
//! margin loss is weighted by those confidence scores ([`embed`]), and measure
//! how well the resulting energies separate noisy from clean triples
//! ([`eval`]).
//!
//! [`graph`] holds the shared triple-store representation (interned labels,
//! adjacency indexes, split handling, file formats) and [`synth`] generates
//! small structured graphs used by the test suite and for demos.

pub mod embed;
pub mod eval;
pub mod graph;
pub mod noise;
pub mod pathrank;
pub mod synth;

pub use graph::{
    Dictionary, DirectedRelation, Direction, EntityId, KgError, KnowledgeGraph, RelationId, Split,
    Triple,
};
