//! Library half of the `prge` binary: experiment configuration, the cached
//! pipeline, and comparison tables. Kept as a lib so integration tests can
//! drive pipelines in-process.

pub mod compare;
pub mod config;
pub mod digest;
pub mod pipeline;
