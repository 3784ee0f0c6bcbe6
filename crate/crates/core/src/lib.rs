//! Line-level attribution of code changes to chat conversations, and
//! survival analysis of the attributed lines.
//!
//! The library is split by concern: [`similarity`] scores strings,
//! [`ingest`] reads the dataset, [`gitbridge`] queries repositories,
//! [`alignment`] labels changed lines, [`survival`] and [`stats`] do the
//! numbers and [`pipeline`] wires the stages together.

pub mod alignment;
pub mod gitbridge;
pub mod ingest;
pub mod pipeline;
pub mod similarity;
pub mod stats;
pub mod survival;

pub use similarity::{ratio, ratio_upper_bound, SimilarityScore};
