//! Hypothesis management on top of a U-relational probabilistic database.
//!
//! Models are parsed into [`model::HypothesisModel`]s, their functional
//! dependencies drive the relation schemes ([`fd`]), simulation trials are
//! loaded and split into independent uncertainty factors ([`ingest`]), and
//! [`pipeline::build`] synthesizes the U-relations over a world table
//! ([`worldset`]). [`analytics`] ranks and conditions the predictions.

pub mod algebra;
pub mod analytics;
pub mod fd;
pub mod ingest;
pub mod model;
pub mod pipeline;
pub mod relation;
pub mod worldset;

#[cfg(test)]
mod testutil;

pub use analytics::{Observation, RankedPrediction};
pub use pipeline::{build, Engine, Project};
