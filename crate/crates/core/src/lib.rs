//! Simulation core for a pedestrian-crossing trainer: scene vocabulary,
//! language-model driver agents, the session journal, crossing
//! adjudication, the adaptive director and learning-curve analytics.

// `!(a > b)` is used deliberately so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adjudicator;
pub mod agent_brain;
pub mod analytics;
pub mod director;
pub mod domain;
mod exec;
pub mod memory;

pub use exec::Execution;
