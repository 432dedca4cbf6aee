//! Multilingual in-context learning evaluation.
//!
//! The pipeline runs corpus loading ([`corpus`]), seeded demonstration
//! sampling ([`sampling`]), chat prompt assembly ([`prompt`]), model calls
//! with a resumable log ([`inference`]), exact-match scoring ([`scoring`]),
//! paired significance tests ([`stats`]) and neuron overlap analysis
//! ([`neuron`]).

pub mod corpus;
pub mod decimal;
pub mod inference;
pub mod neuron;
pub mod prompt;
pub mod sampling;
pub mod scoring;
pub mod stats;
pub mod table;
