//! Minimum Bayes risk decoding over sampled pseudo-references, with
//! iterative hypothesis pruning driven by bootstrap confidence estimates.

pub mod chart;
pub mod chrf;
pub mod config;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod mbr;
pub mod report;
pub mod rng;
pub mod stats;
pub mod utility;

pub use error::{MbrError, Result};
