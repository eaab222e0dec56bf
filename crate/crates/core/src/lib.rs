//! Phenomenological-noise simulation of lattice-surgery protocols on rotated
//! surface-code patches: check-graph compilation, Pauli-frame sampling, exact
//! matching decoding, logical classification and the Monte Carlo analyses
//! built on top of them.

pub mod checkgraph;
pub mod classify;
pub mod decoder;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod matching;
pub mod noise;
pub mod protocol;

pub use error::{Error, Result};
