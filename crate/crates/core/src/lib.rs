//! Simulation and diagnostics for max-stable random fields on the sphere and
//! the function-valued Markov chain they drive.

pub mod chain;
pub mod ergodicity;
pub mod error;
pub mod geometry;
pub mod io;
pub mod report;
pub mod rng;
pub mod special;
pub mod spectral;
mod stats;
pub mod validation;

pub use error::{Error, Result};
