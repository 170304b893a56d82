//! Greenhouse-control simulator and the controllers benchmarked on it.

pub mod agents;
pub mod env;
pub mod numerics;
pub mod error;
pub mod harness;

pub use error::{Error, Result};
