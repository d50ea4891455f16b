//! Distributed simulated annealing for wireless link scheduling when the
//! control messages between neighboring links can be lost.

pub mod algorithms;
pub mod analysis;
pub mod error;
pub mod experiment;
pub mod network;
pub mod objective;
pub mod presets;
pub mod queueing;
pub mod scenario;

pub use error::{Error, Result};
