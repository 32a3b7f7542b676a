//! Simulation and diagnosis of parallel cyber-physical attacks on
//! linearised (DC) power grids.

pub mod area;
pub mod cases;
pub mod cli;
pub mod diagnosis;
pub mod error;
pub mod evaluation;
pub mod grid;
pub mod model;
pub mod powerflow;
pub mod reconstruction;
pub mod rng;
pub mod simulator;

pub use error::{Error, Result};
pub use model::GridModel;
