//! Test problems, data generators, file formats and experiment drivers.

pub mod experiments;
pub mod generate;
pub mod io;
pub mod known_minimum;
