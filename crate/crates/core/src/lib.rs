//! Particle-based simulation of molecular communication with enzyme-assisted
//! degradation, with closed-form reference curves and a Monte Carlo harness.

pub mod analytic;
pub mod engine;
pub mod error;
pub mod harness;
pub mod io;
pub mod physics;
pub mod vec3;

pub use error::{Error, Result};
pub use io::presets;
