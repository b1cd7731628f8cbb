use rand_xoshiro::Xoshiro256PlusPlus;

use crate::vec3::Vec3;

/// Positions of every mobile molecule at one instant.
#[derive(Debug, Clone)]
pub struct ParticleState {
    pub free_a: Vec<Vec3>,
    pub free_e: Vec<Vec3>,
    pub bound_ea: Vec<Vec3>,
    /// Cumulative degraded A (A_P). These are inert and not tracked spatially.
    pub degraded_count: u64,
    /// Cumulative A released by the emitter.
    pub emitted_count: u64,
    /// Completed steps; simulated time is `step * dt`.
    pub step: u64,
    pub time: f64,
    pub(crate) rng: Xoshiro256PlusPlus,
}

impl ParticleState {
    pub fn rng_mut(&mut self) -> &mut Xoshiro256PlusPlus {
        &mut self.rng
    }

    pub fn enzyme_total(&self) -> usize {
        self.free_e.len() + self.bound_ea.len()
    }

    /// Free + bound + degraded; equals `emitted_count` when A mass is conserved.
    pub fn a_total(&self) -> u64 {
        (self.free_a.len() + self.bound_ea.len()) as u64 + self.degraded_count
    }
}
