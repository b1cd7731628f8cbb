use serde::{Deserialize, Serialize};

use crate::analytic::{ChannelGeometry, EnzymeFieldParams, ImpulseRelease};
use crate::error::{Error, Result};
use crate::physics::{
    DerivedStepParameters, PhysicalEnvironment, ReactionRates, SpeciesKind, SpeciesSpec,
};
use crate::vec3::Vec3;

/// Axis-aligned box confining enzymes and intermediates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnzymeBox {
    pub min: Vec3,
    pub max: Vec3,
}

impl EnzymeBox {
    /// Cube of the given side centered at the origin.
    pub fn centered_cube(side: f64) -> Self {
        let h = 0.5 * side;
        EnzymeBox {
            min: [-h; 3],
            max: [h; 3],
        }
    }

    pub fn volume(&self) -> f64 {
        (0..3).map(|d| self.max[d] - self.min[d]).product()
    }

    pub fn side(&self, axis: usize) -> f64 {
        self.max[axis] - self.min[axis]
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|d| p[d] >= self.min[d] && p[d] <= self.max[d])
    }

    pub fn contains_sphere(&self, center: &Vec3, radius: f64) -> bool {
        (0..3).all(|d| center[d] - radius >= self.min[d] && center[d] + radius <= self.max[d])
    }

    /// Mirror `p` across violated faces until it lies inside.
    #[inline]
    pub fn reflect(&self, p: &mut Vec3) {
        for ((x, &lo), &hi) in p.iter_mut().zip(&self.min).zip(&self.max) {
            while *x < lo || *x > hi {
                if *x > hi {
                    *x = 2.0 * hi - *x;
                }
                if *x < lo {
                    *x = 2.0 * lo - *x;
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmissionMode {
    /// Cubic lattice with pitch 2 R_A, filled outward from the emitter.
    PackedSphere,
    /// Every molecule exactly at the emitter.
    Point,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduledBit {
    /// Seconds.
    pub time: f64,
    pub bit: u8,
}

/// On-off keyed emitter at the origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmitterSpec {
    pub molecule_count: u32,
    pub mode: EmissionMode,
    pub schedule: Vec<ScheduledBit>,
    /// T_B, seconds.
    pub bit_interval: f64,
}

impl EmitterSpec {
    pub fn single_impulse(molecule_count: u32, mode: EmissionMode, bit_interval: f64) -> Self {
        EmitterSpec {
            molecule_count,
            mode,
            schedule: vec![ScheduledBit { time: 0.0, bit: 1 }],
            bit_interval,
        }
    }

    /// Impulses at `start + k T_B` for every 1 in `bits`.
    pub fn on_off_keyed(
        molecule_count: u32,
        mode: EmissionMode,
        bit_interval: f64,
        bits: &[u8],
    ) -> Self {
        EmitterSpec {
            molecule_count,
            mode,
            schedule: bits
                .iter()
                .enumerate()
                .map(|(k, &bit)| ScheduledBit {
                    time: k as f64 * bit_interval,
                    bit,
                })
                .collect(),
            bit_interval,
        }
    }
}

/// Full physical and numerical description of one simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub env: PhysicalEnvironment,
    /// Indexed A, E, EA.
    pub species: [SpeciesSpec; 3],
    pub rates: ReactionRates,
    /// Seconds.
    pub dt: f64,
    pub enzyme_count: u32,
    pub enzyme_box: EnzymeBox,
    pub emitter: EmitterSpec,
    pub receivers: Vec<ChannelGeometry>,
    /// Seconds.
    pub duration: f64,
    pub seed: u64,
}

const GRID_TOLERANCE: f64 = 1e-9;

/// `value / dt` when it is within rounding of a non-negative integer.
pub(crate) fn grid_steps(value: f64, dt: f64) -> Option<u64> {
    let ratio = value / dt;
    let rounded = ratio.round();
    (rounded >= 0.0 && (ratio - rounded).abs() <= GRID_TOLERANCE * rounded.max(1.0))
        .then_some(rounded as u64)
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        for (spec, kind) in self.species.iter().zip(SpeciesKind::ALL) {
            if spec.kind != kind {
                return Err(Error::config(
                    "species",
                    "species must be listed in the order A, E, EA",
                ));
            }
            if !(spec.radius > 0.0 && spec.radius.is_finite()) {
                return Err(Error::config(
                    format!("species.{}.radius", kind.name()),
                    "must be > 0",
                ));
            }
        }
        self.rates.validate()?;
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::config("dt", "must be > 0"));
        }
        match grid_steps(self.duration, self.dt) {
            Some(n) if n >= 1 => {}
            _ => {
                return Err(Error::config(
                    "duration",
                    "must be a positive multiple of dt",
                ))
            }
        }
        for d in 0..3 {
            let width = self.enzyme_box.max[d] - self.enzyme_box.min[d];
            if !(width > 0.0 && width.is_finite()) {
                return Err(Error::config(
                    "enzyme_box",
                    "max must exceed min on every axis",
                ));
            }
        }
        if !self.enzyme_box.contains(&[0.0; 3]) {
            return Err(Error::config(
                "enzyme_box",
                "must contain the emitter at the origin",
            ));
        }
        if self.emitter.molecule_count == 0 {
            return Err(Error::config("emitter.molecule_count", "must be > 0"));
        }
        if !(self.emitter.bit_interval > 0.0 && self.emitter.bit_interval.is_finite()) {
            return Err(Error::config("emitter.bit_interval", "must be > 0"));
        }
        for (i, slot) in self.emitter.schedule.iter().enumerate() {
            if slot.bit > 1 {
                return Err(Error::config(
                    format!("emitter.schedule[{i}].bit"),
                    "must be 0 or 1",
                ));
            }
            if grid_steps(slot.time, self.dt).is_none() {
                return Err(Error::config(
                    format!("emitter.schedule[{i}].time"),
                    "must be a non-negative multiple of dt",
                ));
            }
        }
        if self.receivers.is_empty() {
            return Err(Error::config(
                "receivers",
                "at least one receiver is required",
            ));
        }
        for (i, rx) in self.receivers.iter().enumerate() {
            rx.validate()
                .map_err(|e| Error::config(format!("receivers[{i}]"), e.to_string()))?;
            if !self
                .enzyme_box
                .contains_sphere(&rx.receiver_center, rx.receiver_radius)
            {
                return Err(Error::config(
                    format!("receivers[{i}]"),
                    "receiver sphere must lie inside the enzyme box",
                ));
            }
        }
        Ok(())
    }

    pub fn derived(&self) -> Result<DerivedStepParameters> {
        DerivedStepParameters::compute(&self.env, &self.species, &self.rates, self.dt)
    }

    /// Number of observation steps.
    pub fn steps(&self) -> usize {
        grid_steps(self.duration, self.dt).unwrap_or(0) as usize
    }

    pub fn enzyme_concentration(&self) -> f64 {
        self.enzyme_count as f64 / self.enzyme_box.volume()
    }

    pub fn enzyme_field(&self) -> EnzymeFieldParams {
        EnzymeFieldParams::from_total(self.enzyme_concentration())
    }

    pub fn release(&self) -> Result<ImpulseRelease> {
        Ok(ImpulseRelease {
            molecules: self.emitter.molecule_count as f64,
            diffusion: self.species[0].diffusion_coefficient(&self.env)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reflect_single_and_repeated() {
        let b = EnzymeBox::centered_cube(1.0);
        let mut p = [0.51, 0.0, -0.2];
        b.reflect(&mut p);
        assert!((p[0] - 0.49).abs() < 1e-12);
        assert_eq!(p[2], -0.2);
        let mut far = [2.7, -1.6, 0.0];
        b.reflect(&mut far);
        assert!(b.contains(&far));
        assert!((far[0] - 0.3).abs() < 1e-12, "{far:?}");
        assert!((far[1] - 0.4).abs() < 1e-12, "{far:?}");
    }

    #[test]
    fn grid_steps_tolerates_rounding() {
        assert_eq!(grid_steps(100e-6, 0.5e-6), Some(200));
        assert_eq!(grid_steps(0.0, 0.5e-6), Some(0));
        assert_eq!(grid_steps(0.3e-6, 0.5e-6), None);
        assert_eq!(grid_steps(-1e-6, 0.5e-6), None);
    }

    #[test]
    fn on_off_schedule() {
        let e = EmitterSpec::on_off_keyed(10, EmissionMode::Point, 2e-6, &[1, 0, 1]);
        let times: Vec<f64> = e.schedule.iter().map(|s| s.time).collect();
        assert_eq!(times, vec![0.0, 2e-6, 4e-6]);
    }
}
