//! Physical constants and the conversion from a physical description of the
//! medium and molecules into per-step simulation parameters.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Boltzmann constant, J/K (CODATA exact value).
pub const BOLTZMANN: f64 = 1.380649e-23;

/// Default lower limit on `r_rms / r_B` for the long-time-step binding model.
pub const DEFAULT_MIN_REGIME_RATIO: f64 = 5.0;

/// Temperature and viscosity of the propagation medium.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalEnvironment {
    /// Kelvin.
    pub temperature: f64,
    /// kg m^-1 s^-1.
    pub viscosity: f64,
}

impl PhysicalEnvironment {
    /// Water at 25 °C.
    pub const WATER_25C: PhysicalEnvironment = PhysicalEnvironment {
        temperature: 298.15,
        viscosity: 1.0e-3,
    };

    pub fn validate(&self) -> Result<()> {
        positive("temperature", self.temperature)?;
        positive("viscosity", self.viscosity)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SpeciesKind {
    /// Information molecule.
    A,
    /// Enzyme.
    E,
    /// Enzyme-substrate intermediate.
    EA,
}

impl SpeciesKind {
    pub const ALL: [SpeciesKind; 3] = [SpeciesKind::A, SpeciesKind::E, SpeciesKind::EA];

    pub fn name(self) -> &'static str {
        match self {
            SpeciesKind::A => "A",
            SpeciesKind::E => "E",
            SpeciesKind::EA => "EA",
        }
    }
}

/// A spherical molecular species. The diffusion coefficient is either given
/// explicitly or derived from the radius with the Einstein relation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeciesSpec {
    pub kind: SpeciesKind,
    /// Meters.
    pub radius: f64,
    /// m^2/s. `None` means "derive from radius".
    pub diffusion_override: Option<f64>,
}

impl SpeciesSpec {
    pub fn new(kind: SpeciesKind, radius: f64) -> Self {
        SpeciesSpec {
            kind,
            radius,
            diffusion_override: None,
        }
    }

    pub fn with_diffusion(mut self, diffusion: f64) -> Self {
        self.diffusion_override = Some(diffusion);
        self
    }

    pub fn diffusion_coefficient(&self, env: &PhysicalEnvironment) -> Result<f64> {
        match self.diffusion_override {
            Some(d) => {
                positive(diffusion_field(self.kind), d)?;
                Ok(d)
            }
            None => einstein_diffusion(self.radius, env),
        }
    }
}

fn diffusion_field(kind: SpeciesKind) -> &'static str {
    match kind {
        SpeciesKind::A => "diffusion coefficient of A",
        SpeciesKind::E => "diffusion coefficient of E",
        SpeciesKind::EA => "diffusion coefficient of EA",
    }
}

/// Michaelis-Menten rate constants.
///
/// `k2 = f64::INFINITY` is the limiting case of instantaneous degradation on
/// binding; it is only produced by the limiting-case experiment mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReactionRates {
    /// Binding, molecule^-1 m^3 s^-1.
    pub k1: f64,
    /// Unbinding, s^-1.
    pub k_minus1: f64,
    /// Degradation, s^-1.
    pub k2: f64,
}

impl ReactionRates {
    pub fn validate(&self) -> Result<()> {
        non_negative_finite("k1", self.k1)?;
        non_negative_finite("k_minus1", self.k_minus1)?;
        if self.k2.is_nan() || self.k2 < 0.0 {
            return Err(Error::invalid("k2", "must be >= 0"));
        }
        Ok(())
    }

    pub fn instant_degradation(&self) -> bool {
        self.k2.is_infinite()
    }
}

/// `k_B T / (6 π η R)`.
pub fn einstein_diffusion(radius: f64, env: &PhysicalEnvironment) -> Result<f64> {
    positive("radius", radius)?;
    env.validate()?;
    Ok(BOLTZMANN * env.temperature / (6.0 * PI * env.viscosity * radius))
}

/// Root-mean-square relative step length of an A-E pair over one time step.
pub fn rms_step(d_a: f64, d_e: f64, dt: f64) -> Result<f64> {
    positive("D_A", d_a)?;
    positive("D_E", d_e)?;
    non_negative_finite("dt", dt)?;
    Ok((2.0 * (d_a + d_e) * dt).sqrt())
}

/// Binding radius in the long-time-step limit.
pub fn binding_radius(k1: f64, dt: f64) -> Result<f64> {
    positive("k1", k1)?;
    positive("dt", dt)?;
    Ok((3.0 * k1 * dt / (4.0 * PI)).cbrt())
}

/// Per-step probabilities that an intermediate unbinds or degrades.
///
/// Both rates zero gives `(0, 0)`. The returned pair always sums to
/// `1 - exp(-dt (k_minus1 + k2))`.
pub fn unimolecular_probabilities(k_minus1: f64, k2: f64, dt: f64) -> Result<(f64, f64)> {
    non_negative_finite("k_minus1", k_minus1)?;
    non_negative_finite("k2", k2)?;
    positive("dt", dt)?;
    let total = k_minus1 + k2;
    if total == 0.0 {
        return Ok((0.0, 0.0));
    }
    // -expm1 keeps precision when dt * total is small.
    let react = -(-dt * total).exp_m1();
    Ok((k_minus1 / total * react, k2 / total * react))
}

/// Everything the engine needs per time step, computed once from a config.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedStepParameters {
    pub dt: f64,
    /// Diffusion coefficients, m^2/s, indexed A, E, EA.
    pub diffusion: [f64; 3],
    /// Per-dimension displacement standard deviation sqrt(2 D dt), indexed A, E, EA.
    pub sigma: [f64; 3],
    pub r_rms: f64,
    pub r_b: f64,
    pub p_unbind: f64,
    pub p_degrade: f64,
    /// Binding immediately degrades A and releases E (k2 = inf, k_minus1 = 0).
    pub instant_degradation: bool,
}

impl DerivedStepParameters {
    pub fn compute(
        env: &PhysicalEnvironment,
        species: &[SpeciesSpec; 3],
        rates: &ReactionRates,
        dt: f64,
    ) -> Result<Self> {
        env.validate()?;
        rates.validate()?;
        positive("dt", dt)?;
        let mut diffusion = [0.0; 3];
        for (slot, kind) in diffusion.iter_mut().zip(SpeciesKind::ALL) {
            let spec = species.iter().find(|s| s.kind == kind).ok_or_else(|| {
                Error::invalid("species", format!("missing species {}", kind.name()))
            })?;
            *slot = spec.diffusion_coefficient(env)?;
        }
        let sigma = diffusion.map(|d| (2.0 * d * dt).sqrt());
        let r_rms = rms_step(diffusion[0], diffusion[1], dt)?;
        let r_b = binding_radius(rates.k1, dt)?;
        let instant_degradation = rates.instant_degradation();
        let (p_unbind, p_degrade) = if instant_degradation {
            (0.0, 1.0)
        } else {
            unimolecular_probabilities(rates.k_minus1, rates.k2, dt)?
        };
        Ok(DerivedStepParameters {
            dt,
            diffusion,
            sigma,
            r_rms,
            r_b,
            p_unbind,
            p_degrade,
            instant_degradation,
        })
    }

    pub fn sigma_of(&self, kind: SpeciesKind) -> f64 {
        self.sigma[kind as usize]
    }

    pub fn diffusion_of(&self, kind: SpeciesKind) -> f64 {
        self.diffusion[kind as usize]
    }
}

/// Outcome of the `r_rms >> r_B` check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub ratio: f64,
    pub min_ratio: f64,
    pub valid: bool,
}

impl RegimeReport {
    pub fn warning(&self) -> Option<String> {
        (!self.valid).then(|| {
            format!(
                "r_rms/r_B = {:.3} is below {:.3}; the long-time-step binding radius is not reliable for this config",
                self.ratio, self.min_ratio
            )
        })
    }
}

pub fn validate_long_step_regime(params: &DerivedStepParameters, min_ratio: f64) -> RegimeReport {
    let ratio = params.r_rms / params.r_b;
    RegimeReport {
        ratio,
        min_ratio,
        valid: ratio >= min_ratio,
    }
}

fn positive(name: &str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(
            name,
            format!("must be a finite value > 0, got {value}"),
        ))
    }
}

fn non_negative_finite(name: &str, value: f64) -> Result<()> {
    if value >= 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(
            name,
            format!("must be a finite value >= 0, got {value}"),
        ))
    }
}
