//! TOML experiment description. Every quantity is SI and the unit is part of
//! the key name.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analytic::{ChannelGeometry, ModelTag};
use crate::engine::{
    grid_steps, EmissionMode, EmitterSpec, EnzymeBox, ScheduledBit, SimulationConfig,
};
use crate::error::{Error, Result};
use crate::harness::{ExperimentMode, ExperimentSpec};
use crate::physics::{
    validate_long_step_regime, DerivedStepParameters, PhysicalEnvironment, ReactionRates,
    RegimeReport, SpeciesKind, SpeciesSpec, DEFAULT_MIN_REGIME_RATIO,
};
use crate::vec3::Vec3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDocument {
    pub environment: EnvironmentDoc,
    pub species: SpeciesDoc,
    pub rates: RatesDoc,
    pub time: TimeDoc,
    pub enzymes: EnzymesDoc,
    pub emitter: EmitterDoc,
    pub receivers: Vec<ReceiverDoc>,
    pub experiment: ExperimentDoc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentDoc {
    pub temperature_k: f64,
    pub viscosity_pa_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeciesDoc {
    pub a: SpeciesEntry,
    pub e: SpeciesEntry,
    pub ea: SpeciesEntry,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeciesEntry {
    pub radius_m: f64,
    /// Overrides the Einstein relation when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diffusion_m2_per_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatesDoc {
    pub k1_m3_per_s: f64,
    pub k_minus1_per_s: f64,
    pub k2_per_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeDoc {
    pub dt_s: f64,
    pub duration_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnzymesDoc {
    pub count: u32,
    pub box_min_m: Vec3,
    pub box_max_m: Vec3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmitterDoc {
    pub molecule_count: u32,
    pub mode: EmissionMode,
    pub bit_interval_s: f64,
    pub schedule: Vec<ScheduleEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleEntry {
    pub time_s: f64,
    pub bit: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReceiverDoc {
    pub center_m: Vec3,
    pub radius_m: f64,
}

fn default_true() -> bool {
    true
}

fn default_min_ratio() -> f64 {
    DEFAULT_MIN_REGIME_RATIO
}

fn default_refs() -> Vec<ModelTag> {
    vec![ModelTag::DiffusionOnly, ModelTag::EnzymeLowerBound]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentDoc {
    pub mode: ExperimentMode,
    pub trials: u32,
    pub seed: u64,
    #[serde(default = "default_refs")]
    pub analytical_refs: Vec<ModelTag>,
    #[serde(default = "default_true")]
    pub control_arm: bool,
    #[serde(default = "default_min_ratio")]
    pub min_regime_ratio: f64,
    /// 0 lets the worker pool decide.
    #[serde(default)]
    pub workers: usize,
}

/// A validated document with everything computed from it.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub document: ConfigDocument,
    pub spec: ExperimentSpec,
    pub derived: DerivedStepParameters,
    pub regime: RegimeReport,
}

impl LoadedConfig {
    pub fn warnings(&self) -> Vec<String> {
        self.regime.warning().into_iter().collect()
    }
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(
            field,
            format!("must be a finite value > 0, got {v}"),
        ))
    }
}

fn non_negative(field: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(
            field,
            format!("must be a finite value >= 0, got {v}"),
        ))
    }
}

impl ConfigDocument {
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_string(),
            message: e.to_string(),
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config document is always representable as TOML")
    }

    /// Check every field, naming the offending one by its dotted path.
    pub fn validate(&self) -> Result<()> {
        positive("environment.temperature_k", self.environment.temperature_k)?;
        positive(
            "environment.viscosity_pa_s",
            self.environment.viscosity_pa_s,
        )?;
        for (name, s) in [
            ("a", &self.species.a),
            ("e", &self.species.e),
            ("ea", &self.species.ea),
        ] {
            positive(&format!("species.{name}.radius_m"), s.radius_m)?;
            if let Some(d) = s.diffusion_m2_per_s {
                positive(&format!("species.{name}.diffusion_m2_per_s"), d)?;
            }
        }
        positive("rates.k1_m3_per_s", self.rates.k1_m3_per_s)?;
        non_negative("rates.k_minus1_per_s", self.rates.k_minus1_per_s)?;
        non_negative("rates.k2_per_s", self.rates.k2_per_s)?;
        positive("time.dt_s", self.time.dt_s)?;
        positive("time.duration_s", self.time.duration_s)?;
        if grid_steps(self.time.duration_s, self.time.dt_s).is_none() {
            return Err(Error::config(
                "time.duration_s",
                "must be a multiple of time.dt_s",
            ));
        }
        let b = &self.enzymes;
        if (0..3).any(|d| {
            let width = b.box_max_m[d] - b.box_min_m[d];
            !(width > 0.0 && width.is_finite())
        }) {
            return Err(Error::config(
                "enzymes.box_max_m",
                "must exceed enzymes.box_min_m on every axis",
            ));
        }
        if (0..3).any(|d| b.box_min_m[d] > 0.0 || b.box_max_m[d] < 0.0) {
            return Err(Error::config(
                "enzymes.box_min_m",
                "the enzyme box must contain the emitter at the origin",
            ));
        }
        if self.emitter.molecule_count == 0 {
            return Err(Error::config("emitter.molecule_count", "must be > 0"));
        }
        positive("emitter.bit_interval_s", self.emitter.bit_interval_s)?;
        for (i, slot) in self.emitter.schedule.iter().enumerate() {
            if slot.bit > 1 {
                return Err(Error::config(
                    format!("emitter.schedule[{i}].bit"),
                    "must be 0 or 1",
                ));
            }
            if grid_steps(slot.time_s, self.time.dt_s).is_none() {
                return Err(Error::config(
                    format!("emitter.schedule[{i}].time_s"),
                    "must be a non-negative multiple of time.dt_s",
                ));
            }
        }
        if self.receivers.is_empty() {
            return Err(Error::config(
                "receivers",
                "at least one receiver is required",
            ));
        }
        let enzyme_box = self.enzyme_box();
        for (i, rx) in self.receivers.iter().enumerate() {
            positive(&format!("receivers[{i}].radius_m"), rx.radius_m)?;
            let geometry = ChannelGeometry {
                emitter_position: [0.0; 3],
                receiver_center: rx.center_m,
                receiver_radius: rx.radius_m,
            };
            geometry.validate().map_err(|_| {
                Error::config(
                    format!("receivers[{i}].center_m"),
                    "receiver sphere must not contain the emitter",
                )
            })?;
            if !enzyme_box.contains_sphere(&rx.center_m, rx.radius_m) {
                return Err(Error::config(
                    format!("receivers[{i}].center_m"),
                    "receiver sphere must lie inside the enzyme box",
                ));
            }
        }
        if self.experiment.trials == 0 {
            return Err(Error::config("experiment.trials", "must be >= 1"));
        }
        non_negative(
            "experiment.min_regime_ratio",
            self.experiment.min_regime_ratio,
        )?;
        Ok(())
    }

    fn enzyme_box(&self) -> EnzymeBox {
        EnzymeBox {
            min: self.enzymes.box_min_m,
            max: self.enzymes.box_max_m,
        }
    }

    fn simulation_config(&self) -> SimulationConfig {
        let species = |kind, e: &SpeciesEntry| SpeciesSpec {
            kind,
            radius: e.radius_m,
            diffusion_override: e.diffusion_m2_per_s,
        };
        SimulationConfig {
            env: PhysicalEnvironment {
                temperature: self.environment.temperature_k,
                viscosity: self.environment.viscosity_pa_s,
            },
            species: [
                species(SpeciesKind::A, &self.species.a),
                species(SpeciesKind::E, &self.species.e),
                species(SpeciesKind::EA, &self.species.ea),
            ],
            rates: ReactionRates {
                k1: self.rates.k1_m3_per_s,
                k_minus1: self.rates.k_minus1_per_s,
                k2: self.rates.k2_per_s,
            },
            dt: self.time.dt_s,
            enzyme_count: self.enzymes.count,
            enzyme_box: self.enzyme_box(),
            emitter: EmitterSpec {
                molecule_count: self.emitter.molecule_count,
                mode: self.emitter.mode,
                schedule: self
                    .emitter
                    .schedule
                    .iter()
                    .map(|s| ScheduledBit {
                        time: s.time_s,
                        bit: s.bit,
                    })
                    .collect(),
                bit_interval: self.emitter.bit_interval_s,
            },
            receivers: self
                .receivers
                .iter()
                .map(|r| ChannelGeometry {
                    emitter_position: [0.0; 3],
                    receiver_center: r.center_m,
                    receiver_radius: r.radius_m,
                })
                .collect(),
            duration: self.time.duration_s,
            seed: self.experiment.seed,
        }
    }

    /// Validate, build the experiment, and compute and regime-check the
    /// derived step parameters.
    pub fn resolve(self) -> Result<LoadedConfig> {
        self.validate()?;
        let spec = ExperimentSpec {
            base_config: self.simulation_config(),
            trial_count: self.experiment.trials,
            base_seed: self.experiment.seed,
            mode: self.experiment.mode,
            analytical_refs: self.experiment.analytical_refs.clone(),
            control_arm: self.experiment.control_arm,
            workers: self.experiment.workers,
        };
        spec.validate()?;
        let derived = spec.engine_config().derived()?;
        let regime = validate_long_step_regime(&derived, self.experiment.min_regime_ratio);
        Ok(LoadedConfig {
            document: self,
            spec,
            derived,
            regime,
        })
    }
}

pub fn load_config(path: impl AsRef<Path>) -> Result<LoadedConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ConfigDocument::parse(&text, &path.display().to_string())?.resolve()
}

pub mod presets {
    //! Built-in experiment descriptions.

    use super::*;

    pub const FIG3: &str = include_str!("../../presets/fig3.toml");
    pub const FIG4: &str = include_str!("../../presets/fig4.toml");

    pub const NAMES: [&str; 2] = ["fig3", "fig4"];

    pub fn document(name: &str) -> Result<ConfigDocument> {
        let text = match name {
            "fig3" => FIG3,
            "fig4" => FIG4,
            other => return Err(Error::UnknownPreset(other.to_string())),
        };
        ConfigDocument::parse(text, &format!("preset {name}"))
    }

    pub fn load(name: &str) -> Result<LoadedConfig> {
        document(name)?.resolve()
    }

    /// Single impulse, full kinetics, packed-sphere emission.
    pub fn fig3() -> Result<ExperimentSpec> {
        Ok(load("fig3")?.spec)
    }

    /// Limiting case with point emission.
    pub fn fig4() -> Result<ExperimentSpec> {
        Ok(load("fig4")?.spec)
    }
}
