//! Fixed-time-step particle simulator.
//!
//! Every step runs, in order: scheduled emission, diffusion of all mobile
//! molecules, the enzyme-box boundary rule, bimolecular binding, unimolecular
//! reactions of intermediates, and finally receiver observation.

mod config;
mod hash;
mod state;

use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};

pub(crate) use config::grid_steps;
pub use config::{EmissionMode, EmitterSpec, EnzymeBox, ScheduledBit, SimulationConfig};
pub use hash::SpatialHash;
pub use state::ParticleState;

use crate::analytic::ChannelGeometry;
use crate::error::Result;
use crate::physics::DerivedStepParameters;
use crate::vec3::{distance_sq, midpoint, Vec3};

/// Grid divisions per box side used when `r_B` is smaller than that cell.
const HASH_DIVISIONS: f64 = 64.0;

/// Fresh state: enzymes i.i.d. uniform in the box, nothing else.
pub fn init_state(config: &SimulationConfig) -> Result<ParticleState> {
    config.validate()?;
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(config.seed);
    let b = config.enzyme_box;
    let free_e = (0..config.enzyme_count)
        .map(|_| [0, 1, 2].map(|d| b.min[d] + (b.max[d] - b.min[d]) * rng.random::<f64>()))
        .collect();
    Ok(ParticleState {
        free_a: Vec::new(),
        free_e,
        bound_ea: Vec::new(),
        degraded_count: 0,
        emitted_count: 0,
        step: 0,
        time: 0.0,
        rng,
    })
}

/// Initial A positions for one impulse, relative to the emitter at the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct EmissionPattern {
    offsets: Vec<Vec3>,
}

impl EmissionPattern {
    pub fn new(emitter: &EmitterSpec, radius_a: f64) -> Self {
        let n = emitter.molecule_count as usize;
        let offsets = match emitter.mode {
            EmissionMode::Point => vec![[0.0; 3]; n],
            EmissionMode::PackedSphere => packed_lattice(n, 2.0 * radius_a),
        };
        EmissionPattern { offsets }
    }

    pub fn offsets(&self) -> &[Vec3] {
        &self.offsets
    }
}

/// The `n` sites of a cubic lattice with spacing `pitch` closest to the
/// origin; equidistant sites are taken in lexicographic order.
fn packed_lattice(n: usize, pitch: f64) -> Vec<Vec3> {
    if n == 0 {
        return Vec::new();
    }
    let mut half = ((3.0 * n as f64 / (4.0 * std::f64::consts::PI))
        .cbrt()
        .ceil() as i64)
        + 1;
    loop {
        let mut sites: Vec<(i64, [i64; 3])> = Vec::new();
        for i in -half..=half {
            for j in -half..=half {
                for k in -half..=half {
                    sites.push((i * i + j * j + k * k, [i, j, k]));
                }
            }
        }
        sites.sort_unstable();
        // Every site with squared norm <= half^2 is enumerated, so the first
        // n are exact once the n-th lies inside that sphere.
        if sites.len() >= n && sites[n - 1].0 <= half * half {
            return sites[..n]
                .iter()
                .map(|&(_, c)| c.map(|v| v as f64 * pitch))
                .collect();
        }
        half += 1;
    }
}

pub fn emit_impulse(state: &mut ParticleState, pattern: &EmissionPattern) {
    state.free_a.extend_from_slice(pattern.offsets());
    state.emitted_count += pattern.offsets().len() as u64;
}

#[inline]
fn jitter(rng: &mut Xoshiro256PlusPlus, points: &mut [Vec3], sigma: f64) {
    if sigma == 0.0 {
        return;
    }
    for p in points {
        for x in p.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *x += sigma * z;
        }
    }
}

/// Independent Gaussian displacement of every free A, free E and EA.
pub fn diffuse_step(state: &mut ParticleState, derived: &DerivedStepParameters) {
    let [sa, se, sea] = derived.sigma;
    jitter(&mut state.rng, &mut state.free_a, sa);
    jitter(&mut state.rng, &mut state.free_e, se);
    jitter(&mut state.rng, &mut state.bound_ea, sea);
}

/// Reflect free E back into the box; split EA that left the box into a free
/// A and a free E at the reflected position. A is unaffected.
pub fn enforce_boundary(state: &mut ParticleState, enzyme_box: &EnzymeBox) {
    for p in state.free_e.iter_mut() {
        enzyme_box.reflect(p);
    }
    let mut released = Vec::new();
    state.bound_ea.retain_mut(|p| {
        if enzyme_box.contains(p) {
            true
        } else {
            enzyme_box.reflect(p);
            released.push(*p);
            false
        }
    });
    state.free_a.extend_from_slice(&released);
    state.free_e.extend_from_slice(&released);
}

/// Hash sized for the given box and binding radius.
pub fn spatial_hash_for(enzyme_box: &EnzymeBox, r_b: f64) -> SpatialHash {
    let longest = (0..3).map(|d| enzyme_box.side(d)).fold(0.0, f64::max);
    SpatialHash::new(
        enzyme_box.min,
        enzyme_box.max,
        r_b.max(longest / HASH_DIVISIONS),
    )
}

/// Pairs (A index, E index) that bind this step.
///
/// A molecules are visited in storage order; each takes the nearest still
/// unbound E closer than `r_B` (equal distances go to the lower E index).
pub fn find_binding_pairs(
    free_a: &[Vec3],
    free_e: &[Vec3],
    r_b: f64,
    enzyme_box: &EnzymeBox,
    hash: &mut SpatialHash,
) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    if free_a.is_empty() || free_e.is_empty() {
        return pairs;
    }
    hash.rebuild_near(free_e, free_a, r_b);
    let r_b2 = r_b * r_b;
    let mut taken = vec![false; free_e.len()];
    for (ai, a) in free_a.iter().enumerate() {
        if (0..3).any(|d| a[d] < enzyme_box.min[d] - r_b || a[d] > enzyme_box.max[d] + r_b) {
            continue;
        }
        let mut best: Option<(f64, u32)> = None;
        hash.for_each_near(a, r_b, |ei| {
            if taken[ei as usize] {
                return;
            }
            let d2 = distance_sq(a, &free_e[ei as usize]);
            if d2 < r_b2 {
                match best {
                    Some((bd, bi)) if d2 > bd || (d2 == bd && ei > bi) => {}
                    _ => best = Some((d2, ei)),
                }
            }
        });
        if let Some((_, ei)) = best {
            taken[ei as usize] = true;
            pairs.push((ai, ei as usize));
        }
    }
    pairs
}

/// Bind close A-E pairs at the midpoint of their centers.
///
/// In instantaneous-degradation mode the pair never exists as EA: the A is
/// counted as degraded and the E is released at the midpoint.
/// Returns the number of pairs formed.
pub fn bind_step(
    state: &mut ParticleState,
    derived: &DerivedStepParameters,
    enzyme_box: &EnzymeBox,
    hash: &mut SpatialHash,
) -> usize {
    let pairs = find_binding_pairs(&state.free_a, &state.free_e, derived.r_b, enzyme_box, hash);
    if pairs.is_empty() {
        return 0;
    }
    let mut a_bound = vec![false; state.free_a.len()];
    let mut e_bound = vec![false; state.free_e.len()];
    for &(ai, ei) in &pairs {
        // the A may sit just outside the box; keep the complex inside
        let mut site = midpoint(&state.free_a[ai], &state.free_e[ei]);
        enzyme_box.reflect(&mut site);
        a_bound[ai] = true;
        if derived.instant_degradation {
            state.free_e[ei] = site;
            state.degraded_count += 1;
        } else {
            e_bound[ei] = true;
            state.bound_ea.push(site);
        }
    }
    retain_unmarked(&mut state.free_a, &a_bound);
    if !derived.instant_degradation {
        retain_unmarked(&mut state.free_e, &e_bound);
    }
    pairs.len()
}

fn retain_unmarked(points: &mut Vec<Vec3>, marked: &[bool]) {
    let mut i = 0;
    points.retain(|_| {
        let keep = !marked[i];
        i += 1;
        keep
    });
}

/// One uniform draw per EA decides unbinding, degradation, or nothing.
/// Products are placed at the EA position.
pub fn unimolecular_step(state: &mut ParticleState, derived: &DerivedStepParameters) {
    let (p_unbind, p_degrade) = (derived.p_unbind, derived.p_degrade);
    if state.bound_ea.is_empty() || (p_unbind == 0.0 && p_degrade == 0.0) {
        return;
    }
    let p_react = p_unbind + p_degrade;
    let rng = &mut state.rng;
    let (free_a, free_e) = (&mut state.free_a, &mut state.free_e);
    let mut degraded = 0;
    state.bound_ea.retain(|p| {
        let u: f64 = rng.random();
        if u < p_unbind {
            free_a.push(*p);
            free_e.push(*p);
            false
        } else if u < p_react {
            free_e.push(*p);
            degraded += 1;
            false
        } else {
            true
        }
    });
    state.degraded_count += degraded;
}

/// Free A inside each receiver sphere (boundary inclusive).
pub fn observe(state: &ParticleState, receivers: &[ChannelGeometry]) -> Vec<u32> {
    receivers
        .iter()
        .map(|rx| {
            let r2 = rx.receiver_radius * rx.receiver_radius;
            state
                .free_a
                .iter()
                .filter(|a| distance_sq(a, &rx.receiver_center) <= r2)
                .count() as u32
        })
        .collect()
}

/// Receiver counts at `dt, 2 dt, ...` for one trial.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservationSeries {
    /// `counts[receiver][k]` is the count at time `(k + 1) dt`.
    pub counts: Vec<Vec<u32>>,
}

impl ObservationSeries {
    pub fn steps(&self) -> usize {
        self.counts.first().map_or(0, Vec::len)
    }
}

/// A single trial: config, derived parameters, and the evolving state.
#[derive(Debug, Clone)]
pub struct Simulation {
    config: SimulationConfig,
    derived: DerivedStepParameters,
    pattern: EmissionPattern,
    emission_steps: Vec<u64>,
    hash: SpatialHash,
    state: ParticleState,
}

impl Simulation {
    pub fn new(config: SimulationConfig) -> Result<Self> {
        let derived = config.derived()?;
        Self::with_derived(config, derived)
    }

    pub fn with_derived(config: SimulationConfig, derived: DerivedStepParameters) -> Result<Self> {
        let state = init_state(&config)?;
        let pattern = EmissionPattern::new(&config.emitter, config.species[0].radius);
        let mut emission_steps: Vec<u64> = config
            .emitter
            .schedule
            .iter()
            .filter(|s| s.bit == 1)
            .filter_map(|s| grid_steps(s.time, config.dt))
            .collect();
        emission_steps.sort_unstable();
        emission_steps.dedup();
        let hash = spatial_hash_for(&config.enzyme_box, derived.r_b);
        Ok(Simulation {
            config,
            derived,
            pattern,
            emission_steps,
            hash,
            state,
        })
    }

    pub fn config(&self) -> &SimulationConfig {
        &self.config
    }

    pub fn derived(&self) -> &DerivedStepParameters {
        &self.derived
    }

    pub fn state(&self) -> &ParticleState {
        &self.state
    }

    pub fn is_finished(&self) -> bool {
        self.state.step as usize >= self.config.steps()
    }

    /// Advance by one `dt` and return the receiver counts at the new time.
    pub fn step(&mut self) -> Vec<u32> {
        if self.emission_steps.binary_search(&self.state.step).is_ok() {
            emit_impulse(&mut self.state, &self.pattern);
        }
        diffuse_step(&mut self.state, &self.derived);
        enforce_boundary(&mut self.state, &self.config.enzyme_box);
        bind_step(
            &mut self.state,
            &self.derived,
            &self.config.enzyme_box,
            &mut self.hash,
        );
        unimolecular_step(&mut self.state, &self.derived);
        self.state.step += 1;
        self.state.time = self.state.step as f64 * self.config.dt;
        observe(&self.state, &self.config.receivers)
    }

    /// Step to the configured duration.
    pub fn run(mut self) -> ObservationSeries {
        let steps = self.config.steps();
        let mut counts = vec![Vec::with_capacity(steps); self.config.receivers.len()];
        while !self.is_finished() {
            for (series, c) in counts.iter_mut().zip(self.step()) {
                series.push(c);
            }
        }
        ObservationSeries { counts }
    }
}
