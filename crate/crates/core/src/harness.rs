//! Seeded Monte Carlo trials, trial averaging, summary metrics, and
//! simulation-versus-analytics comparison.
//!
//! Each trial gets its own RNG stream seeded from `(base_seed, trial_index)`,
//! so any trial can be replayed alone and the averaged result does not depend
//! on how many workers ran the trials.

use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{self, AnalyticModel, AnalyticalCurve, ModelTag};
use crate::engine::{ObservationSeries, Simulation, SimulationConfig};
use crate::error::{Error, Result};

/// Probe times used for summary metrics, seconds.
pub const DEFAULT_PROBE_TIMES: [f64; 4] = [8.5e-6, 25e-6, 35e-6, 60e-6];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentMode {
    /// Finite k_minus1 and k2 as configured.
    FullKinetics,
    /// k2 = inf and k_minus1 = 0: binding degrades A at once.
    LimitingCase,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub base_config: SimulationConfig,
    pub trial_count: u32,
    pub base_seed: u64,
    pub mode: ExperimentMode,
    pub analytical_refs: Vec<ModelTag>,
    /// Also run the same experiment with no enzymes.
    pub control_arm: bool,
    /// Worker threads; 0 lets the pool decide.
    pub workers: usize,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.trial_count == 0 {
            return Err(Error::config("experiment.trials", "must be >= 1"));
        }
        self.engine_config().validate()
    }

    /// The config the engine runs: mode applied and seeded with `base_seed`.
    pub fn engine_config(&self) -> SimulationConfig {
        let mut config = self.base_config.clone();
        config.seed = self.base_seed;
        if self.mode == ExperimentMode::LimitingCase {
            config.rates.k2 = f64::INFINITY;
            config.rates.k_minus1 = 0.0;
        }
        config
    }

    /// Same experiment without enzymes.
    pub fn control_config(&self) -> SimulationConfig {
        let mut config = self.engine_config();
        config.enzyme_count = 0;
        config
    }

    pub fn times(&self) -> Vec<f64> {
        analytic::step_grid(self.base_config.dt, self.base_config.steps())
    }

    /// Analytical expected counts for every receiver, one entry per
    /// `(receiver, model)` in `analytical_refs` order.
    pub fn analytical_curves(&self) -> Result<Vec<(usize, AnalyticalCurve)>> {
        let config = self.engine_config();
        let release = config.release()?;
        let field = config.enzyme_field();
        let times = self.times();
        let mut out = Vec::new();
        for (i, rx) in config.receivers.iter().enumerate() {
            for tag in &self.analytical_refs {
                let model = match tag {
                    ModelTag::DiffusionOnly => AnalyticModel::DiffusionOnly,
                    ModelTag::EnzymeLowerBound => {
                        AnalyticModel::lower_bound(config.rates.k1, &field)
                    }
                    ModelTag::Intermediate => AnalyticModel::intermediate(
                        config.rates.k1,
                        self.base_config.rates.k_minus1,
                        &field,
                    ),
                };
                out.push((i, analytic::sample_curve(&release, &model, rx, &times)?));
            }
        }
        Ok(out)
    }
}

/// 64-bit finalizer from SplitMix64.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of trial `trial_index`: `splitmix64(splitmix64(base_seed) ^ trial_index)`.
pub fn trial_seed(base_seed: u64, trial_index: u64) -> u64 {
    splitmix64(splitmix64(base_seed) ^ trial_index)
}

/// One trial with a fresh enzyme field, seeded from `config.seed` and the index.
pub fn run_trial(config: &SimulationConfig, trial_index: u64) -> Result<ObservationSeries> {
    let mut cfg = config.clone();
    cfg.seed = trial_seed(config.seed, trial_index);
    Ok(Simulation::new(cfg)?.run())
}

/// Trials `indices` in index order, run on up to `workers` threads.
pub fn run_trials(
    config: &SimulationConfig,
    indices: Range<u64>,
    workers: usize,
) -> Result<Vec<ObservationSeries>> {
    config.validate()?;
    let derived = config.derived()?;
    let one = |i: u64| -> Result<ObservationSeries> {
        let mut cfg = config.clone();
        cfg.seed = trial_seed(config.seed, i);
        Ok(Simulation::with_derived(cfg, derived)?.run())
    };
    if workers == 1 {
        return indices.map(one).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::WorkerPool(e.to_string()))?;
    pool.install(|| indices.into_par_iter().map(one).collect())
}

/// Mean and standard error of receiver counts across trials.
///
/// Integer sums are kept so that averages over disjoint trial sets merge
/// exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AveragedSeries {
    pub times: Vec<f64>,
    /// `[receiver][time]`.
    pub mean_counts: Vec<Vec<f64>>,
    /// Sample standard deviation (n - 1) over sqrt(n); zero for one trial.
    pub std_error: Vec<Vec<f64>>,
    pub trial_count: u64,
    sums: Vec<Vec<u64>>,
    sum_squares: Vec<Vec<u64>>,
}

impl AveragedSeries {
    pub fn from_trials(dt: f64, trials: &[ObservationSeries]) -> Result<Self> {
        let first = trials
            .first()
            .ok_or_else(|| Error::invalid("trials", "at least one trial is required"))?;
        let receivers = first.counts.len();
        let steps = first.steps();
        let mut sums = vec![vec![0u64; steps]; receivers];
        let mut sum_squares = vec![vec![0u64; steps]; receivers];
        for trial in trials {
            if trial.counts.len() != receivers || trial.steps() != steps {
                return Err(Error::invalid(
                    "trials",
                    "trial series have inconsistent shapes",
                ));
            }
            for (r, series) in trial.counts.iter().enumerate() {
                for (k, &c) in series.iter().enumerate() {
                    sums[r][k] += c as u64;
                    sum_squares[r][k] += (c as u64) * (c as u64);
                }
            }
        }
        Ok(Self::from_sums(
            analytic::step_grid(dt, steps),
            trials.len() as u64,
            sums,
            sum_squares,
        ))
    }

    fn from_sums(times: Vec<f64>, n: u64, sums: Vec<Vec<u64>>, sum_squares: Vec<Vec<u64>>) -> Self {
        let nf = n as f64;
        let mean_counts = sums
            .iter()
            .map(|row| row.iter().map(|&s| s as f64 / nf).collect())
            .collect();
        let std_error = sums
            .iter()
            .zip(&sum_squares)
            .map(|(row, sq)| {
                row.iter()
                    .zip(sq)
                    .map(|(&s, &q)| {
                        if n < 2 {
                            return 0.0;
                        }
                        // n * sum(x^2) - (sum x)^2 is exact in integers
                        let num = (n as u128) * (q as u128) - (s as u128) * (s as u128);
                        let var = num as f64 / (nf * (nf - 1.0));
                        (var / nf).sqrt()
                    })
                    .collect()
            })
            .collect();
        AveragedSeries {
            times,
            mean_counts,
            std_error,
            trial_count: n,
            sums,
            sum_squares,
        }
    }

    /// Pool two averages over disjoint trial sets.
    pub fn merge(&self, other: &AveragedSeries) -> Result<Self> {
        check_grid(&self.times, &other.times)?;
        if self.sums.len() != other.sums.len() {
            return Err(Error::invalid("receivers", "receiver counts differ"));
        }
        let add = |a: &Vec<Vec<u64>>, b: &Vec<Vec<u64>>| -> Vec<Vec<u64>> {
            a.iter()
                .zip(b)
                .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p + q).collect())
                .collect()
        };
        Ok(Self::from_sums(
            self.times.clone(),
            self.trial_count + other.trial_count,
            add(&self.sums, &other.sums),
            add(&self.sum_squares, &other.sum_squares),
        ))
    }

    pub fn receivers(&self) -> usize {
        self.mean_counts.len()
    }
}

/// Runs the configured experiment (enzymes present) and averages the trials.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<AveragedSeries> {
    spec.validate()?;
    let config = spec.engine_config();
    let trials = run_trials(&config, 0..spec.trial_count as u64, spec.workers)?;
    AveragedSeries::from_trials(config.dt, &trials)
}

/// The no-enzyme control arm of `spec`.
pub fn run_control(spec: &ExperimentSpec) -> Result<AveragedSeries> {
    spec.validate()?;
    let config = spec.control_config();
    let trials = run_trials(&config, 0..spec.trial_count as u64, spec.workers)?;
    AveragedSeries::from_trials(config.dt, &trials)
}

/// Value of a series at a requested probe time, snapped to the grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeValue {
    pub requested_time: f64,
    pub time: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesSummary {
    pub receiver: usize,
    /// "simulation", "control", or a model tag.
    pub source: String,
    pub peak_time: f64,
    pub peak_value: f64,
    pub value_at: Vec<ProbeValue>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SummaryMetrics {
    pub entries: Vec<SeriesSummary>,
}

impl SummaryMetrics {
    pub fn get(&self, receiver: usize, source: &str) -> Option<&SeriesSummary> {
        self.entries
            .iter()
            .find(|e| e.receiver == receiver && e.source == source)
    }
}

/// Peak (earliest on ties) and nearest-grid-point values at `probes`.
pub fn summarize(
    receiver: usize,
    source: &str,
    times: &[f64],
    values: &[f64],
    probes: &[f64],
) -> Result<SeriesSummary> {
    if times.len() != values.len() {
        return Err(Error::invalid(
            "values",
            "length differs from the time grid",
        ));
    }
    let peak = analytic::argmax(values).ok_or(Error::EmptySeries)?;
    let value_at = probes
        .iter()
        .map(|&t| {
            let k = nearest_index(times, t);
            ProbeValue {
                requested_time: t,
                time: times[k],
                value: values[k],
            }
        })
        .collect();
    Ok(SeriesSummary {
        receiver,
        source: source.to_string(),
        peak_time: times[peak],
        peak_value: values[peak],
        value_at,
    })
}

pub fn summarize_curve(
    receiver: usize,
    curve: &AnalyticalCurve,
    probes: &[f64],
) -> Result<SeriesSummary> {
    summarize(
        receiver,
        curve.model.as_str(),
        &curve.times,
        &curve.expected_counts,
        probes,
    )
}

pub fn summarize_series(
    source: &str,
    series: &AveragedSeries,
    probes: &[f64],
) -> Result<Vec<SeriesSummary>> {
    (0..series.receivers())
        .map(|r| summarize(r, source, &series.times, &series.mean_counts[r], probes))
        .collect()
}

fn nearest_index(times: &[f64], t: f64) -> usize {
    let mut best = 0;
    for (i, &ti) in times.iter().enumerate() {
        if (ti - t).abs() < (times[best] - t).abs() {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointComparison {
    pub time: f64,
    pub simulated: f64,
    pub std_error: f64,
    pub analytical: f64,
    /// simulated - analytical
    pub difference: f64,
    pub z: f64,
}

impl PointComparison {
    /// Simulated mean plus three standard errors still falls short of the curve.
    pub fn violates_bound(&self) -> bool {
        self.simulated + 3.0 * self.std_error < self.analytical
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub receiver: usize,
    pub model: ModelTag,
    pub points: Vec<PointComparison>,
    pub max_abs_z: f64,
    pub bound_violation_fraction: f64,
}

impl ComparisonReport {
    fn from(&self, t_min: f64) -> impl Iterator<Item = &PointComparison> {
        // small slack so grid times equal to t_min are included
        self.points
            .iter()
            .filter(move |p| p.time >= t_min * (1.0 - 1e-9))
    }

    pub fn max_abs_z_from(&self, t_min: f64) -> f64 {
        self.from(t_min).map(|p| p.z.abs()).fold(0.0, f64::max)
    }

    pub fn violation_fraction_from(&self, t_min: f64) -> f64 {
        let (n, bad) = self.from(t_min).fold((0usize, 0usize), |(n, bad), p| {
            (n + 1, bad + p.violates_bound() as usize)
        });
        if n == 0 {
            0.0
        } else {
            bad as f64 / n as f64
        }
    }

    pub fn at(&self, t: f64) -> &PointComparison {
        let times: Vec<f64> = self.points.iter().map(|p| p.time).collect();
        &self.points[nearest_index(&times, t)]
    }
}

pub(crate) fn check_grid(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::GridMismatch(format!(
            "{} vs {} points",
            a.len(),
            b.len()
        )));
    }
    for (i, (x, y)) in a.iter().zip(b).enumerate() {
        if (x - y).abs() > 1e-9 * x.abs().max(y.abs()) {
            return Err(Error::GridMismatch(format!("point {i}: {x} vs {y}")));
        }
    }
    Ok(())
}

/// Pointwise difference and z-score of one receiver's simulated mean against a curve.
pub fn compare(
    avg: &AveragedSeries,
    receiver: usize,
    curve: &AnalyticalCurve,
) -> Result<ComparisonReport> {
    let means = avg
        .mean_counts
        .get(receiver)
        .ok_or_else(|| Error::invalid("receiver", format!("no receiver {receiver}")))?;
    compare_columns(receiver, &avg.times, means, &avg.std_error[receiver], curve)
}

/// [`compare`] on raw columns, e.g. as read back from a series file.
pub fn compare_columns(
    receiver: usize,
    times: &[f64],
    means: &[f64],
    errors: &[f64],
    curve: &AnalyticalCurve,
) -> Result<ComparisonReport> {
    check_grid(times, &curve.times)?;
    if means.len() != times.len() || errors.len() != times.len() {
        return Err(Error::GridMismatch(
            "simulated columns differ in length".into(),
        ));
    }
    let points: Vec<PointComparison> = times
        .iter()
        .zip(means)
        .zip(errors)
        .zip(&curve.expected_counts)
        .map(|(((&time, &simulated), &std_error), &analytical)| {
            let difference = simulated - analytical;
            let z = if difference == 0.0 {
                0.0
            } else {
                difference / std_error
            };
            PointComparison {
                time,
                simulated,
                std_error,
                analytical,
                difference,
                z,
            }
        })
        .collect();
    let mut report = ComparisonReport {
        receiver,
        model: curve.model,
        points,
        max_abs_z: 0.0,
        bound_violation_fraction: 0.0,
    };
    report.max_abs_z = report.max_abs_z_from(0.0);
    report.bound_violation_fraction = report.violation_fraction_from(0.0);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    fn series(counts: Vec<Vec<u32>>) -> ObservationSeries {
        ObservationSeries { counts }
    }

    fn tiny_spec() -> ExperimentSpec {
        let mut spec = presets::fig3().unwrap();
        let cfg = &mut spec.base_config;
        cfg.enzyme_count = 2000;
        cfg.enzyme_box = crate::engine::EnzymeBox::centered_cube(0.4e-6);
        cfg.emitter.molecule_count = 500;
        cfg.receivers.truncate(1);
        cfg.duration = 10e-6;
        spec.trial_count = 12;
        spec
    }

    #[test]
    fn trial_seeds_are_distinct_and_stable() {
        assert_eq!(trial_seed(7, 3), trial_seed(7, 3));
        let seeds: std::collections::HashSet<u64> = (0..1000).map(|i| trial_seed(7, i)).collect();
        assert_eq!(seeds.len(), 1000);
        assert_ne!(trial_seed(7, 0), trial_seed(8, 0));
    }

    #[test]
    fn single_trial_has_zero_std_error() {
        let avg = AveragedSeries::from_trials(1.0, &[series(vec![vec![3, 4, 5]])]).unwrap();
        assert_eq!(avg.mean_counts, vec![vec![3.0, 4.0, 5.0]]);
        assert_eq!(avg.std_error, vec![vec![0.0; 3]]);
        assert_eq!(avg.times, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn sample_std_error() {
        let trials = [
            series(vec![vec![1]]),
            series(vec![vec![2]]),
            series(vec![vec![6]]),
        ];
        let avg = AveragedSeries::from_trials(1.0, &trials).unwrap();
        assert_eq!(avg.mean_counts[0][0], 3.0);
        // sample variance (4 + 1 + 9) / 2 = 7
        assert!((avg.std_error[0][0] - (7.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!(AveragedSeries::from_trials(1.0, &[]).is_err());
        assert!(AveragedSeries::from_trials(
            1.0,
            &[series(vec![vec![1]]), series(vec![vec![1, 2]])]
        )
        .is_err());
    }

    #[test]
    fn halves_merge_exactly() {
        let spec = tiny_spec();
        let cfg = spec.engine_config();
        let all = run_trials(&cfg, 0..12, 1).unwrap();
        let whole = AveragedSeries::from_trials(cfg.dt, &all).unwrap();
        let a = AveragedSeries::from_trials(cfg.dt, &all[..5]).unwrap();
        let b = AveragedSeries::from_trials(cfg.dt, &all[5..]).unwrap();
        let pooled = a.merge(&b).unwrap();
        assert_eq!(pooled, whole);
        for k in 0..whole.times.len() {
            let weighted = (5.0 * a.mean_counts[0][k] + 7.0 * b.mean_counts[0][k]) / 12.0;
            assert!((weighted - whole.mean_counts[0][k]).abs() <= 1e-12 * weighted.max(1.0));
        }
        // recompute from stored trials
        for k in 0..whole.times.len() {
            let mean = all.iter().map(|t| t.counts[0][k] as f64).sum::<f64>() / 12.0;
            assert_eq!(mean, whole.mean_counts[0][k]);
        }
    }

    #[test]
    fn trial_replay_and_worker_independence() {
        let spec = tiny_spec();
        let cfg = spec.engine_config();
        let serial = run_trials(&cfg, 0..6, 1).unwrap();
        let parallel = run_trials(&cfg, 0..6, 3).unwrap();
        assert_eq!(serial, parallel);
        assert_eq!(run_trial(&cfg, 4).unwrap(), serial[4]);
        assert_eq!(serial[0].steps(), 20);
        assert_ne!(serial[0], serial[1]);
    }

    #[test]
    fn run_experiment_shapes() {
        let spec = tiny_spec();
        let avg = run_experiment(&spec).unwrap();
        assert_eq!(avg.trial_count, 12);
        assert_eq!(avg.times.len(), 20);
        assert!(avg.mean_counts.iter().flatten().all(|&m| m >= 0.0));
        assert!(avg.std_error.iter().flatten().all(|&s| s >= 0.0));
        let mut bad = spec.clone();
        bad.trial_count = 0;
        assert!(run_experiment(&bad).is_err());
    }

    #[test]
    fn limiting_mode_overrides_rates() {
        let mut spec = tiny_spec();
        spec.mode = ExperimentMode::LimitingCase;
        let cfg = spec.engine_config();
        assert!(cfg.rates.k2.is_infinite());
        assert_eq!(cfg.rates.k_minus1, 0.0);
        let d = cfg.derived().unwrap();
        assert!(d.instant_degradation);
        assert_eq!(spec.control_config().enzyme_count, 0);
    }

    #[test]
    fn summarize_peak_ties_and_probes() {
        let times = [1.0, 2.0, 3.0, 4.0];
        let s = summarize(0, "x", &times, &[2.0, 2.0, 2.0, 2.0], &[2.4, 3.6]).unwrap();
        assert_eq!((s.peak_time, s.peak_value), (1.0, 2.0));
        assert_eq!(s.value_at[0].time, 2.0);
        assert_eq!(s.value_at[1].time, 4.0);
        assert!(matches!(
            summarize(0, "x", &[], &[], &[]),
            Err(Error::EmptySeries)
        ));
    }

    #[test]
    fn reference_probe_values() {
        let spec = presets::fig3().unwrap();
        let curves = spec.analytical_curves().unwrap();
        let near_free = &curves
            .iter()
            .find(|(r, c)| *r == 0 && c.model == ModelTag::DiffusionOnly)
            .unwrap()
            .1;
        let near_bound = &curves
            .iter()
            .find(|(r, c)| *r == 0 && c.model == ModelTag::EnzymeLowerBound)
            .unwrap()
            .1;
        let free = summarize_curve(0, near_free, &[60e-6]).unwrap();
        let bound = summarize_curve(0, near_bound, &[60e-6]).unwrap();
        assert!((free.value_at[0].value - 2.8).abs() < 0.05 * 2.8);
        assert!((bound.value_at[0].value - 0.84).abs() < 0.05 * 0.84);
    }

    #[test]
    fn compare_equal_and_mismatched() {
        let trials = [series(vec![vec![1, 2]]), series(vec![vec![3, 2]])];
        let avg = AveragedSeries::from_trials(1.0, &trials).unwrap();
        let curve = AnalyticalCurve {
            times: vec![1.0, 2.0],
            expected_counts: vec![2.0, 2.0],
            model: ModelTag::EnzymeLowerBound,
        };
        let report = compare(&avg, 0, &curve).unwrap();
        assert!(report.points.iter().all(|p| p.z == 0.0));
        assert_eq!(report.max_abs_z, 0.0);
        assert_eq!(report.bound_violation_fraction, 0.0);

        let high = AnalyticalCurve {
            expected_counts: vec![10.0, 2.0],
            ..curve.clone()
        };
        let report = compare(&avg, 0, &high).unwrap();
        assert_eq!(report.bound_violation_fraction, 0.5);
        assert_eq!(report.violation_fraction_from(2.0), 0.0);
        assert!((report.points[0].z - (-8.0)).abs() < 1e-12);

        let short = AnalyticalCurve {
            times: vec![1.0],
            expected_counts: vec![1.0],
            model: ModelTag::DiffusionOnly,
        };
        assert!(matches!(
            compare(&avg, 0, &short),
            Err(Error::GridMismatch(_))
        ));
        let shifted = AnalyticalCurve {
            times: vec![1.0, 2.5],
            ..curve
        };
        assert!(matches!(
            compare(&avg, 0, &shifted),
            Err(Error::GridMismatch(_))
        ));
    }
}
