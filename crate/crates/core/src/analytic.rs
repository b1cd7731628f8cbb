//! Closed-form expected concentrations at the receiver for an impulse of
//! information molecules released at the emitter, with and without enzymes.
//!
//! All models assume the receiver sees a uniform concentration equal to the
//! point value at its center, so the expected count is `C(r0, t) * V_obs`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vec3::{self, Vec3};

/// Emitter and one spherical passive receiver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelGeometry {
    pub emitter_position: Vec3,
    pub receiver_center: Vec3,
    /// Meters.
    pub receiver_radius: f64,
}

impl ChannelGeometry {
    /// Receiver centered at `receiver_center` with the emitter at the origin.
    pub fn new(receiver_center: Vec3, receiver_radius: f64) -> Result<Self> {
        let geometry = ChannelGeometry {
            emitter_position: [0.0; 3],
            receiver_center,
            receiver_radius,
        };
        geometry.validate()?;
        Ok(geometry)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.receiver_radius > 0.0 && self.receiver_radius.is_finite()) {
            return Err(Error::invalid("receiver_radius", "must be > 0"));
        }
        if self.distance() <= self.receiver_radius {
            return Err(Error::invalid(
                "receiver_center",
                "receiver sphere must not contain the emitter",
            ));
        }
        Ok(())
    }

    /// Emitter-to-receiver-center distance.
    pub fn distance(&self) -> f64 {
        vec3::distance(&self.emitter_position, &self.receiver_center)
    }

    pub fn volume(&self) -> f64 {
        sphere_volume(self.receiver_radius)
    }
}

pub fn sphere_volume(radius: f64) -> f64 {
    4.0 / 3.0 * PI * radius.powi(3)
}

/// Point-source diffusion without enzymes.
pub fn diffusion_only_concentration(n_a: f64, d_a: f64, distance: f64, t: f64) -> Result<f64> {
    check_inputs(d_a, distance, t)?;
    Ok(gaussian_kernel(n_a, d_a, distance, t, 0.0))
}

/// Lower bound with every enzyme permanently free: the diffusion-only
/// solution damped by `exp(-k1 C_E_tot t)`.
pub fn enzyme_lower_bound_concentration(
    n_a: f64,
    d_a: f64,
    k1: f64,
    total_enzyme: f64,
    distance: f64,
    t: f64,
) -> Result<f64> {
    check_inputs(d_a, distance, t)?;
    check_non_negative("k1", k1)?;
    check_non_negative("total_enzyme", total_enzyme)?;
    Ok(gaussian_kernel(n_a, d_a, distance, t, k1 * total_enzyme))
}

/// Solution with constant free-enzyme and intermediate concentrations.
#[allow(clippy::too_many_arguments)]
pub fn intermediate_concentration(
    n_a: f64,
    d_a: f64,
    k1: f64,
    constant_ce: f64,
    k_minus1: f64,
    constant_cea: f64,
    distance: f64,
    t: f64,
) -> Result<f64> {
    check_inputs(d_a, distance, t)?;
    check_non_negative("k1", k1)?;
    check_non_negative("constant_ce", constant_ce)?;
    check_non_negative("k_minus1", k_minus1)?;
    check_non_negative("constant_cea", constant_cea)?;
    Ok(gaussian_kernel(n_a, d_a, distance, t, k1 * constant_ce) + k_minus1 * constant_cea * t)
}

/// Expected number of molecules in the receiver for a uniform concentration.
pub fn expected_count(concentration: f64, geometry: &ChannelGeometry) -> f64 {
    concentration * geometry.volume()
}

/// Time at which the diffusion-only concentration at `distance` peaks.
pub fn diffusion_peak_time(distance: f64, d_a: f64) -> f64 {
    distance * distance / (6.0 * d_a)
}

fn gaussian_kernel(n_a: f64, d_a: f64, distance: f64, t: f64, decay_rate: f64) -> f64 {
    let spread = 4.0 * d_a * t;
    n_a / (PI * spread).powf(1.5) * (-decay_rate * t - distance * distance / spread).exp()
}

fn check_inputs(d_a: f64, distance: f64, t: f64) -> Result<()> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::invalid("t", format!("must be > 0, got {t}")));
    }
    if !(d_a > 0.0 && d_a.is_finite()) {
        return Err(Error::invalid("D_A", format!("must be > 0, got {d_a}")));
    }
    check_non_negative("distance", distance)
}

fn check_non_negative(name: &str, value: f64) -> Result<()> {
    if value >= 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must be >= 0, got {value}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelTag {
    DiffusionOnly,
    EnzymeLowerBound,
    Intermediate,
}

impl ModelTag {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelTag::DiffusionOnly => "diffusion_only",
            ModelTag::EnzymeLowerBound => "enzyme_lower_bound",
            ModelTag::Intermediate => "intermediate",
        }
    }
}

/// Enzyme concentrations seen by the analytical models.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnzymeFieldParams {
    /// N_E / V_enz, molecule m^-3.
    pub total_enzyme_concentration: f64,
    pub constant_ce: Option<f64>,
    pub constant_cea: Option<f64>,
}

impl EnzymeFieldParams {
    pub fn from_total(total_enzyme_concentration: f64) -> Self {
        EnzymeFieldParams {
            total_enzyme_concentration,
            constant_ce: None,
            constant_cea: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_non_negative(
            "total_enzyme_concentration",
            self.total_enzyme_concentration,
        )?;
        if let Some(ce) = self.constant_ce {
            check_non_negative("constant_ce", ce)?;
            if ce > self.total_enzyme_concentration {
                return Err(Error::invalid(
                    "constant_ce",
                    "cannot exceed the total enzyme concentration",
                ));
            }
        }
        if let Some(cea) = self.constant_cea {
            check_non_negative("constant_cea", cea)?;
        }
        Ok(())
    }
}

/// Molecules released as one impulse from the emitter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImpulseRelease {
    pub molecules: f64,
    /// D_A, m^2/s.
    pub diffusion: f64,
}

/// A concentration model together with its enzyme parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AnalyticModel {
    DiffusionOnly,
    EnzymeLowerBound {
        k1: f64,
        total_enzyme: f64,
    },
    Intermediate {
        k1: f64,
        k_minus1: f64,
        constant_ce: f64,
        constant_cea: f64,
    },
}

impl AnalyticModel {
    pub fn lower_bound(k1: f64, field: &EnzymeFieldParams) -> Self {
        AnalyticModel::EnzymeLowerBound {
            k1,
            total_enzyme: field.total_enzyme_concentration,
        }
    }

    /// Unset constants default to all enzyme free and no intermediate.
    pub fn intermediate(k1: f64, k_minus1: f64, field: &EnzymeFieldParams) -> Self {
        AnalyticModel::Intermediate {
            k1,
            k_minus1,
            constant_ce: field
                .constant_ce
                .unwrap_or(field.total_enzyme_concentration),
            constant_cea: field.constant_cea.unwrap_or(0.0),
        }
    }

    pub fn tag(&self) -> ModelTag {
        match self {
            AnalyticModel::DiffusionOnly => ModelTag::DiffusionOnly,
            AnalyticModel::EnzymeLowerBound { .. } => ModelTag::EnzymeLowerBound,
            AnalyticModel::Intermediate { .. } => ModelTag::Intermediate,
        }
    }

    pub fn concentration(&self, release: &ImpulseRelease, distance: f64, t: f64) -> Result<f64> {
        let (n, d) = (release.molecules, release.diffusion);
        match *self {
            AnalyticModel::DiffusionOnly => diffusion_only_concentration(n, d, distance, t),
            AnalyticModel::EnzymeLowerBound { k1, total_enzyme } => {
                enzyme_lower_bound_concentration(n, d, k1, total_enzyme, distance, t)
            }
            AnalyticModel::Intermediate {
                k1,
                k_minus1,
                constant_ce,
                constant_cea,
            } => intermediate_concentration(
                n,
                d,
                k1,
                constant_ce,
                k_minus1,
                constant_cea,
                distance,
                t,
            ),
        }
    }
}

/// Expected receiver count sampled on a time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticalCurve {
    pub times: Vec<f64>,
    pub expected_counts: Vec<f64>,
    pub model: ModelTag,
}

impl AnalyticalCurve {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

pub fn sample_curve(
    release: &ImpulseRelease,
    model: &AnalyticModel,
    geometry: &ChannelGeometry,
    times: &[f64],
) -> Result<AnalyticalCurve> {
    geometry.validate()?;
    validate_grid(times)?;
    let distance = geometry.distance();
    let expected_counts = times
        .iter()
        .map(|&t| {
            Ok(expected_count(
                model.concentration(release, distance, t)?,
                geometry,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AnalyticalCurve {
        times: times.to_vec(),
        expected_counts,
        model: model.tag(),
    })
}

/// Grid argmax; ties go to the earliest time.
pub fn peak_of_curve(curve: &AnalyticalCurve) -> Result<(f64, f64)> {
    let index = argmax(&curve.expected_counts).ok_or(Error::EmptySeries)?;
    Ok((curve.times[index], curve.expected_counts[index]))
}

pub(crate) fn argmax(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &v) in values.iter().enumerate() {
        match best {
            Some(b) if v <= values[b] => {}
            _ => best = Some(i),
        }
    }
    best
}

/// The observation grid `dt, 2 dt, ..., steps * dt`.
pub fn step_grid(dt: f64, steps: usize) -> Vec<f64> {
    (1..=steps).map(|k| k as f64 * dt).collect()
}

fn validate_grid(times: &[f64]) -> Result<()> {
    if times.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
        return Err(Error::invalid("times", "all sample times must be > 0"));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid(
            "times",
            "sample times must be strictly increasing",
        ));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const NM: f64 = 1e-9;
    const US: f64 = 1e-6;
    // D_A for a 0.5 nm molecule in water at 25 C.
    const D_A: f64 = 4.367_641_349_891_242e-10;
    const N_A: f64 = 1e4;

    fn release() -> ImpulseRelease {
        ImpulseRelease {
            molecules: N_A,
            diffusion: D_A,
        }
    }

    fn geometry(distance_nm: f64, radius_nm: f64) -> ChannelGeometry {
        ChannelGeometry::new([distance_nm * NM, 0.0, 0.0], radius_nm * NM).unwrap()
    }

    #[test]
    fn geometry_rejects_receiver_covering_emitter() {
        assert!(ChannelGeometry::new([10.0 * NM, 0.0, 0.0], 20.0 * NM).is_err());
        assert!(ChannelGeometry::new([100.0 * NM, 0.0, 0.0], 0.0).is_err());
    }

    #[test]
    fn diffusion_count_near_peak_at_150nm() {
        let g = geometry(150.0, 25.0);
        let c = diffusion_only_concentration(N_A, D_A, 150.0 * NM, 8.6 * US).unwrap();
        let count = expected_count(c, &g);
        assert!((count - 14.27).abs() < 0.05, "{count}");
        assert!(diffusion_only_concentration(N_A, D_A, 150.0 * NM, 0.0).is_err());
        assert!(
            expected_count(
                diffusion_only_concentration(N_A, D_A, 150.0 * NM, 1.0).unwrap(),
                &g
            ) < 1e-5
        );
    }

    #[test]
    fn expected_count_scaling() {
        let g = geometry(150.0, 25.0);
        assert!((g.volume() - 6.545e-23).abs() < 1e-26);
        assert!((expected_count(2.18e23, &g) - 14.27).abs() < 0.01);
        assert_eq!(expected_count(0.0, &g), 0.0);
        let big = geometry(150.0, 50.0);
        assert!((expected_count(1e20, &big) / expected_count(1e20, &g) - 8.0).abs() < 1e-12);
    }

    #[test]
    fn spatial_normalization_recovers_n_a() {
        // Radial quadrature of 4 pi r^2 C(r, t) with Simpson's rule.
        let t = 10.0 * US;
        let sigma = (2.0 * D_A * t).sqrt();
        let r_max = 12.0 * sigma;
        let n = 4000;
        let h = r_max / n as f64;
        let f = |r: f64| 4.0 * PI * r * r * diffusion_only_concentration(N_A, D_A, r, t).unwrap();
        let mut sum = f(0.0) + f(r_max);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            sum += w * f(i as f64 * h);
        }
        let total = sum * h / 3.0;
        assert!((total - N_A).abs() / N_A < 1e-3, "{total}");
    }

    #[test]
    fn lower_bound_reductions() {
        for &(r, t) in &[
            (0.0, 1.0 * US),
            (150.0 * NM, 8.0 * US),
            (300.0 * NM, 60.0 * US),
        ] {
            let free = diffusion_only_concentration(N_A, D_A, r, t).unwrap();
            assert_eq!(
                enzyme_lower_bound_concentration(N_A, D_A, 0.0, 2e23, r, t).unwrap(),
                free
            );
            assert_eq!(
                enzyme_lower_bound_concentration(N_A, D_A, 1e-19, 0.0, r, t).unwrap(),
                free
            );
            assert_eq!(
                intermediate_concentration(N_A, D_A, 1e-19, 0.0, 1e4, 0.0, r, t).unwrap(),
                free
            );
            let bound = enzyme_lower_bound_concentration(N_A, D_A, 1e-19, 2e23, r, t).unwrap();
            let inter = intermediate_concentration(N_A, D_A, 1e-19, 2e23, 1e4, 0.0, r, t).unwrap();
            assert_eq!(inter, bound);
        }
    }

    #[test]
    fn lower_bound_ratio_at_60us() {
        let free = diffusion_only_concentration(N_A, D_A, 150.0 * NM, 60.0 * US).unwrap();
        let bound =
            enzyme_lower_bound_concentration(N_A, D_A, 1e-19, 2e23, 150.0 * NM, 60.0 * US).unwrap();
        assert!((bound / free - (-1.2f64).exp()).abs() < 1e-12);
        assert!((bound / free - 0.301).abs() < 1e-3);
    }

    #[test]
    fn intermediate_adds_linear_term() {
        let (r, t) = (150.0 * NM, 10.0 * US);
        let base = intermediate_concentration(N_A, D_A, 1e-19, 1e23, 1e4, 0.0, r, t).unwrap();
        // k_minus1 * C_EA = 1e20 molecule m^-3 s^-1
        let with = intermediate_concentration(N_A, D_A, 1e-19, 1e23, 1e4, 1e16, r, t).unwrap();
        assert!(((with - base) - 1e15).abs() / 1e15 < 1e-6);
    }

    #[test]
    fn reference_peaks() {
        let times = step_grid(0.05 * US, 2000);
        let free = sample_curve(
            &release(),
            &AnalyticModel::DiffusionOnly,
            &geometry(150.0, 25.0),
            &times,
        )
        .unwrap();
        let (t_peak, value) = peak_of_curve(&free).unwrap();
        let t_star = diffusion_peak_time(150.0 * NM, D_A);
        assert!((t_star - 8.586 * US).abs() < 0.01 * US);
        assert!((t_peak - t_star).abs() <= 0.05 * US);
        assert!((value - 14.27).abs() < 0.05);

        let far = geometry(300.0, 45.0);
        let free_far =
            sample_curve(&release(), &AnalyticModel::DiffusionOnly, &far, &times).unwrap();
        let (t_far, _) = peak_of_curve(&free_far).unwrap();
        assert!((t_far - 34.34 * US).abs() < 0.1 * US, "{t_far}");

        let model = AnalyticModel::EnzymeLowerBound {
            k1: 1e-19,
            total_enzyme: 2e23,
        };
        let bound_far = sample_curve(&release(), &model, &far, &times).unwrap();
        let (t_b, v_b) = peak_of_curve(&bound_far).unwrap();
        assert!((t_b - 25.6 * US).abs() < 0.2 * US, "{t_b}");
        assert!((v_b - 5.8).abs() < 0.05, "{v_b}");
        assert!(t_b < t_far);
    }

    #[test]
    fn curve_shape_and_grid_checks() {
        let g = geometry(150.0, 25.0);
        let curve = sample_curve(
            &release(),
            &AnalyticModel::DiffusionOnly,
            &g,
            &[1.0 * US, 2.0 * US, 3.0 * US],
        )
        .unwrap();
        assert_eq!(curve.len(), 3);
        assert!(sample_curve(
            &release(),
            &AnalyticModel::DiffusionOnly,
            &g,
            &[0.0, 1.0 * US]
        )
        .is_err());
        assert!(sample_curve(
            &release(),
            &AnalyticModel::DiffusionOnly,
            &g,
            &[2.0 * US, 1.0 * US]
        )
        .is_err());

        // rise then decay on the observation grid
        let full = sample_curve(
            &release(),
            &AnalyticModel::DiffusionOnly,
            &g,
            &step_grid(0.5 * US, 200),
        )
        .unwrap();
        let (t_peak, _) = peak_of_curve(&full).unwrap();
        let k = full.times.iter().position(|&t| t == t_peak).unwrap();
        assert!(full.expected_counts[..=k].windows(2).all(|w| w[1] >= w[0]));
        assert!(full.expected_counts[k..].windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn peak_tie_and_empty() {
        let curve = AnalyticalCurve {
            times: vec![1.0, 2.0, 3.0],
            expected_counts: vec![5.0, 5.0, 5.0],
            model: ModelTag::DiffusionOnly,
        };
        assert_eq!(peak_of_curve(&curve).unwrap(), (1.0, 5.0));
        let single = AnalyticalCurve {
            times: vec![4.0],
            expected_counts: vec![2.0],
            model: ModelTag::DiffusionOnly,
        };
        assert_eq!(peak_of_curve(&single).unwrap(), (4.0, 2.0));
        let empty = AnalyticalCurve {
            times: vec![],
            expected_counts: vec![],
            model: ModelTag::DiffusionOnly,
        };
        assert!(matches!(peak_of_curve(&empty), Err(Error::EmptySeries)));
    }

    #[test]
    fn enzyme_peak_is_earlier_and_lower() {
        let times = step_grid(0.1 * US, 1000);
        for g in [geometry(150.0, 25.0), geometry(300.0, 45.0)] {
            let free = sample_curve(&release(), &AnalyticModel::DiffusionOnly, &g, &times).unwrap();
            let model = AnalyticModel::EnzymeLowerBound {
                k1: 1e-19,
                total_enzyme: 2e23,
            };
            let bound = sample_curve(&release(), &model, &g, &times).unwrap();
            let (tf, vf) = peak_of_curve(&free).unwrap();
            let (tb, vb) = peak_of_curve(&bound).unwrap();
            assert!(tb < tf && vb < vf);
        }
    }

    proptest! {
        #[test]
        fn bound_strictly_below_diffusion(r in 0.0f64..1e-6, t in 1e-7f64..1e-4, rate in 1.0f64..1e6) {
            let free = diffusion_only_concentration(N_A, D_A, r, t).unwrap();
            let bound = enzyme_lower_bound_concentration(N_A, D_A, rate / 2e23, 2e23, r, t).unwrap();
            prop_assume!(free > 0.0);
            prop_assert!(bound < free);
        }

        #[test]
        fn diffusion_argmax_within_one_step(r_nm in 50.0f64..400.0) {
            let dt = 0.5 * US;
            let g = ChannelGeometry::new([r_nm * NM, 0.0, 0.0], 10.0 * NM).unwrap();
            let t_star = diffusion_peak_time(r_nm * NM, D_A);
            let steps = (3.0 * t_star / dt).ceil() as usize + 2;
            let curve = sample_curve(&release(), &AnalyticModel::DiffusionOnly, &g, &step_grid(dt, steps)).unwrap();
            let (t_peak, _) = peak_of_curve(&curve).unwrap();
            prop_assert!((t_peak - t_star).abs() <= dt);
        }
    }
}
