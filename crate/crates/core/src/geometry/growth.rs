use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::domain::MaskedDomain;
use super::profile::ModelManifold;
use crate::error::{Error, Result};
use crate::functions::{RadialFn, Weight};

/// Estimates above this are reported as `+∞`.
pub const INFINITE_GROWTH: f64 = 1e12;

/// Strictly increasing radii on which the growth statistic is sampled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadiusSchedule {
    radii: Vec<f64>,
}

impl RadiusSchedule {
    pub fn new(radii: Vec<f64>) -> Result<Self> {
        if radii.len() < 8 {
            return Err(Error::Parameter(format!("schedule needs >= 8 radii, got {}", radii.len())));
        }
        if radii[0] <= 0.0 || radii.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Parameter("schedule radii must be positive and strictly increasing".into()));
        }
        Ok(RadiusSchedule { radii })
    }

    /// `R_j = r0 · ratio^j`, `j = 0..n`.
    pub fn geometric(r0: f64, ratio: f64, n: usize) -> Result<Self> {
        Self::new((0..n).map(|j| r0 * ratio.powi(j as i32)).collect())
    }

    /// Default schedule for a given `μ`.
    ///
    /// `μ = 0` uses `1.5^j`, 24 points. Larger `μ` need longer schedules: the
    /// polynomial part of `log vol(B_R)` only decays like `log R / R^{1-μ}`
    /// (or `1/log R` for `μ = 1`).
    pub fn default_for(mu: f64) -> Self {
        if mu == 0.0 {
            Self::geometric(1.0, 1.5, 24).unwrap()
        } else if mu < 1.0 {
            Self::geometric(1.0, 2.0, 28).unwrap()
        } else {
            Self::geometric(10.0, 10.0, 31).unwrap()
        }
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn last(&self) -> f64 {
        *self.radii.last().unwrap()
    }

    /// Index of the first radius counted in the tail (second half).
    pub fn tail_start(&self) -> usize {
        self.radii.len() / 2
    }
}

/// Something with a notion of `log vol(B_R)` about a fixed centre.
pub trait VolumeGrowth {
    fn log_volumes(&self, radii: &[f64]) -> Result<Vec<f64>>;
}

/// A model manifold with an optional weight.
pub struct WeightedModel<'a> {
    pub manifold: &'a ModelManifold,
    pub weight: Option<&'a Weight>,
}

impl VolumeGrowth for WeightedModel<'_> {
    fn log_volumes(&self, radii: &[f64]) -> Result<Vec<f64>> {
        self.manifold.log_ball_volumes(radii, self.weight)
    }
}

impl VolumeGrowth for ModelManifold {
    fn log_volumes(&self, radii: &[f64]) -> Result<Vec<f64>> {
        self.log_ball_volumes(radii, None)
    }
}

impl VolumeGrowth for MaskedDomain {
    fn log_volumes(&self, radii: &[f64]) -> Result<Vec<f64>> {
        Ok(self.log_ball_volumes(radii))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthSample {
    pub radius: f64,
    pub statistic: f64,
    /// Running infimum from the start of the tail; `None` before it.
    pub tail_inf: Option<f64>,
}

/// Finite-radius surrogate for `c_μ` (or `c^w_μ`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthEstimate {
    pub mu: f64,
    pub value: f64,
    pub window: Vec<GrowthSample>,
    pub converged: bool,
}

impl GrowthEstimate {
    pub fn is_infinite(&self) -> bool {
        self.value.is_infinite()
    }

    /// CSV with columns `R,statistic,tail_inf`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("R,statistic,tail_inf\n");
        for s in &self.window {
            let tail = s.tail_inf.map(|v| format!("{v:e}")).unwrap_or_default();
            let _ = writeln!(out, "{:e},{:e},{}", s.radius, s.statistic, tail);
        }
        out
    }

    /// A fixed value, for cases where `c_μ` is known in closed form.
    pub fn exact(mu: f64, value: f64) -> Self {
        GrowthEstimate { mu, value, window: Vec::new(), converged: true }
    }
}

/// `(1−μ) log V / R^{1−μ}` or `log V / log R`.
pub fn growth_statistic(mu: f64, radius: f64, log_volume: f64) -> f64 {
    if mu < 1.0 {
        (1.0 - mu) * log_volume / radius.powf(1.0 - mu)
    } else {
        log_volume / radius.ln()
    }
}

/// Estimates `c_μ` by the running infimum of the growth statistic over the
/// second half of the schedule.
pub fn estimate_c_mu(source: &dyn VolumeGrowth, mu: f64, schedule: &RadiusSchedule) -> Result<GrowthEstimate> {
    if !(0.0..=1.0).contains(&mu) {
        return Err(Error::Parameter(format!("mu must lie in [0, 1], got {mu}")));
    }
    let radii = schedule.radii();
    if mu == 1.0 && radii[schedule.tail_start()] <= 1.0 {
        return Err(Error::Parameter("mu = 1 needs tail radii above 1".into()));
    }
    let logs = source.log_volumes(radii)?;
    if let Some((i, _)) = logs.iter().enumerate().find(|(_, v)| **v == f64::NEG_INFINITY || v.is_nan()) {
        return Err(Error::DegenerateDomain(format!("vol(B_R) = 0 at R = {}", radii[i])));
    }
    let tail = schedule.tail_start();
    let mut running = f64::INFINITY;
    let mut window = Vec::with_capacity(radii.len());
    let mut infima = Vec::new();
    for (j, (&r, &lv)) in radii.iter().zip(&logs).enumerate() {
        let stat = growth_statistic(mu, r, lv);
        let tail_inf = if j >= tail {
            running = running.min(stat);
            infima.push(running);
            Some(running)
        } else {
            None
        };
        window.push(GrowthSample { radius: r, statistic: stat, tail_inf });
    }
    let converged = infima.len() >= 3 && {
        let last = &infima[infima.len() - 3..];
        let lo = last.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = last.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        hi - lo <= 1e-3 * hi.abs().max(1.0)
    };
    let mut value = running.max(0.0);
    if value > INFINITE_GROWTH {
        value = f64::INFINITY;
    }
    Ok(GrowthEstimate { mu, value, window, converged })
}

/// Lower Ricci bound `Ric(∂r, ∂r) >= −(m−1) B² (1 + r²)^{−α/2}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RicciProfile {
    pub alpha: f64,
    #[serde(rename = "B")]
    pub b: f64,
}

impl RicciProfile {
    pub fn new(alpha: f64, b: f64) -> Result<Self> {
        if !(0.0..=2.0).contains(&alpha) || !(b >= 0.0) {
            return Err(Error::Parameter(format!("need 0 <= alpha <= 2 and B >= 0, got {alpha}, {b}")));
        }
        Ok(RicciProfile { alpha, b })
    }
}

/// Upper bound on `c_μ(M)` implied by a radial Ricci lower bound, or `+∞` when
/// no bound is available.
pub fn c_mu_bound_from_ricci(m: usize, p: &RicciProfile, mu: f64) -> f64 {
    let m1 = (m as f64) - 1.0;
    let eq = |a: f64, b: f64| (a - b).abs() <= 1e-12;
    if p.alpha == 0.0 {
        return if eq(mu, 0.0) { m1 * p.b } else { f64::INFINITY };
    }
    if p.alpha < 2.0 {
        let half = 0.5 * p.alpha;
        if eq(mu, half) {
            m1 * p.b
        } else if mu < half {
            0.0
        } else {
            f64::INFINITY
        }
    } else if eq(mu, 1.0) {
        m1 * (1.0 + (1.0 + 4.0 * p.b * p.b).sqrt()) / 2.0 + 1.0
    } else {
        0.0
    }
}

/// Decay condition on `b`: `liminf r^μ b >= β` (or `b >= β` when `μ = 0`).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GrowthCondition {
    pub mu: f64,
    pub beta: f64,
    pub b: RadialFn,
}

impl GrowthCondition {
    pub fn new(mu: f64, beta: f64, b: RadialFn) -> Result<Self> {
        if !(0.0..=1.0).contains(&mu) {
            return Err(Error::Parameter(format!("mu must lie in [0, 1], got {mu}")));
        }
        if !(beta > 0.0) {
            return Err(Error::Parameter(format!("beta must be positive, got {beta}")));
        }
        b.validate()?;
        Ok(GrowthCondition { mu, beta, b })
    }

    /// `b ≡ β`, `μ = 0`.
    pub fn constant(beta: f64) -> Self {
        GrowthCondition { mu: 0.0, beta, b: RadialFn::constant(beta) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionBCheck {
    pub pass: bool,
    pub liminf_estimate: f64,
}

/// Checks condition (B) on a set of probe radii.
pub fn check_condition_b(gc: &GrowthCondition, probes: &[f64]) -> Result<ConditionBCheck> {
    if probes.len() < 8 || probes.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Parameter("probe radii must be increasing with >= 8 points".into()));
    }
    for &r in probes {
        if !(gc.b.value(r) > 0.0) {
            return Err(Error::Parameter(format!("b not positive at r = {r}")));
        }
    }
    if gc.mu == 0.0 {
        let inf = probes.iter().map(|&r| gc.b.value(r)).fold(f64::INFINITY, f64::min);
        return Ok(ConditionBCheck { pass: inf >= gc.beta, liminf_estimate: inf });
    }
    let tail = probes.len() / 2;
    let inf = probes[tail..]
        .iter()
        .map(|&r| r.powf(gc.mu) * gc.b.value(r))
        .fold(f64::INFINITY, f64::min);
    Ok(ConditionBCheck { pass: inf >= gc.beta * (1.0 - 1e-3), liminf_estimate: inf })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::profile::WarpingProfile;

    #[test]
    fn schedule_validation() {
        assert!(RadiusSchedule::new(vec![1.0, 2.0, 3.0]).is_err());
        assert!(RadiusSchedule::new((0..8).map(|i| 8.0 - i as f64).collect()).is_err());
        let s = RadiusSchedule::default_for(0.0);
        assert_eq!(s.radii().len(), 24);
        assert!((s.last() - 1.5f64.powi(23)).abs() < 1e-9);
    }

    #[test]
    fn euclidean_plane_mu_one() {
        let m = ModelManifold::euclidean(2);
        let e = estimate_c_mu(&m, 1.0, &RadiusSchedule::default_for(1.0)).unwrap();
        assert!((e.value - 2.0).abs() < 0.05, "{}", e.value);
        assert!(e.converged);
    }

    #[test]
    fn euclidean_half_mu_is_zero() {
        let m = ModelManifold::euclidean(3);
        let e = estimate_c_mu(&m, 0.5, &RadiusSchedule::default_for(0.5)).unwrap();
        assert!(e.value.abs() < 0.05, "{}", e.value);
    }

    #[test]
    fn hyperbolic_space_mu_zero() {
        let m = ModelManifold::hyperbolic(3);
        let e = estimate_c_mu(&m, 0.0, &RadiusSchedule::default_for(0.0)).unwrap();
        assert!((e.value - 2.0).abs() < 0.05, "{}", e.value);
        assert!(e.converged);
    }

    #[test]
    fn weighted_hyperbolic_plane() {
        let m = ModelManifold::hyperbolic(2);
        let w = Weight::cosh();
        let src = WeightedModel { manifold: &m, weight: Some(&w) };
        let e = estimate_c_mu(&src, 0.0, &RadiusSchedule::default_for(0.0)).unwrap();
        assert!((e.value - 2.0).abs() < 0.05, "{}", e.value);
    }

    #[test]
    fn hyperbolic_positive_mu_diverges() {
        let m = ModelManifold::hyperbolic(2);
        let e = estimate_c_mu(&m, 1.0, &RadiusSchedule::geometric(10.0, 10.0, 14).unwrap()).unwrap();
        assert!(e.value > 1e6);
    }

    #[test]
    fn ricci_bound_table() {
        let p = RicciProfile::new(1.0, 1.0).unwrap();
        assert_eq!(c_mu_bound_from_ricci(2, &p, 0.5), 1.0);
        assert_eq!(c_mu_bound_from_ricci(2, &p, 0.25), 0.0);
        assert_eq!(c_mu_bound_from_ricci(2, &p, 0.75), f64::INFINITY);
        let p = RicciProfile::new(2.0, 0.0).unwrap();
        assert_eq!(c_mu_bound_from_ricci(3, &p, 1.0), 3.0);
        assert_eq!(c_mu_bound_from_ricci(3, &p, 0.9), 0.0);
        let p = RicciProfile::new(0.0, 1.0).unwrap();
        assert_eq!(c_mu_bound_from_ricci(2, &p, 0.0), 1.0);
        assert_eq!(c_mu_bound_from_ricci(2, &p, 0.1), f64::INFINITY);
        assert!(RicciProfile::new(2.5, 1.0).is_err());
    }

    #[test]
    fn jacobi_consistent_with_ricci_bound() {
        let sched = RadiusSchedule::default_for(0.5);
        let m = ModelManifold::new(2, WarpingProfile::jacobi(1.0, 1.0), Some(sched.last())).unwrap();
        let e = estimate_c_mu(&m, 0.5, &sched).unwrap();
        let bound = c_mu_bound_from_ricci(2, &RicciProfile::new(1.0, 1.0).unwrap(), 0.5);
        assert!(e.value <= bound + 0.05, "{} vs {}", e.value, bound);
    }

    #[test]
    fn condition_b_examples() {
        let probes: Vec<f64> = (0..40).map(|j| 2f64.powi(j)).collect();
        let c = check_condition_b(&GrowthCondition::constant(2.0), &probes).unwrap();
        assert!(c.pass && c.liminf_estimate == 2.0);
        let gc = GrowthCondition::new(0.5, 1.0, RadialFn::Power { scale: 1.0, exponent: 0.5 }).unwrap();
        let c = check_condition_b(&gc, &probes).unwrap();
        assert!(c.pass && (c.liminf_estimate - 1.0).abs() < 1e-3);
        let gc = GrowthCondition::new(0.5, 1.0, RadialFn::ExpDecay { scale: 1.0, rate: 1.0 }).unwrap();
        let c = check_condition_b(&gc, &probes[..10]).unwrap();
        assert!(!c.pass && c.liminf_estimate < 1e-6);
    }

    #[test]
    fn degenerate_domain() {
        let d = MaskedDomain::new(5, 5, 1.0, [10.0, 10.0], vec![true; 25], None).unwrap();
        let sched = RadiusSchedule::geometric(0.1, 1.5, 10).unwrap();
        assert!(matches!(estimate_c_mu(&d, 0.0, &sched), Err(Error::DegenerateDomain(_))));
    }

    #[test]
    fn csv_export() {
        let m = ModelManifold::euclidean(2);
        let e = estimate_c_mu(&m, 0.0, &RadiusSchedule::geometric(1.0, 2.0, 8).unwrap()).unwrap();
        let csv = e.to_csv();
        assert!(csv.starts_with("R,statistic,tail_inf\n"));
        assert_eq!(csv.lines().count(), 9);
    }
}
