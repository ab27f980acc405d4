//! Executable checks of the a priori bounds, plus replays of the two proof
//! mechanisms: flow-transported volume growth and the superlevel shell
//! function.

mod flow;
mod shell;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::json;

pub use flow::{replay_flow, FlowField, FlowParams, FlowReplayTrace, LowerBoundParams};
pub use shell::{disk_rect_area, weakform_shell, ShellOptions, ShellVerdict, WeakShellTrace};

use crate::coercive::{CoerciveMap, MapKind, Nonlinearity};
use crate::digest::digest_of;
use crate::error::{Error, Result};
use crate::functions::Weight;
use crate::geometry::{GrowthCondition, GrowthEstimate, ModelManifold};
use crate::grid::{assemble_residual, CellLabel, GridDomain, GridEquation, GridSolution};
use crate::quad;
use crate::radial::{RadialSolution, SolveStatus};

/// Outcome of a bound check. `pass` is recomputable from the numeric fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremReport {
    pub theorem_id: String,
    pub claimed_bound: f64,
    pub observed_value: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub inputs_digest: String,
    /// Hypothesis checks that were run (and passed) before the bound.
    #[serde(default)]
    pub hypotheses: Vec<HypothesisRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisRecord {
    pub name: String,
    /// Smallest margin seen; the check passes when `worst >= -tolerance`.
    pub worst: f64,
    pub tolerance: f64,
}

impl TheoremReport {
    pub fn new(theorem_id: &str, claimed_bound: f64, observed_value: f64, tolerance: f64, inputs_digest: String) -> Self {
        let mut r = TheoremReport {
            theorem_id: theorem_id.into(),
            claimed_bound,
            observed_value,
            tolerance,
            pass: false,
            inputs_digest,
            hypotheses: Vec::new(),
        };
        r.pass = r.recompute_pass();
        r
    }

    pub fn recompute_pass(&self) -> bool {
        self.observed_value <= self.claimed_bound + self.tolerance
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckOptions {
    /// Tolerance on the differential inequalities.
    pub residual_tol: f64,
    /// Tolerance on the concluded bound.
    pub bound_tol: f64,
}

impl Default for CheckOptions {
    fn default() -> Self {
        // 10× the default solver tolerance
        CheckOptions { residual_tol: 1e-7, bound_tol: 1e-6 }
    }
}

/// `(k/β)·c`, with `0·∞ = 0` and `c = ∞` giving `∞`.
fn growth_bound(k: f64, beta: f64, c: f64) -> f64 {
    if c == 0.0 {
        0.0
    } else {
        k * c / beta
    }
}

fn with_boundary(bound: f64, boundary_sup: Option<f64>) -> f64 {
    boundary_sup.map_or(bound, |s| bound.max(s))
}

fn check_mu(gc: &GrowthCondition, growth: &GrowthEstimate) -> Result<()> {
    if gc.mu != growth.mu {
        return Err(Error::Parameter(format!("growth estimate has mu = {}, condition has mu = {}", growth.mu, gc.mu)));
    }
    if growth.value.is_nan() {
        return Err(Error::Parameter("growth estimate is NaN".into()));
    }
    Ok(())
}

fn map_label(a: &CoerciveMap) -> serde_json::Value {
    match &a.kind {
        MapKind::MeanCurvature => json!({"kind": "mean_curvature", "k": a.k}),
        MapKind::WeightedGraph { w } => json!({"kind": "weighted_graph", "w": w, "k": a.k}),
        MapKind::Custom(_) => json!({"kind": "custom", "k": a.k, "claims": a.claims}),
    }
}

/// A radial profile `r ↦ (u, u')` on a model manifold.
pub trait RadialProfile {
    fn manifold(&self) -> &ModelManifold;
    /// Sample radii, increasing, starting at the inner end.
    fn nodes(&self) -> Vec<f64>;
    fn eval(&self, r: f64) -> Result<(f64, f64)>;
    fn converged(&self) -> bool {
        true
    }
}

impl RadialProfile for RadialSolution {
    fn manifold(&self) -> &ModelManifold {
        RadialSolution::manifold(self)
    }

    fn nodes(&self) -> Vec<f64> {
        self.grid.clone()
    }

    fn eval(&self, r: f64) -> Result<(f64, f64)> {
        let (u, du, _) = RadialSolution::eval(self, r)?;
        Ok((u, du))
    }

    fn converged(&self) -> bool {
        self.status != SolveStatus::ToleranceFail
    }
}

type ProfileFn = dyn Fn(f64) -> (f64, f64) + Send + Sync;

/// A closed-form radial profile sampled at `n + 1` uniform radii on `[0, r_max]`.
#[derive(Clone)]
pub struct AnalyticProfile {
    pub manifold: ModelManifold,
    pub r_max: f64,
    pub n: usize,
    f: Arc<ProfileFn>,
}

impl std::fmt::Debug for AnalyticProfile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AnalyticProfile").field("r_max", &self.r_max).field("n", &self.n).finish()
    }
}

impl AnalyticProfile {
    pub fn new(manifold: ModelManifold, r_max: f64, n: usize, f: impl Fn(f64) -> (f64, f64) + Send + Sync + 'static) -> Self {
        AnalyticProfile { manifold, r_max, n, f: Arc::new(f) }
    }
}

impl RadialProfile for AnalyticProfile {
    fn manifold(&self) -> &ModelManifold {
        &self.manifold
    }

    fn nodes(&self) -> Vec<f64> {
        (0..=self.n).map(|i| self.r_max * i as f64 / self.n as f64).collect()
    }

    fn eval(&self, r: f64) -> Result<(f64, f64)> {
        Ok((self.f)(r))
    }
}

/// The discrete solution handed to the bound checks.
#[derive(Clone, Copy)]
pub enum SolutionRef<'a> {
    Radial(&'a dyn RadialProfile),
    Grid { domain: &'a GridDomain, solution: &'a GridSolution },
}

/// Worst shell average of `div A(·, u, ∇u) − b f(u)` for a radial profile.
///
/// Each shell `[r_i, r_{i+1}]` contributes
/// `(Φ(r_{i+1}) − Φ(r_i) − ∫ g^{m−1} b f(u)) / ∫ g^{m−1}` with
/// `Φ = g^{m−1} A_r`, the integrated form of the inequality.
fn radial_residual(p: &dyn RadialProfile, a: &CoerciveMap, gc: &GrowthCondition, f: &Nonlinearity) -> Result<(f64, f64)> {
    let man = p.manifold();
    let m = man.dim();
    let m1 = (m - 1) as i32;
    let dens = |r: f64| -> Result<f64> { Ok(man.warping_eval(r)?.0.powi(m1)) };
    let flux = |r: f64| -> Result<f64> {
        let d = dens(r)?;
        if d == 0.0 {
            return Ok(0.0);
        }
        let (u, du) = p.eval(r)?;
        let mut x = vec![0.0; m];
        let mut xi = vec![0.0; m];
        x[0] = r;
        xi[0] = du;
        Ok(d * a.eval_map(&x, u, &xi)?[0])
    };
    let nodes = p.nodes();
    if nodes.len() < 2 {
        return Err(Error::Parameter("radial profile needs at least two nodes".into()));
    }
    let mut worst = (f64::INFINITY, nodes[0]);
    let mut phi_a = flux(nodes[0])?;
    for w in nodes.windows(2) {
        let (ra, rb) = (w[0], w[1]);
        let phi_b = flux(rb)?;
        let src = quad::integrate(
            |r| {
                let u = p.eval(r).map(|v| v.0).unwrap_or(f64::NAN);
                dens(r).unwrap_or(f64::NAN) * gc.b.value(r) * f.eval(u)
            },
            ra,
            rb,
            1e-300,
            1e-12,
        );
        let vol = quad::integrate(|r| dens(r).unwrap_or(f64::NAN), ra, rb, 1e-300, 1e-13).value;
        let res = (phi_b - phi_a - src.value) / vol;
        if !res.is_finite() {
            return Err(Error::Numeric(format!("residual not finite on [{ra}, {rb}]")));
        }
        if res < worst.0 {
            worst = (res, 0.5 * (ra + rb));
        }
        phi_a = phi_b;
    }
    Ok(worst)
}

/// Worst cell value of the discrete `div A(∇u) − b f(u)` on a grid.
fn grid_residual(d: &GridDomain, s: &GridSolution, a: &CoerciveMap, gc: &GrowthCondition, f: &Nonlinearity) -> Result<(f64, usize)> {
    if !matches!(a.kind, MapKind::MeanCurvature) {
        return Err(Error::Parameter("grid solutions are checked against the mean curvature map only".into()));
    }
    if s.u.len() != d.len() || s.nx != d.nx || s.ny != d.ny {
        return Err(Error::Parameter("grid solution does not match the domain".into()));
    }
    // pmc with H = 0 gives the bare divergence
    let div = assemble_residual(d, &s.u, &GridEquation::pmc(0.0))?;
    let mut worst = (f64::INFINITY, 0);
    for (res, k) in div.iter().zip(d.interior_cells()) {
        let p = d.position(k);
        let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
        let v = res - gc.b.value(r) * f.eval(s.u[k]);
        if v < worst.0 {
            worst = (v, k);
        }
    }
    Ok(worst)
}

/// Checks that `u` is a supersolution of `div A(x, u, ∇u) >= b f(u)` and then
/// the bound `sup f(u) <= (k/β) c_μ` (or the max with `boundary_sup` for a
/// domain with boundary).
pub fn check_theorem_a1w(
    solution: SolutionRef<'_>,
    a: &CoerciveMap,
    gc: &GrowthCondition,
    f: &Nonlinearity,
    growth: &GrowthEstimate,
    boundary_sup: Option<f64>,
    opts: &CheckOptions,
) -> Result<TheoremReport> {
    check_mu(gc, growth)?;
    let (worst, samples) = match solution {
        SolutionRef::Radial(p) => {
            if !p.converged() {
                return Err(Error::Parameter("radial solution did not converge".into()));
            }
            let (w, at) = radial_residual(p, a, gc, f)?;
            if w < -opts.residual_tol {
                return Err(Error::Hypothesis {
                    hypothesis: "div A(x, u, grad u) >= b f(u)".into(),
                    location: format!("r = {at:.6}"),
                    value: w,
                });
            }
            let mut vals = Vec::new();
            for r in p.nodes() {
                vals.push(f.eval(p.eval(r)?.0));
            }
            (w, vals)
        }
        SolutionRef::Grid { domain, solution } => {
            if !solution.converged {
                return Err(Error::Parameter("grid solution did not converge".into()));
            }
            let (w, k) = grid_residual(domain, solution, a, gc, f)?;
            if w < -opts.residual_tol {
                let (i, j) = (k % domain.nx, k / domain.nx);
                return Err(Error::Hypothesis {
                    hypothesis: "div A(x, u, grad u) >= b f(u)".into(),
                    location: format!("cell ({i}, {j})"),
                    value: w,
                });
            }
            let vals = (0..domain.len())
                .filter(|&k| domain.mask[k] != CellLabel::Outside)
                .map(|k| f.eval(solution.u[k]))
                .collect();
            (w, vals)
        }
    };
    let observed = samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let claimed = with_boundary(growth_bound(a.k, gc.beta, growth.value), boundary_sup);
    let id = if boundary_sup.is_some() { "supersolution_bound_local" } else { "supersolution_bound" };
    let digest = digest_of(&json!({
        "theorem": id,
        "f_of_u": samples,
        "map": map_label(a),
        "condition": gc,
        "growth": growth,
        "boundary_sup": boundary_sup,
        "residual_tol": opts.residual_tol,
        "bound_tol": opts.bound_tol,
    }));
    let mut report = TheoremReport::new(id, claimed, observed, opts.bound_tol, digest);
    report.hypotheses.push(HypothesisRecord {
        name: "div A(x, u, grad u) >= b f(u)".into(),
        worst,
        tolerance: opts.residual_tol,
    });
    Ok(report)
}

/// Checks `sup (u − v) <= max{2k c_μ/(αβ), boundary_sup}` for two solutions
/// sampled at the same points.
#[allow(clippy::too_many_arguments)]
pub fn check_comparison(
    u: &[f64],
    v: &[f64],
    a: &CoerciveMap,
    gc: &GrowthCondition,
    alpha: f64,
    growth: &GrowthEstimate,
    boundary_sup: Option<f64>,
    opts: &CheckOptions,
) -> Result<TheoremReport> {
    check_mu(gc, growth)?;
    if u.len() != v.len() || u.is_empty() {
        return Err(Error::Parameter(format!("solutions sampled on different grids ({} vs {} points)", u.len(), v.len())));
    }
    if !(alpha > 0.0) {
        return Err(Error::Parameter(format!("alpha must be positive, got {alpha}")));
    }
    let observed = u.iter().zip(v).map(|(a, b)| a - b).fold(f64::NEG_INFINITY, f64::max);
    let claimed = with_boundary(growth_bound(2.0 * a.k, alpha * gc.beta, growth.value), boundary_sup);
    let id = if boundary_sup.is_some() { "comparison_local" } else { "comparison" };
    let digest = digest_of(&json!({
        "theorem": id,
        "u": u,
        "v": v,
        "map": map_label(a),
        "condition": gc,
        "alpha": alpha,
        "growth": growth,
        "boundary_sup": boundary_sup,
        "bound_tol": opts.bound_tol,
    }));
    Ok(TheoremReport::new(id, claimed, observed, opts.bound_tol, digest))
}

/// Interior values of a full-grid field, in [`GridDomain::interior_cells`]
/// order, for feeding grid pairs to [`check_comparison`].
pub fn domain_values(d: &GridDomain, field: &[f64]) -> Vec<f64> {
    (0..d.len()).filter(|&k| d.mask[k] != CellLabel::Outside).map(|k| field[k]).collect()
}

/// For a vector field `X` and a function `ψ` on a grid, checks
/// `⟨∇ψ, X⟩ >= 0` and `div_h X >= b ψ` at interior cells (central
/// differences, `div_h X = e^h div(e^{−h} X)`), then the bound
/// `sup ψ <= max{(k/β) c^w_μ, boundary_sup}` with `k = max |X|`.
#[allow(clippy::too_many_arguments)]
pub fn check_divx_theorem(
    domain: &GridDomain,
    x: &[[f64; 2]],
    psi: &[f64],
    h: &Weight,
    gc: &GrowthCondition,
    growth: &GrowthEstimate,
    boundary_sup: Option<f64>,
    opts: &CheckOptions,
) -> Result<TheoremReport> {
    check_mu(gc, growth)?;
    let n = domain.len();
    if x.len() != n || psi.len() != n {
        return Err(Error::Parameter("fields do not match the grid".into()));
    }
    let interior = domain.interior_cells();
    if interior.is_empty() {
        return Err(Error::DegenerateDomain("no interior cells".into()));
    }
    let sp = domain.spacing;
    let nx = domain.nx;
    let radius = |k: usize| {
        let p = domain.position(k);
        (p[0] * p[0] + p[1] * p[1]).sqrt()
    };
    let wx = |k: usize, c: usize| h.w(radius(k)) * x[k][c];
    let mut worst_grad = (f64::INFINITY, 0);
    let mut worst_div = (f64::INFINITY, 0);
    for &k in &interior {
        let (e, w, nn, s) = (k + 1, k - 1, k + nx, k - nx);
        let gx = (psi[e] - psi[w]) / (2.0 * sp);
        let gy = (psi[nn] - psi[s]) / (2.0 * sp);
        let g = gx * x[k][0] + gy * x[k][1];
        if g < worst_grad.0 {
            worst_grad = (g, k);
        }
        let div = ((wx(e, 0) - wx(w, 0)) + (wx(nn, 1) - wx(s, 1))) / (2.0 * sp) / h.w(radius(k));
        let d = div - gc.b.value(radius(k)) * psi[k];
        if d < worst_div.0 {
            worst_div = (d, k);
        }
    }
    for (name, (v, k)) in [("<grad psi, X> >= 0", worst_grad), ("div_h X >= b psi", worst_div)] {
        if v < -opts.residual_tol {
            return Err(Error::Hypothesis {
                hypothesis: name.into(),
                location: format!("cell ({}, {})", k % nx, k / nx),
                value: v,
            });
        }
    }
    let cells: Vec<usize> = (0..n).filter(|&k| domain.mask[k] != CellLabel::Outside).collect();
    let k_sup = cells.iter().map(|&k| x[k][0].hypot(x[k][1])).fold(0.0, f64::max);
    let observed = cells.iter().map(|&k| psi[k]).fold(f64::NEG_INFINITY, f64::max);
    let claimed = with_boundary(growth_bound(k_sup, gc.beta, growth.value), boundary_sup);
    let id = if boundary_sup.is_some() { "divergence_bound_local" } else { "divergence_bound" };
    let digest = digest_of(&json!({
        "theorem": id,
        "domain": domain,
        "x": x,
        "psi": psi,
        "h": h,
        "condition": gc,
        "growth": growth,
        "boundary_sup": boundary_sup,
        "residual_tol": opts.residual_tol,
        "bound_tol": opts.bound_tol,
    }));
    let mut report = TheoremReport::new(id, claimed, observed, opts.bound_tol, digest);
    report.hypotheses.push(HypothesisRecord { name: "<grad psi, X> >= 0".into(), worst: worst_grad.0, tolerance: opts.residual_tol });
    report.hypotheses.push(HypothesisRecord { name: "div_h X >= b psi".into(), worst: worst_div.0, tolerance: opts.residual_tol });
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functions::RadialFn;

    fn euclid2() -> ModelManifold {
        ModelManifold::euclidean(2)
    }

    #[test]
    fn zero_is_a_supersolution_with_zero_bound() {
        let p = AnalyticProfile::new(euclid2(), 5.0, 50, |_| (0.0, 0.0));
        let gc = GrowthCondition::constant(1.0);
        let rep = check_theorem_a1w(
            SolutionRef::Radial(&p),
            &CoerciveMap::mean_curvature(),
            &gc,
            &Nonlinearity::identity(),
            &GrowthEstimate::exact(0.0, 0.0),
            None,
            &CheckOptions::default(),
        )
        .unwrap();
        assert_eq!(rep.claimed_bound, 0.0);
        assert_eq!(rep.observed_value, 0.0);
        assert!(rep.pass);
    }

    #[test]
    fn quadratic_profile_is_not_a_supersolution() {
        // Lu − u for u = 0.1 r² is positive near the pole and turns negative
        // once the flux saturates (near r ≈ 1.9)
        let p = AnalyticProfile::new(euclid2(), 3.0, 300, |r| (0.1 * r * r, 0.2 * r));
        let e = check_theorem_a1w(
            SolutionRef::Radial(&p),
            &CoerciveMap::mean_curvature(),
            &GrowthCondition::constant(1.0),
            &Nonlinearity::identity(),
            &GrowthEstimate::exact(0.0, 0.0),
            Some(0.9),
            &CheckOptions::default(),
        )
        .unwrap_err();
        match e {
            Error::Hypothesis { location, value, .. } => {
                assert!(value < 0.0);
                assert!(location.starts_with("r = "), "{location}");
            }
            other => panic!("{other:?}"),
        }
        let p = AnalyticProfile::new(euclid2(), 1.0, 100, |r| (-0.1 * r * r, -0.2 * r));
        let e = check_theorem_a1w(
            SolutionRef::Radial(&p),
            &CoerciveMap::mean_curvature(),
            &GrowthCondition::constant(1.0),
            &Nonlinearity::identity(),
            &GrowthEstimate::exact(0.0, 0.0),
            Some(0.0),
            &CheckOptions::default(),
        )
        .unwrap_err();
        match e {
            Error::Hypothesis { location, .. } => {
                let r: f64 = location[4..].parse().unwrap();
                assert!(r < 0.02, "{location}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn mismatched_mu_is_rejected() {
        let p = AnalyticProfile::new(euclid2(), 1.0, 10, |_| (0.0, 0.0));
        let e = check_theorem_a1w(
            SolutionRef::Radial(&p),
            &CoerciveMap::mean_curvature(),
            &GrowthCondition::constant(1.0),
            &Nonlinearity::identity(),
            &GrowthEstimate::exact(1.0, 0.0),
            None,
            &CheckOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(e, Error::Parameter(_)));
    }

    #[test]
    fn comparison_claimed_bound() {
        let gc = GrowthCondition::new(1.0, 1.0, RadialFn::Power { scale: 1.0, exponent: 1.0 }).unwrap();
        let u = [0.0, 1.0];
        let rep = check_comparison(
            &u,
            &u,
            &CoerciveMap::mean_curvature(),
            &gc,
            1.0,
            &GrowthEstimate::exact(1.0, 2.0),
            None,
            &CheckOptions::default(),
        )
        .unwrap();
        assert_eq!(rep.claimed_bound, 4.0);
        assert!(rep.pass);
        let e = check_comparison(
            &u,
            &u[..1],
            &CoerciveMap::mean_curvature(),
            &gc,
            1.0,
            &GrowthEstimate::exact(1.0, 2.0),
            None,
            &CheckOptions::default(),
        );
        assert!(matches!(e, Err(Error::Parameter(_))));
    }

    #[test]
    fn report_pass_is_replayable() {
        let rep = TheoremReport::new("x", 1.0, 1.0 + 5e-7, 1e-6, "d".into());
        assert!(rep.pass);
        let back: TheoremReport = serde_json::from_str(&rep.to_json()).unwrap();
        assert_eq!(back.recompute_pass(), back.pass);
        assert!(!TheoremReport::new("x", 1.0, 1.0 + 2e-6, 1e-6, "d".into()).pass);
    }

    #[test]
    fn divx_trivial_and_counterexample() {
        let d = GridDomain::unit_square(11).unwrap();
        let gc = GrowthCondition::constant(1.0);
        let zero = vec![[0.0, 0.0]; d.len()];
        let psi = vec![-1.0; d.len()];
        let rep = check_divx_theorem(
            &d,
            &zero,
            &psi,
            &Weight::unit(),
            &gc,
            &GrowthEstimate::exact(0.0, 0.0),
            Some(-1.0),
            &CheckOptions::default(),
        )
        .unwrap();
        assert!(rep.pass);
        // a bump of height 2 with boundary value 1 cannot satisfy div X >= ψ with X = 0
        let bump = d.sample(|x, y| 1.0 + 16.0 * x * (1.0 - x) * y * (1.0 - y));
        let e = check_divx_theorem(
            &d,
            &zero,
            &bump,
            &Weight::unit(),
            &gc,
            &GrowthEstimate::exact(0.0, 0.0),
            Some(1.0),
            &CheckOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(e, Error::Hypothesis { ref hypothesis, .. } if hypothesis.starts_with("div_h")), "{e:?}");
    }
}
