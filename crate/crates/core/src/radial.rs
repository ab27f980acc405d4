//! Radial reduction of the capillary, prescribed mean curvature and
//! equidistant-graph equations on model manifolds.
//!
//! For a radial graph `u(r)` all three equations take the form
//! `(ρ φ_w(u'))' = ρ · s(r, u)` with `ρ = w g^{m−1}` and
//! `φ_w(p) = w p / √(1 + w² p²)`. The solver integrates the flux
//! `F = ρ φ_w(u')` together with the two deficits `D± = ρ ∓ F`. Carrying the
//! deficits as separate unknowns keeps `1 − |F|/ρ` accurate down to the
//! smallest representable values, which is what separates an entire graph at
//! the critical curvature from one whose gradient blows up.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functions::{RadialFn, Weight};
use crate::geometry::ModelManifold;
use crate::ode::{self, Control, DenseStep, DenseTrajectory, OdeOptions};
use crate::quad;

/// Starting radius for shooting from the pole.
pub const POLE_OFFSET: f64 = 1e-6;
/// Gradient blow-up is declared once `|F|/ρ >= 1 − SATURATION`.
pub const SATURATION: f64 = 1e-8;
/// Default radius up to which entire solutions are followed.
pub const DEFAULT_R_CAP: f64 = 40.0;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RadialEquation {
    /// `div(∇u/W) = b u`.
    Capillary { b: RadialFn },
    /// `div(∇u/W) = m H`.
    Pmc {
        #[serde(rename = "H")]
        h: RadialFn,
    },
    /// `w^{-1} div(w² ∇u / √(1 + w²|∇u|²)) = m H`.
    Equidistant {
        weight: Weight,
        #[serde(rename = "H")]
        h: RadialFn,
    },
}

impl RadialEquation {
    pub fn capillary(b: f64) -> Self {
        RadialEquation::Capillary { b: RadialFn::constant(b) }
    }

    pub fn pmc(h: f64) -> Self {
        RadialEquation::Pmc { h: RadialFn::constant(h) }
    }

    pub fn equidistant(weight: Weight, h: f64) -> Self {
        RadialEquation::Equidistant { weight, h: RadialFn::constant(h) }
    }

    pub fn weight(&self) -> Option<&Weight> {
        match self {
            RadialEquation::Equidistant { weight, .. } => Some(weight),
            _ => None,
        }
    }

    fn source(&self, m: f64, r: f64, u: f64) -> f64 {
        match self {
            RadialEquation::Capillary { b } => b.value(r) * u,
            RadialEquation::Pmc { h } | RadialEquation::Equidistant { h, .. } => m * h.value(r),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryData {
    /// Value at the pole; `u'(0) = 0` is implied.
    Shoot { u0: f64 },
    /// `inner` is required when `r_in > 0`.
    Dirichlet { inner: Option<f64>, outer: f64 },
}

#[derive(Debug, Clone)]
pub struct RadialProblem {
    pub manifold: ModelManifold,
    pub equation: RadialEquation,
    pub r_in: f64,
    pub r_out: f64,
    pub data: BoundaryData,
}

impl RadialProblem {
    pub fn shoot(manifold: ModelManifold, equation: RadialEquation, u0: f64, r_out: f64) -> Self {
        RadialProblem { manifold, equation, r_in: 0.0, r_out, data: BoundaryData::Shoot { u0 } }
    }

    pub fn ball(manifold: ModelManifold, equation: RadialEquation, radius: f64, boundary: f64) -> Self {
        RadialProblem {
            manifold,
            equation,
            r_in: 0.0,
            r_out: radius,
            data: BoundaryData::Dirichlet { inner: None, outer: boundary },
        }
    }

    pub fn annulus(manifold: ModelManifold, equation: RadialEquation, r_in: f64, r_out: f64, inner: f64, outer: f64) -> Self {
        RadialProblem {
            manifold,
            equation,
            r_in,
            r_out,
            data: BoundaryData::Dirichlet { inner: Some(inner), outer },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r_in >= 0.0) || !(self.r_out > self.r_in) || !self.r_out.is_finite() {
            return Err(Error::Parameter(format!("need 0 <= r_in < r_out, got [{}, {}]", self.r_in, self.r_out)));
        }
        if self.r_out > self.manifold.max_radius() {
            return Err(Error::Range { r: self.r_out, max: self.manifold.max_radius() });
        }
        match self.data {
            BoundaryData::Shoot { u0 } => {
                if self.r_in != 0.0 {
                    return Err(Error::Parameter("shooting data requires r_in = 0".into()));
                }
                finite(u0, "u0")
            }
            BoundaryData::Dirichlet { inner, outer } => {
                finite(outer, "outer boundary value")?;
                match (self.r_in > 0.0, inner) {
                    (true, Some(a)) => finite(a, "inner boundary value"),
                    (true, None) => Err(Error::Parameter("annulus needs an inner boundary value".into())),
                    (false, Some(_)) => Err(Error::Parameter("a ball has no inner boundary".into())),
                    (false, None) => Ok(()),
                }
            }
        }
    }
}

fn finite(v: f64, what: &str) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::Parameter(format!("{what} must be finite, got {v}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum SolveStatus {
    Complete,
    Blowup { r_star: f64 },
    ToleranceFail,
}

#[derive(Debug, Clone)]
pub struct RadialSolution {
    pub grid: Vec<f64>,
    pub u: Vec<f64>,
    pub du: Vec<f64>,
    pub flux: Vec<f64>,
    /// `F/ρ = φ_w(u')` on the grid.
    pub q: Vec<f64>,
    /// `1 − |q|`, computed from the deficits rather than from `q`.
    pub margin: Vec<f64>,
    pub status: SolveStatus,
    pub residual_norm: f64,
    /// Accumulated local error estimate of `u`.
    pub error_estimate: f64,
    trajectory: DenseTrajectory,
    ctx: Context,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RadialSummary {
    pub status: String,
    pub r_star: Option<f64>,
    pub residual_norm: f64,
}

impl RadialSolution {
    pub fn r_star(&self) -> Option<f64> {
        match self.status {
            SolveStatus::Blowup { r_star } => Some(r_star),
            _ => None,
        }
    }

    pub fn is_complete(&self) -> bool {
        self.status == SolveStatus::Complete
    }

    pub fn r_end(&self) -> f64 {
        *self.grid.last().unwrap()
    }

    pub fn sup_abs_u(&self) -> f64 {
        self.u.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    /// `(u, u', F)` at any `r` inside the solved range, from the dense output.
    pub fn eval(&self, r: f64) -> Result<(f64, f64, f64)> {
        if r < self.grid[0] || r > self.r_end() {
            return Err(Error::Range { r, max: self.r_end() });
        }
        if r < self.trajectory.t_start() {
            // Inside the pole offset the quadratic series is exact to O(ε⁴).
            let (u0, du0, f0) = (self.u[1], self.du[1], self.flux[1]);
            let eps = self.trajectory.t_start();
            let t = r / eps;
            return Ok((u0 - 0.5 * du0 * eps * (1.0 - t * t), du0 * t, f0 * t.powi(self.ctx.m as i32)));
        }
        let y = self.trajectory.eval(r).ok_or(Error::Range { r, max: self.r_end() })?;
        Ok((y[0], self.ctx.du(r, &y)?, y[1]))
    }

    pub fn manifold(&self) -> &ModelManifold {
        &self.ctx.manifold
    }

    pub fn equation(&self) -> &RadialEquation {
        &self.ctx.equation
    }

    /// Source term `s(r, u(r))` of the solved equation, so that `F' = ρ s`.
    pub fn source_at(&self, r: f64) -> Result<f64> {
        let (u, _, _) = self.eval(r)?;
        Ok(self.ctx.source(r, u))
    }

    pub fn summary(&self) -> RadialSummary {
        let status = match self.status {
            SolveStatus::Complete => "complete",
            SolveStatus::Blowup { .. } => "blowup",
            SolveStatus::ToleranceFail => "tolerance_fail",
        };
        RadialSummary { status: status.into(), r_star: self.r_star(), residual_norm: self.residual_norm }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("r,u,du,flux\n");
        for i in 0..self.grid.len() {
            s.push_str(&format!("{:e},{:e},{:e},{:e}\n", self.grid[i], self.u[i], self.du[i], self.flux[i]));
        }
        s
    }
}

/// Everything the right-hand side needs; cheap to clone.
#[derive(Debug, Clone)]
struct Context {
    manifold: ModelManifold,
    equation: RadialEquation,
    m: usize,
}

impl Context {
    fn new(manifold: &ModelManifold, equation: &RadialEquation) -> Self {
        Context { manifold: manifold.clone(), equation: equation.clone(), m: manifold.dim() }
    }

    fn log_w(&self, r: f64) -> f64 {
        self.equation.weight().map_or(0.0, |w| w.log_w(r))
    }

    fn w(&self, r: f64) -> f64 {
        self.equation.weight().map_or(1.0, |w| w.w(r))
    }

    /// `ρ = w g^{m−1}`.
    fn rho(&self, r: f64) -> Result<f64> {
        let lg = self.manifold.log_g(r)?;
        Ok((self.log_w(r) + (self.m - 1) as f64 * lg).exp())
    }

    /// `(log ρ)'` split into a limit part and a remainder.
    fn log_rho_split(&self, r: f64) -> Result<(f64, f64)> {
        let (a, b) = self.manifold.log_derivative_split(r)?;
        let (aw, bw) = self.equation.weight().map_or((0.0, 0.0), |w| w.dlog_w_split(r));
        let m1 = (self.m - 1) as f64;
        Ok((m1 * a + aw, m1 * b + bw))
    }

    fn source(&self, r: f64, u: f64) -> f64 {
        self.equation.source(self.m as f64, r, u)
    }

    /// `u' = F / (w √(D₊ D₋))`, saturating instead of dividing by zero.
    fn du_from(&self, r: f64, rho: f64, y: &[f64]) -> f64 {
        let root = y[2].max(0.0).sqrt() * y[3].max(0.0).sqrt();
        y[1] / (self.w(r) * root.max(1e-20 * rho))
    }

    fn du(&self, r: f64, y: &[f64]) -> Result<f64> {
        Ok(self.du_from(r, self.rho(r)?, y))
    }

    fn rhs(&self, r: f64, y: &[f64], dy: &mut [f64]) {
        let (rho, split) = match (self.rho(r), self.log_rho_split(r)) {
            (Ok(rho), Ok(split)) => (rho, split),
            _ => {
                dy.fill(f64::NAN);
                return;
            }
        };
        let src = self.source(r, y[0]);
        dy[0] = self.du_from(r, rho, y);
        dy[1] = rho * src;
        dy[2] = rho * ((split.0 - src) + split.1);
        dy[3] = rho * ((split.0 + src) + split.1);
    }

    /// Rate of change of the relevant deficit relative to `ρ`; negative means
    /// the flux is being pushed towards saturation.
    fn deficit_trend(&self, r: f64, u: f64, upper: bool) -> Result<(f64, f64)> {
        let (a, b) = self.log_rho_split(r)?;
        let src = self.source(r, u);
        let trend = if upper { (a - src) + b } else { (a + src) + b };
        Ok((trend, 1e-12 * (a.abs() + b.abs() + src.abs())))
    }
}

/// Integration tolerances for the shooting solvers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShootOptions {
    /// Relative tolerance of the adaptive integrator.
    pub rtol: f64,
    /// Absolute tolerance on the blow-up radius.
    pub r_star_tol: f64,
}

impl Default for ShootOptions {
    fn default() -> Self {
        ShootOptions { rtol: 1e-10, r_star_tol: 1e-10 }
    }
}

impl ShootOptions {
    pub fn with_tol(tol: f64) -> Self {
        ShootOptions { rtol: tol, r_star_tol: tol }
    }
}

/// Pole series `u(ε) = u0 + s0 ε²/(2 m w0)`, `F(ε) = w0 s0 ε^m / m`.
fn pole_state(ctx: &Context, u0: f64, eps: f64) -> Result<[f64; 4]> {
    let m = ctx.m as f64;
    let w0 = ctx.w(0.0);
    let s0 = ctx.source(0.0, u0);
    let rho = ctx.rho(eps)?;
    let u = u0 + s0 * eps * eps / (2.0 * m * w0);
    let f = w0 * s0 * eps.powi(ctx.m as i32) / m;
    Ok([u, f, rho - f, rho + f])
}

fn integrate_from(ctx: Context, r0: f64, y0: [f64; 4], r_end: f64, opts: ShootOptions) -> Result<RadialSolution> {
    if !(opts.rtol > 0.0) || !(opts.r_star_tol > 0.0) {
        return Err(Error::Parameter("tolerances must be positive".into()));
    }
    let ode_opts = OdeOptions {
        rtol: opts.rtol,
        atol: opts.rtol * 1e-30,
        h0: Some(r0.min(r_end - r0) * 0.1),
        ..Default::default()
    };
    let mut steps: Vec<DenseStep> = Vec::new();
    let mut status = SolveStatus::Complete;
    let mut observer_err: Option<Error> = None;
    let result = ode::integrate(
        |r, y, dy| ctx.rhs(r, y, dy),
        r0,
        &y0,
        r_end,
        &ode_opts,
        |st| {
            steps.push(st.clone());
            match detect_blowup(&ctx, st, opts.r_star_tol) {
                Ok(Some(r_star)) => {
                    status = SolveStatus::Blowup { r_star };
                    Control::Stop
                }
                Ok(None) => Control::Continue,
                Err(e) => {
                    observer_err = Some(e);
                    Control::Stop
                }
            }
        },
    );
    if let Some(e) = observer_err {
        return Err(e);
    }
    match result {
        Ok(_) => {}
        Err(Error::StepUnderflow { .. }) | Err(Error::NoConvergence(_)) => status = SolveStatus::ToleranceFail,
        Err(e) => return Err(e),
    }
    if steps.is_empty() {
        return Err(Error::Numeric(format!("no step accepted from r = {r0}")));
    }
    assemble(ctx, r0, y0, steps, status)
}

/// Looks for saturation inside an accepted step. Returns the blow-up radius.
fn detect_blowup(ctx: &Context, st: &DenseStep, tol: f64) -> Result<Option<f64>> {
    let t1 = st.t1();
    let rho1 = ctx.rho(t1)?;
    let upper = st.y1[2] <= st.y1[3];
    let idx = if upper { 2 } else { 3 };
    let s1 = st.y1[idx] / rho1;
    if s1 > SATURATION {
        return Ok(None);
    }
    let level = |t: f64| -> Result<f64> { Ok(st.eval_component(t, idx) / ctx.rho(t)?) };
    let s0 = level(st.t0)?;
    if s1 <= 0.0 {
        // the deficit actually vanished inside the step
        let target = if s0 > SATURATION { SATURATION } else { 0.0 };
        return bisect_level(&level, st.t0, t1, target, tol).map(Some);
    }
    let (trend, noise) = ctx.deficit_trend(t1, st.y1[0], upper)?;
    if trend >= -noise {
        // saturated but the deficit is not shrinking: entire-graph regime
        return Ok(None);
    }
    if s0 > SATURATION {
        bisect_level(&level, st.t0, t1, SATURATION, tol).map(Some)
    } else {
        Ok(Some(st.t0))
    }
}

fn bisect_level(level: &dyn Fn(f64) -> Result<f64>, mut lo: f64, mut hi: f64, target: f64, tol: f64) -> Result<f64> {
    // level(lo) > target >= level(hi)
    while hi - lo > tol.max(4.0 * f64::EPSILON * hi) {
        let mid = 0.5 * (lo + hi);
        if level(mid)? > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

fn assemble(ctx: Context, r0: f64, y0: [f64; 4], mut steps: Vec<DenseStep>, status: SolveStatus) -> Result<RadialSolution> {
    let r_cut = match status {
        SolveStatus::Blowup { r_star } => Some(r_star),
        _ => None,
    };
    if let Some(rc) = r_cut {
        while steps.len() > 1 && steps.last().unwrap().t0 >= rc {
            steps.pop();
        }
    }
    let trajectory = DenseTrajectory { steps };
    let mut grid = vec![r0];
    let mut ys = vec![y0.to_vec()];
    for st in &trajectory.steps {
        let t1 = st.t1();
        match r_cut {
            Some(rc) if t1 >= rc => {
                if rc > *grid.last().unwrap() {
                    grid.push(rc);
                    ys.push(st.eval(rc));
                }
                break;
            }
            _ => {
                grid.push(t1);
                ys.push(st.y1.clone());
            }
        }
    }
    let n = grid.len();
    let (mut u, mut du, mut flux, mut q, mut margin) =
        (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for (r, y) in grid.iter().zip(&ys) {
        let rho = ctx.rho(*r)?;
        u.push(y[0]);
        du.push(ctx.du_from(*r, rho, y));
        flux.push(y[1]);
        q.push(y[1] / rho);
        margin.push(y[2].min(y[3]) / rho);
    }
    let error_estimate = trajectory.steps.iter().map(|s| s.err[0]).sum();
    let mut sol = RadialSolution {
        grid,
        u,
        du,
        flux,
        q,
        margin,
        status,
        residual_norm: 0.0,
        error_estimate,
        trajectory,
        ctx,
    };
    sol.residual_norm = flux_residual(&sol)?;
    Ok(sol)
}

/// `max_i |F(r_{i+1}) − F(r_i) − ∫ ρ s(r, u) dr| / (1 + max |F|)`, with the
/// integral taken by adaptive quadrature over the dense solution.
fn flux_residual(sol: &RadialSolution) -> Result<f64> {
    let ctx = &sol.ctx;
    let scale = 1.0 + sol.flux.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let mut worst = 0.0f64;
    for i in 0..sol.grid.len() - 1 {
        let (a, b) = (sol.grid[i], sol.grid[i + 1]);
        let integrand = |r: f64| {
            let u = sol.trajectory.eval_component(r, 0).unwrap_or(f64::NAN);
            ctx.rho(r).unwrap_or(f64::NAN) * ctx.source(r, u)
        };
        let int = quad::integrate(integrand, a, b, 1e-15 * scale, 1e-13);
        let res = (sol.flux[i + 1] - sol.flux[i] - int.value).abs();
        if !res.is_finite() {
            return Err(Error::Numeric(format!("flux residual not finite on [{a}, {b}]")));
        }
        worst = worst.max(res / scale);
    }
    Ok(worst)
}

fn shoot_pole(manifold: &ModelManifold, equation: &RadialEquation, u0: f64, r_max: f64, opts: ShootOptions) -> Result<RadialSolution> {
    if !(r_max > POLE_OFFSET) {
        return Err(Error::Parameter(format!("r_max must exceed {POLE_OFFSET}, got {r_max}")));
    }
    if r_max > manifold.max_radius() {
        return Err(Error::Range { r: r_max, max: manifold.max_radius() });
    }
    let ctx = Context::new(manifold, equation);
    let y0 = pole_state(&ctx, u0, POLE_OFFSET)?;
    let mut sol = integrate_from(ctx, POLE_OFFSET, y0, r_max, opts)?;
    // report the pole value itself as the first sample
    sol.grid.insert(0, 0.0);
    sol.u.insert(0, u0);
    sol.du.insert(0, 0.0);
    sol.flux.insert(0, 0.0);
    sol.q.insert(0, 0.0);
    sol.margin.insert(0, 1.0);
    Ok(sol)
}

fn shoot_data(p: &RadialProblem) -> Result<f64> {
    p.validate()?;
    match p.data {
        BoundaryData::Shoot { u0 } => Ok(u0),
        _ => Err(Error::Parameter("problem has Dirichlet data; use solve_capillary_bvp".into())),
    }
}

/// Shoots the capillary equation from the pole up to `r_max` (blow-up stops early).
pub fn shoot_capillary(p: &RadialProblem, r_max: f64, tol: f64) -> Result<RadialSolution> {
    let u0 = shoot_data(p)?;
    if !matches!(p.equation, RadialEquation::Capillary { .. }) {
        return Err(Error::Parameter("shoot_capillary needs a capillary equation".into()));
    }
    shoot_pole(&p.manifold, &p.equation, u0, r_max, ShootOptions { rtol: 1e-10, r_star_tol: tol })
}

/// Shoots the prescribed mean curvature (optionally equidistant) equation.
pub fn shoot_cmc(p: &RadialProblem, r_max: f64) -> Result<RadialSolution> {
    let u0 = shoot_data(p)?;
    if matches!(p.equation, RadialEquation::Capillary { .. }) {
        return Err(Error::Parameter("shoot_cmc needs a pmc or equidistant equation".into()));
    }
    shoot_pole(&p.manifold, &p.equation, u0, r_max, ShootOptions::default())
}

/// Largest radius of a radial graph of constant mean curvature `H` over the
/// model; `f64::INFINITY` when no blow-up occurs below `r_cap`.
pub fn max_graph_radius(manifold: &ModelManifold, h: f64, weight: Option<&Weight>, r_cap: f64) -> Result<f64> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::Parameter(format!("H must be positive, got {h}")));
    }
    if !(r_cap > 0.0) {
        return Err(Error::Parameter(format!("r_cap must be positive, got {r_cap}")));
    }
    let equation = match weight {
        Some(w) => RadialEquation::equidistant(w.clone(), h),
        None => RadialEquation::pmc(h),
    };
    let sol = shoot_pole(manifold, &equation, 0.0, r_cap, ShootOptions { rtol: 1e-10, r_star_tol: 1e-9 })?;
    match sol.status {
        SolveStatus::Blowup { r_star } => Ok(r_star),
        SolveStatus::Complete => Ok(f64::INFINITY),
        SolveStatus::ToleranceFail => Err(Error::NoConvergence(format!(
            "integration for H = {h} failed at r = {}",
            sol.r_end()
        ))),
    }
}

/// Bracket around the largest `H` that still admits an entire graph.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalH {
    /// Largest probed `H` with no blow-up below `r_cap`.
    pub lo: f64,
    /// Smallest probed `H` with blow-up.
    pub hi: f64,
    pub estimate: f64,
    pub probes: usize,
}

/// Default search interval for [`critical_h`].
pub const DEFAULT_H_BRACKET: (f64, f64) = (0.0, 2.0);

pub fn critical_h(manifold: &ModelManifold, weight: Option<&Weight>, r_cap: f64, tol: f64) -> Result<CriticalH> {
    critical_h_in(manifold, weight, r_cap, tol, DEFAULT_H_BRACKET)
}

/// Bisection on `H` between existence (`max_graph_radius = ∞`) and blow-up.
pub fn critical_h_in(
    manifold: &ModelManifold,
    weight: Option<&Weight>,
    r_cap: f64,
    tol: f64,
    bracket: (f64, f64),
) -> Result<CriticalH> {
    let (mut lo, mut hi) = bracket;
    if !(tol > 0.0) || !(hi > lo) || lo < 0.0 {
        return Err(Error::Parameter(format!("need tol > 0 and 0 <= lo < hi, got tol {tol}, [{lo}, {hi}]")));
    }
    let exists = |h: f64| -> Result<bool> {
        if h == 0.0 {
            return Ok(true);
        }
        Ok(max_graph_radius(manifold, h, weight, r_cap)?.is_infinite())
    };
    let mut probes = 2;
    if !exists(lo)? || exists(hi)? {
        return Err(Error::Bracket { lo, hi });
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        probes += 1;
        if exists(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(CriticalH { lo, hi, estimate: 0.5 * (lo + hi), probes })
}

/// Result of one shot in the Dirichlet solver: `u(r_out) − target`, or
/// a signed infinity when the shot blew up before `r_out`.
fn miss(sol: &RadialSolution, target: f64) -> f64 {
    match sol.status {
        SolveStatus::Complete => sol.u.last().unwrap() - target,
        _ => {
            let q = *sol.q.last().unwrap();
            if q >= 0.0 {
                f64::INFINITY
            } else {
                f64::NEG_INFINITY
            }
        }
    }
}

/// Solves the Dirichlet problem for the capillary equation by shooting.
///
/// On a ball the unknown is the pole value, on an annulus the inner flux
/// ratio `q = tanh θ`. The outer value is increasing in either unknown when
/// `b > 0`; the root is found by the Illinois variant of regula falsi,
/// falling back to bisection when a shot blows up.
pub fn solve_capillary_bvp(p: &RadialProblem, tol: f64) -> Result<RadialSolution> {
    p.validate()?;
    if !(tol > 0.0) {
        return Err(Error::Parameter(format!("tol must be positive, got {tol}")));
    }
    let b = match &p.equation {
        RadialEquation::Capillary { b } => b,
        _ => return Err(Error::Parameter("solve_capillary_bvp needs a capillary equation".into())),
    };
    let (inner, outer) = match p.data {
        BoundaryData::Dirichlet { inner, outer } => (inner, outer),
        BoundaryData::Shoot { .. } => return Err(Error::Parameter("problem has shooting data".into())),
    };
    for r in [p.r_in, 0.5 * (p.r_in + p.r_out), p.r_out] {
        if !(b.value(r) > 0.0) {
            return Err(Error::Parameter(format!("capillary coefficient must be positive, b({r}) = {}", b.value(r))));
        }
    }
    let opts = ShootOptions::with_tol((tol * 1e-2).clamp(1e-13, 1e-9));
    let ctx = Context::new(&p.manifold, &p.equation);
    match inner {
        None => {
            let shot = |u0: f64| shoot_pole(&p.manifold, &p.equation, u0, p.r_out, opts);
            let (lo, hi) = (outer.min(0.0), outer.max(0.0));
            find_root(shot, outer, lo, hi, tol)
        }
        Some(a) => {
            let r0 = p.r_in;
            let rho = ctx.rho(r0)?;
            let shot = |theta: f64| {
                let (dp, dm) = (2.0 / (1.0 + (2.0 * theta).exp()), 2.0 / (1.0 + (-2.0 * theta).exp()));
                let y0 = [a, rho * theta.tanh(), rho * dp, rho * dm];
                integrate_from(ctx.clone(), r0, y0, p.r_out, opts)
            };
            find_root(shot, outer, -1.0, 1.0, tol)
        }
    }
}

fn find_root(shot: impl Fn(f64) -> Result<RadialSolution>, target: f64, mut lo: f64, mut hi: f64, tol: f64) -> Result<RadialSolution> {
    let mut s_lo = shot(lo)?;
    let mut g_lo = miss(&s_lo, target);
    if g_lo.abs() <= tol {
        return Ok(s_lo);
    }
    let mut s_hi = shot(hi)?;
    let mut g_hi = miss(&s_hi, target);
    if g_hi.abs() <= tol {
        return Ok(s_hi);
    }
    let mut widen = 0;
    while !(g_lo < 0.0 && g_hi > 0.0) {
        widen += 1;
        if widen > 60 || g_lo.is_nan() || g_hi.is_nan() {
            return Err(Error::NoConvergence(format!(
                "shooting window exhausted: miss {g_lo} at {lo}, {g_hi} at {hi}"
            )));
        }
        let w = (hi - lo).max(1.0);
        if g_lo >= 0.0 {
            lo -= w;
            s_lo = shot(lo)?;
            g_lo = miss(&s_lo, target);
        }
        if g_hi <= 0.0 {
            hi += w;
            s_hi = shot(hi)?;
            g_hi = miss(&s_hi, target);
        }
    }
    // Illinois regula falsi; the formula is written symmetrically so that the
    // iteration for data −c is the exact mirror of the one for c.
    let (mut f_lo, mut f_hi) = (g_lo, g_hi);
    let mut side = 0i8;
    for _ in 0..200 {
        let x = if f_lo.is_finite() && f_hi.is_finite() {
            (lo * f_hi - hi * f_lo) / (f_hi - f_lo)
        } else {
            0.5 * (lo + hi)
        };
        let x = if x > lo && x < hi { x } else { 0.5 * (lo + hi) };
        let s = shot(x)?;
        let g = miss(&s, target);
        if g.abs() <= tol || hi - lo <= 4.0 * f64::EPSILON * hi.abs().max(lo.abs()).max(1.0) {
            return Ok(s);
        }
        if g < 0.0 {
            lo = x;
            f_lo = g;
            if side == -1 {
                f_hi *= 0.5;
            }
            side = -1;
        } else {
            hi = x;
            f_hi = g;
            if side == 1 {
                f_lo *= 0.5;
            }
            side = 1;
        }
    }
    Err(Error::NoConvergence(format!("shooting did not converge in [{lo}, {hi}]")))
}
