//! Monte-Carlo replay of the flow of a bounded vector field: particles
//! sampled in `B_δ(p)` are advected while `log J` is accumulated through
//! `d/dt log J = div X`, so that `vol(U_t) = |B_δ| · mean(J)`.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::sphere_area;
use crate::ode::{self, Control, OdeOptions};
use crate::quad::log_add;
use crate::radial::RadialSolution;

type FieldFn = dyn Fn(&[f64], &mut [f64]) -> bool + Send + Sync;
type DivFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// A vector field on (a subset of) `ℝ^m` with its divergence.
#[derive(Clone)]
pub struct FlowField {
    dim: usize,
    /// Writes `X(x)`; returns false outside the domain of definition.
    field: Arc<FieldFn>,
    div: Arc<DivFn>,
    /// Claimed bound `|X| <= k`; when absent the observed maximum is used.
    pub bound: Option<f64>,
}

impl std::fmt::Debug for FlowField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FlowField").field("dim", &self.dim).field("bound", &self.bound).finish()
    }
}

impl FlowField {
    pub fn new(
        dim: usize,
        field: impl Fn(&[f64], &mut [f64]) -> bool + Send + Sync + 'static,
        div: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        bound: Option<f64>,
    ) -> Self {
        FlowField { dim, field: Arc::new(field), div: Arc::new(div), bound }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn constant(v: Vec<f64>) -> Self {
        let k = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        let dim = v.len();
        Self::new(
            dim,
            move |_, out| {
                out.copy_from_slice(&v);
                true
            },
            |_| 0.0,
            Some(k),
        )
    }

    /// `X(x) = A x` for a row-major `m × m` matrix.
    pub fn linear(dim: usize, a: Vec<f64>) -> Result<Self> {
        if a.len() != dim * dim {
            return Err(Error::Parameter(format!("linear field needs {} entries", dim * dim)));
        }
        let trace: f64 = (0..dim).map(|i| a[i * dim + i]).sum();
        Ok(Self::new(
            dim,
            move |x, out| {
                for i in 0..dim {
                    out[i] = (0..dim).map(|j| a[i * dim + j] * x[j]).sum();
                }
                true
            },
            move |_| trace,
            None,
        ))
    }

    /// `X = φ(u') x/|x|` for a radial solution on Euclidean `ℝ^m`, i.e. the
    /// field `A(x, u, ∇u)` of the mean curvature operator, defined for
    /// `|x| <` the end of the solution. Its divergence is `F'/r^{m−1}`,
    /// which the solver's equation supplies as the source term.
    pub fn from_radial(sol: &RadialSolution) -> Result<Self> {
        let m = sol.manifold().dim();
        if !matches!(sol.manifold().profile(), crate::geometry::WarpingProfile::Euclidean) {
            return Err(Error::Parameter("flow replay of radial solutions needs the Euclidean model".into()));
        }
        if sol.equation().weight().is_some() {
            return Err(Error::Parameter("flow replay of radial solutions needs an unweighted equation".into()));
        }
        let r_end = sol.r_end();
        let s1 = sol.clone();
        let s2 = sol.clone();
        Ok(Self::new(
            m,
            move |x, out| {
                let r = x.iter().map(|a| a * a).sum::<f64>().sqrt();
                if r >= r_end {
                    return false;
                }
                if r == 0.0 {
                    out.fill(0.0);
                    return true;
                }
                let q = match s1.eval(r) {
                    Ok((_, du, _)) => du / (1.0 + du * du).sqrt(),
                    Err(_) => return false,
                };
                for (o, xi) in out.iter_mut().zip(x) {
                    *o = q * xi / r;
                }
                true
            },
            move |x| {
                let r = x.iter().map(|a| a * a).sum::<f64>().sqrt();
                s2.source_at(r).unwrap_or(f64::NAN)
            },
            Some(1.0),
        ))
    }

    fn eval(&self, x: &[f64], out: &mut [f64]) -> bool {
        (self.field)(x, out) && out.iter().all(|v| v.is_finite())
    }
}

/// Constants of the lower bound
/// `log g(t) >= log g(0) + (c* + ε) β* ∫₀ᵗ (R₁ + k s)^{−μ} ds`,
/// with `R₁ = max{R₀, |p| + δ}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundParams {
    pub c_star: f64,
    pub epsilon: f64,
    pub beta_star: f64,
    pub mu: f64,
    pub r0: f64,
}

impl LowerBoundParams {
    /// `∫₀ᵗ (R₁ + k s)^{−μ} ds` in closed form.
    pub fn integral(&self, r1: f64, k: f64, t: f64) -> f64 {
        let mu = self.mu;
        if mu == 0.0 {
            t
        } else if k == 0.0 {
            t * r1.powf(-mu)
        } else if mu == 1.0 {
            ((r1 + k * t) / r1).ln() / k
        } else {
            ((r1 + k * t).powf(1.0 - mu) - r1.powf(1.0 - mu)) / (k * (1.0 - mu))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowParams {
    pub center: Vec<f64>,
    pub delta: f64,
    pub t_end: f64,
    pub steps: usize,
    pub particles: usize,
    pub seed: u64,
    #[serde(default)]
    pub lower_bound: Option<LowerBoundParams>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowReplayTrace {
    pub times: Vec<f64>,
    pub volumes: Vec<f64>,
    pub log_volumes: Vec<f64>,
    /// `max |x − p|` over particles at each time.
    pub max_distance: Vec<f64>,
    /// `δ + k t`.
    pub containment_radius: Vec<f64>,
    pub containment_ok: bool,
    /// The bound `k` used for containment.
    pub k: f64,
    pub lower_bound: Option<Vec<f64>>,
    pub lower_bound_ok: Option<bool>,
    pub params: FlowParams,
    pub r1: Option<f64>,
    pub particle_count: usize,
}

impl FlowReplayTrace {
    /// CSV with columns `t,value,lower_bound,verdict` (value = log volume).
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,value,lower_bound,verdict\n");
        for (j, t) in self.times.iter().enumerate() {
            let (lb, verdict) = match &self.lower_bound {
                Some(lb) => (
                    format!("{:e}", lb[j]),
                    if self.log_volumes[j] >= lb[j] - LB_SLACK * lb[j].abs().max(1.0) { "ok" } else { "violated" },
                ),
                None => (String::new(), if self.max_distance[j] <= self.containment_radius[j] { "ok" } else { "violated" }),
            };
            s.push_str(&format!("{t:e},{:e},{lb},{verdict}\n", self.log_volumes[j]));
        }
        s
    }
}

/// Relative slack on containment and the lower bound (integrator tolerance).
const LB_SLACK: f64 = 1e-7;

struct Particle {
    log_j: Vec<f64>,
    dist: Vec<f64>,
    speed: f64,
}

fn sample_ball(rng: &mut ChaCha8Rng, center: &[f64], delta: f64) -> Vec<f64> {
    let m = center.len();
    loop {
        let v: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
        let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if n > 1e-12 {
            let rad = delta * rng.random::<f64>().powf(1.0 / m as f64);
            return center.iter().zip(&v).map(|(c, a)| c + rad * a / n).collect();
        }
    }
}

fn advect(x: &FlowField, idx: usize, p: &FlowParams) -> Result<Particle> {
    let m = x.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    rng.set_stream(idx as u64);
    let mut state = sample_ball(&mut rng, &p.center, p.delta);
    state.push(0.0);
    let dt = p.t_end / p.steps as f64;
    let opts = OdeOptions { rtol: 1e-10, atol: 1e-12, ..Default::default() };
    let mut buf = vec![0.0; m];
    let mut speed = 0.0f64;
    let mut log_j = vec![0.0];
    let dist_of = |s: &[f64]| s[..m].iter().zip(&p.center).map(|(a, c)| (a - c) * (a - c)).sum::<f64>().sqrt();
    let mut dist = vec![dist_of(&state)];
    if !x.eval(&state[..m], &mut buf) {
        return Err(Error::Escaped { particle: idx, t: 0.0, position: state[..m].to_vec() });
    }
    speed = speed.max(buf.iter().map(|a| a * a).sum::<f64>().sqrt());
    for j in 0..p.steps {
        let (t0, t1) = (j as f64 * dt, (j + 1) as f64 * dt);
        let mut last = state.clone();
        let mut last_t = t0;
        let res = ode::integrate(
            |_, y, dy| {
                let mut out = vec![0.0; m];
                if x.eval(&y[..m], &mut out) {
                    dy[..m].copy_from_slice(&out);
                    dy[m] = (x.div)(&y[..m]);
                } else {
                    dy.fill(f64::NAN);
                }
            },
            t0,
            &state,
            t1,
            &opts,
            |st| {
                last.copy_from_slice(&st.y1);
                last_t = st.t1();
                Control::Continue
            },
        );
        match res {
            Ok(s) => state = s.y,
            Err(Error::StepUnderflow { .. }) | Err(Error::NoConvergence(_)) | Err(Error::Numeric(_)) => {
                return Err(Error::Escaped { particle: idx, t: last_t, position: last[..m].to_vec() });
            }
            Err(e) => return Err(e),
        }
        if !x.eval(&state[..m], &mut buf) {
            return Err(Error::Escaped { particle: idx, t: t1, position: state[..m].to_vec() });
        }
        speed = speed.max(buf.iter().map(|a| a * a).sum::<f64>().sqrt());
        log_j.push(state[m]);
        dist.push(dist_of(&state));
    }
    Ok(Particle { log_j, dist, speed })
}

/// Replays the flow of `x` from the ball `B_δ(p)`.
pub fn replay_flow(x: &FlowField, params: &FlowParams) -> Result<FlowReplayTrace> {
    let m = x.dim;
    if params.center.len() != m {
        return Err(Error::Parameter(format!("center has dimension {}, field {m}", params.center.len())));
    }
    if params.particles < 1000 {
        return Err(Error::Parameter(format!("need at least 1000 particles, got {}", params.particles)));
    }
    if !(params.delta > 0.0) || !(params.t_end > 0.0) || params.steps == 0 {
        return Err(Error::Parameter("need delta > 0, t_end > 0 and steps >= 1".into()));
    }
    let results: Vec<Result<Particle>> = (0..params.particles).into_par_iter().map(|i| advect(x, i, params)).collect();
    let mut particles = Vec::with_capacity(results.len());
    for r in results {
        particles.push(r?);
    }
    let observed_k = particles.iter().fold(0.0f64, |a, p| a.max(p.speed));
    let k = match x.bound {
        Some(k) => {
            if observed_k > k * (1.0 + 1e-12) {
                return Err(Error::Hypothesis {
                    hypothesis: "|X| <= k".into(),
                    location: "sampled particle states".into(),
                    value: observed_k,
                });
            }
            k
        }
        None => observed_k,
    };
    let n = params.particles as f64;
    let log_ball = (sphere_area(m) / m as f64).ln() + m as f64 * params.delta.ln();
    let dt = params.t_end / params.steps as f64;
    let times: Vec<f64> = (0..=params.steps).map(|j| j as f64 * dt).collect();
    let mut log_volumes = Vec::with_capacity(times.len());
    let mut max_distance = Vec::with_capacity(times.len());
    for j in 0..times.len() {
        // fixed reduction order: the result does not depend on thread count
        let lse = particles.iter().fold(f64::NEG_INFINITY, |acc, p| log_add(acc, p.log_j[j]));
        log_volumes.push(log_ball + lse - n.ln());
        max_distance.push(particles.iter().fold(0.0f64, |a, p| a.max(p.dist[j])));
    }
    let containment_radius: Vec<f64> = times.iter().map(|t| params.delta + k * t).collect();
    let containment_ok = max_distance
        .iter()
        .zip(&containment_radius)
        .all(|(d, r)| *d <= r + LB_SLACK * r.max(1.0));
    let (lower_bound, lower_bound_ok, r1) = match &params.lower_bound {
        Some(lb) => {
            let rp = params.center.iter().map(|a| a * a).sum::<f64>().sqrt();
            let r1 = lb.r0.max(rp + params.delta);
            let curve: Vec<f64> = times
                .iter()
                .map(|&t| log_volumes[0] + (lb.c_star + lb.epsilon) * lb.beta_star * lb.integral(r1, k, t))
                .collect();
            let ok = log_volumes.iter().zip(&curve).all(|(v, c)| *v >= c - LB_SLACK * c.abs().max(1.0));
            (Some(curve), Some(ok), Some(r1))
        }
        None => (None, None, None),
    };
    Ok(FlowReplayTrace {
        volumes: log_volumes.iter().map(|v| v.exp()).collect(),
        times,
        log_volumes,
        max_distance,
        containment_radius,
        containment_ok,
        k,
        lower_bound,
        lower_bound_ok,
        params: params.clone(),
        r1,
        particle_count: params.particles,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(center: Vec<f64>, t_end: f64, particles: usize) -> FlowParams {
        FlowParams { center, delta: 0.5, t_end, steps: 8, particles, seed: 9, lower_bound: None }
    }

    #[test]
    fn constant_field_preserves_volume() {
        let x = FlowField::constant(vec![0.3, -0.4]);
        let tr = replay_flow(&x, &params(vec![1.0, 2.0], 2.0, 1000)).unwrap();
        let v0 = std::f64::consts::PI * 0.25;
        for v in &tr.volumes {
            assert!((v / v0 - 1.0).abs() < 1e-12);
        }
        assert!(tr.containment_ok);
        assert!((tr.k - 0.5).abs() < 1e-15);
    }

    #[test]
    fn linear_field_liouville() {
        let x = FlowField::linear(3, vec![1.0, 0.2, 0.0, 0.0, -0.5, 0.1, 0.3, 0.0, 0.25]).unwrap();
        let tr = replay_flow(&x, &params(vec![0.0; 3], 2.0, 1000)).unwrap();
        let v0 = 4.0 / 3.0 * std::f64::consts::PI * 0.125;
        for (t, v) in tr.times.iter().zip(&tr.volumes) {
            let exact = v0 * (0.75 * t).exp();
            assert!((v / exact - 1.0).abs() < 1e-6, "t={t}");
        }
        assert!(tr.containment_ok);
    }

    #[test]
    fn bound_violation_is_reported() {
        let mut x = FlowField::linear(2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        x.bound = Some(0.1);
        let e = replay_flow(&x, &params(vec![0.0; 2], 1.0, 1000)).unwrap_err();
        assert!(matches!(e, Error::Hypothesis { .. }));
    }

    #[test]
    fn escape_is_reported() {
        let x = FlowField::new(
            1,
            |x, out| {
                out[0] = 1.0;
                x[0] < 1.0
            },
            |_| 0.0,
            Some(1.0),
        );
        let e = replay_flow(&x, &params(vec![0.0], 2.0, 1000)).unwrap_err();
        assert!(matches!(e, Error::Escaped { .. }), "{e:?}");
    }

    #[test]
    fn deterministic() {
        let x = FlowField::linear(2, vec![0.1, 1.0, -1.0, 0.1]).unwrap();
        let a = replay_flow(&x, &params(vec![0.5, 0.0], 1.0, 1000)).unwrap();
        let b = replay_flow(&x, &params(vec![0.5, 0.0], 1.0, 1000)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn lower_bound_integral_closed_forms() {
        let lb = LowerBoundParams { c_star: 0.0, epsilon: 0.0, beta_star: 1.0, mu: 0.5, r0: 1.0 };
        let num = crate::quad::integrate_default(|s| (2.0 + 0.7 * s).powf(-0.5), 0.0, 3.0).value;
        assert!((lb.integral(2.0, 0.7, 3.0) - num).abs() < 1e-12);
        let lb1 = LowerBoundParams { mu: 1.0, ..lb };
        let num1 = crate::quad::integrate_default(|s| 1.0 / (2.0 + 0.7 * s), 0.0, 3.0).value;
        assert!((lb1.integral(2.0, 0.7, 3.0) - num1).abs() < 1e-12);
    }
}
