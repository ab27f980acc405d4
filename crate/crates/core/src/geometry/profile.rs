use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functions::Weight;
use crate::ode::{self, DenseTrajectory, OdeOptions};
use crate::quad;

/// Parameters of `g(r) = sinh(B r)/B`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaledParams {
    #[serde(rename = "B")]
    pub b: f64,
}

/// Parameters of the profile solving `g'' = B² (1 + r²)^{-α/2} g`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JacobiParams {
    pub alpha: f64,
    #[serde(rename = "B")]
    pub b: f64,
}

/// Warping function `g` of a rotationally symmetric metric `dr² + g(r)² dθ²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WarpingProfile {
    Euclidean,
    Hyperbolic,
    ScaledHyperbolic { params: ScaledParams },
    Jacobi { params: JacobiParams },
    Table { r: Vec<f64>, g: Vec<f64> },
}

impl WarpingProfile {
    pub fn jacobi(alpha: f64, b: f64) -> Self {
        WarpingProfile::Jacobi { params: JacobiParams { alpha, b } }
    }

    pub fn scaled_hyperbolic(b: f64) -> Self {
        WarpingProfile::ScaledHyperbolic { params: ScaledParams { b } }
    }
}

/// Serializable description of a model manifold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifoldSpec {
    pub dim: usize,
    pub warping: WarpingProfile,
    /// Extent of the ODE table for profiles defined by an ODE.
    #[serde(default)]
    pub r_max: Option<f64>,
}

/// Jacobi profile tabulated in two pieces: `(g, g')` near the pole, then
/// `(log g, g'/g)` so that exponential growth never overflows.
#[derive(Debug, Clone)]
struct JacobiTable {
    params: JacobiParams,
    r_switch: f64,
    r_max: f64,
    near: DenseTrajectory,
    far: Option<DenseTrajectory>,
}

#[derive(Debug, Clone)]
struct SplineTable {
    r: Vec<f64>,
    g: Vec<f64>,
    m2: Vec<f64>,
}

#[derive(Debug, Clone)]
enum Backing {
    Closed,
    Jacobi(Box<JacobiTable>),
    Spline(SplineTable),
}

/// Rotationally symmetric model manifold of dimension `m`.
#[derive(Debug, Clone)]
pub struct ModelManifold {
    dim: usize,
    profile: WarpingProfile,
    backing: Backing,
}

/// Default ODE table extent when none is given.
pub const DEFAULT_TABLE_RADIUS: f64 = 100.0;

impl ModelManifold {
    pub fn euclidean(dim: usize) -> Self {
        Self::new(dim, WarpingProfile::Euclidean, None).expect("euclidean model")
    }

    pub fn hyperbolic(dim: usize) -> Self {
        Self::new(dim, WarpingProfile::Hyperbolic, None).expect("hyperbolic model")
    }

    /// Builds the model; ODE-defined profiles are tabulated on `[0, r_max]`.
    pub fn new(dim: usize, profile: WarpingProfile, r_max: Option<f64>) -> Result<Self> {
        if dim < 2 {
            return Err(Error::Parameter(format!("dimension must be >= 2, got {dim}")));
        }
        let backing = match &profile {
            WarpingProfile::Euclidean | WarpingProfile::Hyperbolic => Backing::Closed,
            WarpingProfile::ScaledHyperbolic { params } => {
                if !(params.b > 0.0) {
                    return Err(Error::Parameter("scaled hyperbolic profile needs B > 0".into()));
                }
                Backing::Closed
            }
            WarpingProfile::Jacobi { params } => {
                Backing::Jacobi(Box::new(build_jacobi(*params, r_max.unwrap_or(DEFAULT_TABLE_RADIUS))?))
            }
            WarpingProfile::Table { r, g } => Backing::Spline(build_spline(r, g)?),
        };
        Ok(ModelManifold { dim, profile, backing })
    }

    pub fn from_spec(spec: &ManifoldSpec) -> Result<Self> {
        Self::new(spec.dim, spec.warping.clone(), spec.r_max)
    }

    pub fn spec(&self) -> ManifoldSpec {
        let r_max = match &self.backing {
            Backing::Jacobi(t) => Some(t.r_max),
            _ => None,
        };
        ManifoldSpec { dim: self.dim, warping: self.profile.clone(), r_max }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn profile(&self) -> &WarpingProfile {
        &self.profile
    }

    /// Largest radius at which the profile can be evaluated.
    pub fn max_radius(&self) -> f64 {
        match &self.backing {
            Backing::Closed => f64::INFINITY,
            Backing::Jacobi(t) => t.r_max,
            Backing::Spline(s) => *s.r.last().unwrap(),
        }
    }

    /// `ω_{m-1}`, the area of the unit sphere `S^{m-1}`.
    pub fn sphere_area(&self) -> f64 {
        sphere_area(self.dim)
    }

    fn check_range(&self, r: f64) -> Result<()> {
        if !(r >= 0.0) || r > self.max_radius() {
            return Err(Error::Range { r, max: self.max_radius() });
        }
        Ok(())
    }

    /// `(g, g', g'')` at `r`.
    pub fn warping_eval(&self, r: f64) -> Result<(f64, f64, f64)> {
        self.check_range(r)?;
        Ok(match (&self.profile, &self.backing) {
            (WarpingProfile::Euclidean, _) => (r, 1.0, 0.0),
            (WarpingProfile::Hyperbolic, _) => (r.sinh(), r.cosh(), r.sinh()),
            (WarpingProfile::ScaledHyperbolic { params }, _) => {
                let b = params.b;
                ((b * r).sinh() / b, (b * r).cosh(), b * (b * r).sinh())
            }
            (_, Backing::Jacobi(t)) => t.eval(r),
            (_, Backing::Spline(s)) => s.eval(r),
            _ => unreachable!("profile without backing"),
        })
    }

    /// `log g(r)`; `-∞` at the pole.
    pub fn log_g(&self, r: f64) -> Result<f64> {
        self.check_range(r)?;
        Ok(match (&self.profile, &self.backing) {
            (WarpingProfile::Euclidean, _) => r.ln(),
            (WarpingProfile::Hyperbolic, _) => log_sinh(r),
            (WarpingProfile::ScaledHyperbolic { params }, _) => log_sinh(params.b * r) - params.b.ln(),
            (_, Backing::Jacobi(t)) => t.log_g(r),
            (_, Backing::Spline(s)) => s.eval(r).0.ln(),
            _ => unreachable!(),
        })
    }

    /// `g'(r)/g(r)`, i.e. the mean curvature of the distance sphere divided by `m-1`.
    pub fn log_derivative(&self, r: f64) -> Result<f64> {
        self.check_range(r)?;
        if r == 0.0 {
            return Err(Error::Pole);
        }
        Ok(match (&self.profile, &self.backing) {
            (WarpingProfile::Euclidean, _) => 1.0 / r,
            (WarpingProfile::Hyperbolic, _) => 1.0 / r.tanh(),
            (WarpingProfile::ScaledHyperbolic { params }, _) => params.b / (params.b * r).tanh(),
            (_, Backing::Jacobi(t)) => t.log_derivative(r),
            (_, Backing::Spline(s)) => {
                let (g, dg, _) = s.eval(r);
                dg / g
            }
            _ => unreachable!(),
        })
    }

    /// `g'/g` written as `limit + remainder`, where `limit` is the exact value
    /// at infinity when the profile has one (else 0). Keeping the two apart
    /// lets callers form `g'/g − c` without cancellation at large `r`.
    pub fn log_derivative_split(&self, r: f64) -> Result<(f64, f64)> {
        let z = self.log_derivative(r)?;
        Ok(match &self.profile {
            WarpingProfile::Euclidean => (0.0, z),
            WarpingProfile::Hyperbolic => (1.0, 2.0 / (2.0 * r).exp_m1()),
            WarpingProfile::ScaledHyperbolic { params } => {
                let b = params.b;
                (b, 2.0 * b / (2.0 * b * r).exp_m1())
            }
            WarpingProfile::Jacobi { params } if params.alpha == 0.0 => (params.b, z - params.b),
            _ => (0.0, z),
        })
    }

    /// `−(m−1) g''(r)/g(r)`.
    pub fn radial_ricci(&self, r: f64) -> Result<f64> {
        if r == 0.0 {
            return Err(Error::Pole);
        }
        self.check_range(r)?;
        let m1 = (self.dim - 1) as f64;
        let ratio = match (&self.profile, &self.backing) {
            (WarpingProfile::Euclidean, _) => 0.0,
            (WarpingProfile::Hyperbolic, _) => 1.0,
            (WarpingProfile::ScaledHyperbolic { params }, _) => params.b * params.b,
            (_, Backing::Jacobi(t)) => t.params.curvature(r),
            (_, Backing::Spline(s)) => {
                let (g, _, d2g) = s.eval(r);
                d2g / g
            }
            _ => unreachable!(),
        };
        Ok(-m1 * ratio)
    }

    /// `log` of the (weighted) radial area density `ω_{m−1} w(r) g(r)^{m−1}`.
    pub fn log_area_density(&self, r: f64, weight: Option<&Weight>) -> Result<f64> {
        let lg = self.log_g(r)?;
        let lw = weight.map_or(0.0, |w| w.log_w(r));
        Ok(self.sphere_area().ln() + lw + (self.dim - 1) as f64 * lg)
    }

    /// `log vol(B_R)` for each of the increasing radii.
    pub fn log_ball_volumes(&self, radii: &[f64], weight: Option<&Weight>) -> Result<Vec<f64>> {
        if radii.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Parameter("radii must be non-decreasing".into()));
        }
        if let Some(&last) = radii.last() {
            self.check_range(last)?;
        }
        if let Some(&first) = radii.first() {
            if first < 0.0 {
                return Err(Error::Range { r: first, max: self.max_radius() });
            }
        }
        let m1 = (self.dim - 1) as f64;
        let log_omega = self.sphere_area().ln();
        let integrand = |r: f64| {
            let lg = self.log_g(r).unwrap_or(f64::NAN);
            let lw = weight.map_or(0.0, |w| w.log_w(r));
            lw + m1 * lg
        };
        let mut out = Vec::with_capacity(radii.len());
        let mut acc = f64::NEG_INFINITY;
        let mut prev = 0.0;
        for &r in radii {
            if r > prev {
                acc = quad::log_add(acc, quad::log_integrate(integrand, prev, r, quad::DEFAULT_REL_TOL));
                prev = r;
            }
            out.push(acc + log_omega);
        }
        Ok(out)
    }

    /// `vol(B_R) = ω_{m−1} ∫_0^R w g^{m−1}`.
    pub fn ball_volume(&self, radius: f64, weight: Option<&Weight>) -> Result<f64> {
        if radius < 0.0 {
            return Err(Error::Range { r: radius, max: self.max_radius() });
        }
        if radius == 0.0 {
            return Ok(0.0);
        }
        Ok(self.log_ball_volumes(&[radius], weight)?[0].exp())
    }

    /// Checks `g(0) = 0`, `g'(0) = 1` and `g > 0` on the given radii.
    pub fn check_profile(&self, radii: &[f64]) -> Result<()> {
        let (g0, dg0, _) = self.warping_eval(0.0)?;
        if g0.abs() > 1e-10 || (dg0 - 1.0).abs() > 1e-6 {
            return Err(Error::Parameter(format!("profile must satisfy g(0)=0, g'(0)=1; got {g0}, {dg0}")));
        }
        for &r in radii.iter().filter(|&&r| r > 0.0) {
            let lg = self.log_g(r)?;
            if lg.is_nan() || lg == f64::NEG_INFINITY {
                return Err(Error::Parameter(format!("g not positive at r = {r}")));
            }
        }
        Ok(())
    }
}

impl JacobiParams {
    /// `g''/g = B² (1 + r²)^{-α/2}`.
    pub fn curvature(&self, r: f64) -> f64 {
        self.b * self.b * (1.0 + r * r).powf(-0.5 * self.alpha)
    }
}

impl JacobiTable {
    fn eval(&self, r: f64) -> (f64, f64, f64) {
        let k = self.params.curvature(r);
        if r <= self.r_switch {
            let v = self.near.eval(r).expect("near table covers [0, r_switch]");
            (v[0], v[1], k * v[0])
        } else {
            let v = self.far.as_ref().unwrap().eval(r).expect("far table covers [r_switch, r_max]");
            let g = v[0].exp();
            (g, v[1] * g, k * g)
        }
    }

    fn log_g(&self, r: f64) -> f64 {
        if r <= self.r_switch {
            self.near.eval_component(r, 0).unwrap().ln()
        } else {
            self.far.as_ref().unwrap().eval_component(r, 0).unwrap()
        }
    }

    fn log_derivative(&self, r: f64) -> f64 {
        if r <= self.r_switch {
            let v = self.near.eval(r).unwrap();
            v[1] / v[0]
        } else {
            self.far.as_ref().unwrap().eval_component(r, 1).unwrap()
        }
    }
}

fn build_jacobi(params: JacobiParams, r_max: f64) -> Result<JacobiTable> {
    if !(0.0..=2.0).contains(&params.alpha) || !(params.b >= 0.0) {
        return Err(Error::Parameter(format!(
            "jacobi profile needs 0 <= alpha <= 2 and B >= 0, got alpha = {}, B = {}",
            params.alpha, params.b
        )));
    }
    if !(r_max > 0.0) || !r_max.is_finite() {
        return Err(Error::Parameter(format!("jacobi table radius must be positive and finite, got {r_max}")));
    }
    let opts = OdeOptions { rtol: 1e-13, atol: 1e-15, ..Default::default() };
    let r_switch = r_max.min(1.0);
    let (near, _) = ode::integrate_dense(
        |r, y, dy| {
            dy[0] = y[1];
            dy[1] = params.curvature(r) * y[0];
        },
        0.0,
        &[0.0, 1.0],
        r_switch,
        &opts,
    )?;
    let far = if r_max > r_switch {
        let end = near.eval(r_switch).unwrap();
        let y0 = [end[0].ln(), end[1] / end[0]];
        let (far, _) = ode::integrate_dense(
            |r, y, dy| {
                dy[0] = y[1];
                dy[1] = params.curvature(r) - y[1] * y[1];
            },
            r_switch,
            &y0,
            r_max,
            &opts,
        )?;
        Some(far)
    } else {
        None
    };
    Ok(JacobiTable { params, r_switch, r_max, near, far })
}

fn build_spline(r: &[f64], g: &[f64]) -> Result<SplineTable> {
    let n = r.len();
    if n < 3 || g.len() != n {
        return Err(Error::Parameter("table profile needs >= 3 matching (r, g) samples".into()));
    }
    if r[0] != 0.0 || g[0].abs() > 1e-12 {
        return Err(Error::Parameter("table profile must start at r = 0 with g(0) = 0".into()));
    }
    if r.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Parameter("table radii must be strictly increasing".into()));
    }
    if g[1..].iter().any(|&v| !(v > 0.0)) {
        return Err(Error::Parameter("table profile must be positive for r > 0".into()));
    }
    // clamped spline with g'(0) = 1 at the pole, natural at the far end
    let mut a = vec![0.0; n];
    let mut b = vec![0.0; n];
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let h0 = r[1] - r[0];
    b[0] = h0 / 3.0;
    c[0] = h0 / 6.0;
    d[0] = (g[1] - g[0]) / h0 - 1.0;
    for i in 1..n - 1 {
        let hl = r[i] - r[i - 1];
        let hr = r[i + 1] - r[i];
        a[i] = hl / 6.0;
        b[i] = (hl + hr) / 3.0;
        c[i] = hr / 6.0;
        d[i] = (g[i + 1] - g[i]) / hr - (g[i] - g[i - 1]) / hl;
    }
    b[n - 1] = 1.0;
    let m2 = solve_tridiagonal(&a, &b, &c, &d);
    Ok(SplineTable { r: r.to_vec(), g: g.to_vec(), m2 })
}

fn solve_tridiagonal(a: &[f64], b: &[f64], c: &[f64], d: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut cp = vec![0.0; n];
    let mut dp = vec![0.0; n];
    cp[0] = c[0] / b[0];
    dp[0] = d[0] / b[0];
    for i in 1..n {
        let den = b[i] - a[i] * cp[i - 1];
        cp[i] = if i + 1 < n { c[i] / den } else { 0.0 };
        dp[i] = (d[i] - a[i] * dp[i - 1]) / den;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = dp[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = dp[i] - cp[i] * x[i + 1];
    }
    x
}

impl SplineTable {
    fn eval(&self, r: f64) -> (f64, f64, f64) {
        let n = self.r.len();
        let i = (self.r.partition_point(|&x| x <= r).max(1) - 1).min(n - 2);
        let h = self.r[i + 1] - self.r[i];
        let a = (self.r[i + 1] - r) / h;
        let b = (r - self.r[i]) / h;
        let (m0, m1) = (self.m2[i], self.m2[i + 1]);
        let g = a * self.g[i] + b * self.g[i + 1] + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / 6.0;
        let dg = (self.g[i + 1] - self.g[i]) / h - (3.0 * a * a - 1.0) * h * m0 / 6.0 + (3.0 * b * b - 1.0) * h * m1 / 6.0;
        let d2g = a * m0 + b * m1;
        (g, dg, d2g)
    }
}

/// `log sinh r` for `r >= 0`.
pub(crate) fn log_sinh(r: f64) -> f64 {
    if r > 20.0 {
        r - std::f64::consts::LN_2 + (-(-2.0 * r).exp()).ln_1p()
    } else {
        r.sinh().ln()
    }
}

/// `Γ(m/2)` for a positive integer `m`.
fn gamma_half(m: usize) -> f64 {
    if m.is_multiple_of(2) {
        (1..m / 2).map(|k| k as f64).product()
    } else {
        // Γ(1/2) = √π, Γ(x+1) = x Γ(x)
        let mut v = std::f64::consts::PI.sqrt();
        let mut x = 0.5;
        while x + 1.0 <= m as f64 / 2.0 + 1e-12 {
            v *= x;
            x += 1.0;
        }
        v
    }
}

/// `ω_{m−1} = 2π^{m/2}/Γ(m/2)`.
pub fn sphere_area(m: usize) -> f64 {
    2.0 * std::f64::consts::PI.powf(m as f64 / 2.0) / gamma_half(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn sphere_areas() {
        assert!((sphere_area(2) - 2.0 * PI).abs() < 1e-14);
        assert!((sphere_area(3) - 4.0 * PI).abs() < 1e-13);
        assert!((sphere_area(4) - 2.0 * PI * PI).abs() < 1e-13);
        assert!((sphere_area(5) - 8.0 * PI * PI / 3.0).abs() < 1e-12);
    }

    #[test]
    fn warping_examples() {
        assert_eq!(ModelManifold::euclidean(2).warping_eval(2.0).unwrap(), (2.0, 1.0, 0.0));
        assert_eq!(ModelManifold::hyperbolic(3).warping_eval(0.0).unwrap(), (0.0, 1.0, 0.0));
        let flat = ModelManifold::new(3, WarpingProfile::jacobi(2.0, 0.0), Some(5.0)).unwrap();
        let (g, dg, d2g) = flat.warping_eval(1.5).unwrap();
        assert!((g - 1.5).abs() < 1e-12 && (dg - 1.0).abs() < 1e-12 && d2g.abs() < 1e-12);
    }

    #[test]
    fn jacobi_out_of_range() {
        let m = ModelManifold::new(2, WarpingProfile::jacobi(1.0, 1.0), Some(3.0)).unwrap();
        assert!(matches!(m.warping_eval(3.5), Err(Error::Range { .. })));
        assert!(m.warping_eval(3.0).is_ok());
    }

    #[test]
    fn jacobi_matches_sinh() {
        let m = ModelManifold::new(2, WarpingProfile::jacobi(0.0, 1.0), Some(10.0)).unwrap();
        for k in 0..=1000 {
            let r = 0.01 * k as f64;
            let (g, dg, _) = m.warping_eval(r).unwrap();
            assert!((g - r.sinh()).abs() <= 1e-8 * r.cosh(), "r = {r}: {g} vs {}", r.sinh());
            assert!((dg - r.cosh()).abs() <= 1e-8 * r.cosh());
        }
    }

    #[test]
    fn ricci_examples() {
        assert_eq!(ModelManifold::euclidean(3).radial_ricci(1.0).unwrap(), 0.0);
        assert_eq!(ModelManifold::hyperbolic(3).radial_ricci(1.0).unwrap(), -2.0);
        let m = ModelManifold::new(2, WarpingProfile::jacobi(1.0, 1.0), Some(4.0)).unwrap();
        let ric = m.radial_ricci(2.0).unwrap();
        assert!((ric + 1.0 / 5f64.sqrt()).abs() < 1e-12);
        assert_eq!(m.radial_ricci(0.0), Err(Error::Pole));
    }

    #[test]
    fn ball_volume_examples() {
        let e2 = ModelManifold::euclidean(2);
        assert!((e2.ball_volume(1.0, None).unwrap() - PI).abs() < 1e-12);
        assert_eq!(e2.ball_volume(0.0, None).unwrap(), 0.0);
        let h2 = ModelManifold::hyperbolic(2);
        let exact = 2.0 * PI * (1f64.cosh() - 1.0);
        assert!((h2.ball_volume(1.0, None).unwrap() / exact - 1.0).abs() < 1e-10);
        let e3 = ModelManifold::euclidean(3);
        assert!((e3.ball_volume(2.0, None).unwrap() / (4.0 / 3.0 * PI * 8.0) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn weighted_volume_closed_form() {
        // ∫_0^R cosh·sinh = sinh²(R)/2
        let h2 = ModelManifold::hyperbolic(2);
        let w = Weight::cosh();
        let v = h2.ball_volume(3.0, Some(&w)).unwrap();
        let exact = 2.0 * PI * 3f64.sinh().powi(2) / 2.0;
        assert!((v / exact - 1.0).abs() < 1e-10);
    }

    #[test]
    fn log_volume_huge_radius() {
        // log of π e^{2R}/2 − 2πR ≈ 2R + log(π/2) for m = 3
        let h3 = ModelManifold::hyperbolic(3);
        let v = h3.log_ball_volumes(&[5000.0], None).unwrap()[0];
        assert!((v - (10000.0 + (PI / 2.0).ln())).abs() < 1e-8);
    }

    #[test]
    fn table_profile_tracks_sinh() {
        let r: Vec<f64> = (0..=400).map(|i| i as f64 * 0.01).collect();
        let g: Vec<f64> = r.iter().map(|x| x.sinh()).collect();
        let m = ModelManifold::new(2, WarpingProfile::Table { r, g }, None).unwrap();
        let (g, dg, _) = m.warping_eval(1.234).unwrap();
        assert!((g - 1.234f64.sinh()).abs() < 1e-6);
        assert!((dg - 1.234f64.cosh()).abs() < 1e-4);
        m.check_profile(&[0.5, 1.0, 3.9]).unwrap();
    }

    #[test]
    fn profile_json() {
        let spec = ManifoldSpec { dim: 2, warping: WarpingProfile::jacobi(1.0, 1.0), r_max: Some(10.0) };
        let s = serde_json::to_string(&spec.warping).unwrap();
        assert_eq!(s, r#"{"kind":"jacobi","params":{"alpha":1.0,"B":1.0}}"#);
        let t: WarpingProfile = serde_json::from_str(r#"{"kind":"table","r":[0,1,2],"g":[0,1,2]}"#).unwrap();
        assert!(matches!(t, WarpingProfile::Table { .. }));
        let e: WarpingProfile = serde_json::from_str(r#"{"kind":"euclidean"}"#).unwrap();
        assert_eq!(e, WarpingProfile::Euclidean);
    }
}
