//! Structure maps `A(x, s, ξ)` of weakly 1-coercive operators, sampled
//! property checks, and the nonlinearities `f`.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functions::RadialFn;

type MapFn = dyn Fn(&[f64], f64, &[f64]) -> Vec<f64> + Send + Sync;

#[derive(Clone)]
pub struct CustomMap(pub Arc<MapFn>);

impl fmt::Debug for CustomMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("CustomMap(..)")
    }
}

#[derive(Debug, Clone)]
pub enum MapKind {
    /// `ξ / √(1 + |ξ|²)`
    MeanCurvature,
    /// `w(x) ξ / √(1 + w(x)² |ξ|²)` with `w` a function of `|x|`.
    WeightedGraph { w: RadialFn },
    Custom(CustomMap),
}

/// Properties a map is claimed to have.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Claims {
    pub weakly_elliptic: bool,
    pub coercive: bool,
    pub strictly_monotone: bool,
}

#[derive(Debug, Clone)]
pub struct CoerciveMap {
    pub kind: MapKind,
    pub k: f64,
    pub claims: Claims,
}

const ALL_CLAIMS: Claims = Claims { weakly_elliptic: true, coercive: true, strictly_monotone: true };

impl CoerciveMap {
    pub fn mean_curvature() -> Self {
        CoerciveMap { kind: MapKind::MeanCurvature, k: 1.0, claims: ALL_CLAIMS }
    }

    pub fn weighted_graph(w: RadialFn) -> Self {
        CoerciveMap { kind: MapKind::WeightedGraph { w }, k: 1.0, claims: ALL_CLAIMS }
    }

    pub fn custom(k: f64, claims: Claims, f: impl Fn(&[f64], f64, &[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        CoerciveMap { kind: MapKind::Custom(CustomMap(Arc::new(f))), k, claims }
    }

    pub fn is_builtin(&self) -> bool {
        !matches!(self.kind, MapKind::Custom(_))
    }

    /// Evaluates `A(x, s, ξ)`.
    pub fn eval_map(&self, x: &[f64], s: f64, xi: &[f64]) -> Result<Vec<f64>> {
        if x.len() != xi.len() {
            return Err(Error::Parameter(format!("position has dimension {}, vector {}", x.len(), xi.len())));
        }
        if !s.is_finite() || x.iter().chain(xi).any(|v| !v.is_finite()) {
            return Err(Error::Numeric("eval_map received a non-finite input".into()));
        }
        Ok(self.eval_unchecked(x, s, xi))
    }

    pub(crate) fn eval_unchecked(&self, x: &[f64], s: f64, xi: &[f64]) -> Vec<f64> {
        match &self.kind {
            MapKind::MeanCurvature => {
                let w = (1.0 + norm2(xi)).sqrt();
                xi.iter().map(|v| v / w).collect()
            }
            MapKind::WeightedGraph { w } => {
                let h = w.value(norm2(x).sqrt());
                let den = (1.0 + h * h * norm2(xi)).sqrt();
                xi.iter().map(|v| h * v / den).collect()
            }
            MapKind::Custom(CustomMap(f)) => f(x, s, xi),
        }
    }
}

pub(crate) fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// A sampled counterexample or extreme case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub condition: String,
    pub x: Vec<f64>,
    pub s: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    pub xi: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta: Option<Vec<f64>>,
    pub value: f64,
}

/// Outcome of a sampled property check; serializes as
/// `{check, samples, worst_margin, witnesses, ...}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub check: String,
    pub samples: usize,
    pub pass: bool,
    /// Smallest slack over all sampled conditions (negative means violated).
    pub worst_margin: f64,
    /// Largest `|A|` seen (wc3 compares this with `k`).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_norm: Option<f64>,
    pub witnesses: Vec<Witness>,
}

const MAX_WITNESSES: usize = 8;

/// Draws positions, scalars and log-uniform vectors for the checkers.
struct Sampler {
    rng: ChaCha8Rng,
    dim: usize,
}

impl Sampler {
    fn new(seed: u64, dim: usize) -> Self {
        Sampler { rng: ChaCha8Rng::seed_from_u64(seed), dim }
    }

    fn position(&mut self) -> Vec<f64> {
        (0..self.dim).map(|_| self.rng.random_range(-10.0..10.0)).collect()
    }

    fn scalar(&mut self) -> f64 {
        self.rng.random_range(-10.0..10.0)
    }

    /// Uniform direction, `|ξ|` log-uniform in `[1e-6, 1e6]`.
    fn vector(&mut self) -> Vec<f64> {
        loop {
            let v: Vec<f64> = (0..self.dim).map(|_| self.rng.sample(StandardNormal)).collect();
            let n = norm2(&v).sqrt();
            if n > 1e-12 {
                let mag = 10f64.powf(self.rng.random_range(-6.0..6.0));
                return v.into_iter().map(|c| c * mag / n).collect();
            }
        }
    }
}

/// Monte-Carlo check of `⟨A, ξ⟩ >= 0`, `A(x, s, 0) = 0` and `|A| <= k`.
pub fn check_weak_coercivity(a: &CoerciveMap, dim: usize, samples: usize, seed: u64) -> Result<CheckReport> {
    if samples == 0 {
        return Err(Error::Parameter("samples must be >= 1".into()));
    }
    let mut sm = Sampler::new(seed, dim);
    let zero = vec![0.0; dim];
    let mut witnesses = Vec::new();
    let mut worst: f64 = f64::INFINITY;
    let mut max_norm: f64 = 0.0;
    let mut pass = true;
    for _ in 0..samples {
        let x = sm.position();
        let s = sm.scalar();
        let xi = sm.vector();
        let v = a.eval_map(&x, s, &xi)?;
        let nv = norm2(&v).sqrt();
        let nxi = norm2(&xi).sqrt();
        max_norm = max_norm.max(nv);
        let inner = dot(&v, &xi);
        let wc1 = inner + 1e-12 * nv * nxi;
        let at_zero = norm2(&a.eval_map(&x, s, &zero)?).sqrt();
        let wc3 = a.k * (1.0 + 1e-12) - nv;
        for (cond, margin, value) in [("wc1", wc1, inner), ("wc2", -at_zero, at_zero), ("wc3", wc3, nv)] {
            // wc1 and wc3 slacks are relative to their natural scales
            let scaled = match cond {
                "wc1" => margin / (nv * nxi).max(1e-300),
                "wc3" => margin / a.k,
                _ => margin,
            };
            worst = worst.min(scaled);
            if margin < 0.0 {
                pass = false;
                if witnesses.len() < MAX_WITNESSES {
                    witnesses.push(Witness {
                        condition: cond.to_string(),
                        x: x.clone(),
                        s,
                        t: None,
                        xi: if cond == "wc2" { zero.clone() } else { xi.clone() },
                        eta: None,
                        value,
                    });
                }
            }
        }
    }
    Ok(CheckReport {
        check: "weak_coercivity".into(),
        samples,
        pass,
        worst_margin: worst,
        max_norm: Some(max_norm),
        witnesses,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MiklyukovGap {
    pub lhs: f64,
    pub rhs: f64,
    pub gap: f64,
}

/// Both sides of `⟨Tξ − Tη, ξ − η⟩ >= ½(W_ξ + W_η)|Tξ − Tη|²`, with
/// `T v = v/W_v`, `W_v = √(1 + |v|²)`.
pub fn miklyukov_gap(xi: &[f64], eta: &[f64]) -> Result<MiklyukovGap> {
    if xi.len() != eta.len() {
        return Err(Error::Parameter("vectors differ in dimension".into()));
    }
    let wx = (1.0 + norm2(xi)).sqrt();
    let we = (1.0 + norm2(eta)).sqrt();
    let diff_t: Vec<f64> = xi.iter().zip(eta).map(|(a, b)| a / wx - b / we).collect();
    let diff: Vec<f64> = xi.iter().zip(eta).map(|(a, b)| a - b).collect();
    let lhs = dot(&diff_t, &diff);
    let rhs = 0.5 * (wx + we) * norm2(&diff_t);
    Ok(MiklyukovGap { lhs, rhs, gap: lhs - rhs })
}

/// Tolerance scale of the gap: `1e-12 (1 + |ξ|² + |η|²)`.
pub fn miklyukov_tolerance(xi: &[f64], eta: &[f64]) -> f64 {
    1e-12 * (1.0 + norm2(xi) + norm2(eta))
}

/// Samples `(x, t >= s, ξ, η)` and checks `⟨A(x,t,ξ) − A(x,s,η), ξ − η⟩ >= 0`,
/// strictly when `t > s` and `|ξ − η| > 1e-6`.
pub fn check_strict_monotonicity(a: &CoerciveMap, dim: usize, samples: usize, seed: u64) -> Result<CheckReport> {
    if samples == 0 {
        return Err(Error::Parameter("samples must be >= 1".into()));
    }
    let mut sm = Sampler::new(seed, dim);
    let mut cases = Vec::with_capacity(samples);
    for _ in 0..samples {
        let x = sm.position();
        let (s0, s1) = (sm.scalar(), sm.scalar());
        let (s, t) = if s0 <= s1 { (s0, s1) } else { (s1, s0) };
        cases.push((x, s, t, sm.vector(), sm.vector()));
    }
    monotonicity_on(a, &cases)
}

type MonotoneCase = (Vec<f64>, f64, f64, Vec<f64>, Vec<f64>);

/// Runs the monotonicity check on explicit `(x, s, t, ξ, η)` cases.
pub fn monotonicity_on(a: &CoerciveMap, cases: &[MonotoneCase]) -> Result<CheckReport> {
    let mut witnesses = Vec::new();
    let mut worst = f64::INFINITY;
    let mut pass = true;
    for (x, s, t, xi, eta) in cases {
        let at = a.eval_map(x, *t, xi)?;
        let as_ = a.eval_map(x, *s, eta)?;
        let da: Vec<f64> = at.iter().zip(&as_).map(|(p, q)| p - q).collect();
        let d: Vec<f64> = xi.iter().zip(eta).map(|(p, q)| p - q).collect();
        let inner = dot(&da, &d);
        let scale = norm2(&d).sqrt() * (norm2(&at).sqrt() + norm2(&as_).sqrt());
        let weak_margin = inner + 1e-12 * scale;
        let strict_required = t > s && norm2(&d).sqrt() > 1e-6;
        let (cond, margin) = if strict_required {
            ("strict", inner - 1e-14)
        } else {
            ("monotone", weak_margin)
        };
        worst = worst.min(if strict_required { inner } else { weak_margin });
        if margin < 0.0 || (strict_required && inner <= 1e-14) {
            pass = false;
            if witnesses.len() < MAX_WITNESSES {
                witnesses.push(Witness {
                    condition: cond.into(),
                    x: x.clone(),
                    s: *s,
                    t: Some(*t),
                    xi: xi.clone(),
                    eta: Some(eta.clone()),
                    value: inner,
                });
            }
        }
    }
    Ok(CheckReport {
        check: "strict_monotonicity".into(),
        samples: cases.len(),
        pass,
        worst_margin: worst,
        max_norm: None,
        witnesses,
    })
}

/// Serializable form of the nonlinearity `f`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum NonlinearitySpec {
    Identity,
    Constant { value: f64 },
    Linear { slope: f64, offset: f64 },
}

#[derive(Clone)]
pub struct Nonlinearity {
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub monotone_nondecreasing: bool,
    /// Lower slope constant: `f(s) − f(t) >= α (s − t)` for `s > t`.
    pub alpha: Option<f64>,
}

impl fmt::Debug for Nonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Nonlinearity")
            .field("monotone_nondecreasing", &self.monotone_nondecreasing)
            .field("alpha", &self.alpha)
            .finish()
    }
}

impl Nonlinearity {
    pub fn new(f: impl Fn(f64) -> f64 + Send + Sync + 'static, monotone_nondecreasing: bool, alpha: Option<f64>) -> Self {
        Nonlinearity { f: Arc::new(f), monotone_nondecreasing, alpha }
    }

    pub fn identity() -> Self {
        Self::new(|s| s, true, Some(1.0))
    }

    pub fn constant(c: f64) -> Self {
        Self::new(move |_| c, true, None)
    }

    pub fn from_spec(spec: &NonlinearitySpec) -> Self {
        match *spec {
            NonlinearitySpec::Identity => Self::identity(),
            NonlinearitySpec::Constant { value } => Self::constant(value),
            NonlinearitySpec::Linear { slope, offset } => {
                Self::new(move |s| slope * s + offset, slope >= 0.0, (slope > 0.0).then_some(slope))
            }
        }
    }

    pub fn eval(&self, s: f64) -> f64 {
        (self.f)(s)
    }

    /// Samples difference quotients on `[-range, range]` and checks the
    /// claimed monotonicity and slope bound.
    pub fn check_slope(&self, samples: usize, range: f64, seed: u64) -> bool {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..samples).all(|_| {
            let a: f64 = rng.random_range(-range..range);
            let b: f64 = rng.random_range(-range..range);
            if a == b {
                return true;
            }
            let (t, s) = if a < b { (a, b) } else { (b, a) };
            let q = (self.eval(s) - self.eval(t)) / (s - t);
            let mono = !self.monotone_nondecreasing || q >= -1e-12;
            let slope = self.alpha.is_none_or(|al| q >= al * (1.0 - 1e-9));
            mono && slope
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_examples() {
        let a = CoerciveMap::mean_curvature();
        assert_eq!(a.eval_map(&[0.0, 0.0], 0.0, &[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
        let v = a.eval_map(&[0.0, 0.0], 0.0, &[1.0, 0.0]).unwrap();
        assert!((v[0] - 0.5f64.sqrt()).abs() < 1e-15 && v[1] == 0.0);
        let b = CoerciveMap::weighted_graph(RadialFn::constant(2.0));
        let v = b.eval_map(&[0.3, 0.1], 1.0, &[1.0, 0.0]).unwrap();
        assert!((v[0] - 2.0 / 5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn eval_rejects_bad_input() {
        let a = CoerciveMap::mean_curvature();
        assert!(matches!(a.eval_map(&[0.0], 0.0, &[f64::NAN]), Err(Error::Numeric(_))));
        assert!(matches!(a.eval_map(&[0.0, 1.0], 0.0, &[1.0]), Err(Error::Parameter(_))));
    }

    #[test]
    fn mean_curvature_is_weakly_coercive() {
        let r = check_weak_coercivity(&CoerciveMap::mean_curvature(), 3, 100_000, 7).unwrap();
        assert!(r.pass);
        assert!(r.max_norm.unwrap() <= 1.0 + 1e-12);
    }

    #[test]
    fn weighted_graph_is_weakly_coercive() {
        let a = CoerciveMap::weighted_graph(RadialFn::Cosh { scale: 1.0 });
        let r = check_weak_coercivity(&a, 2, 100_000, 11).unwrap();
        assert!(r.pass, "{:?}", r.witnesses);
        assert!(r.max_norm.unwrap() <= 1.0 + 1e-12);
    }

    #[test]
    fn unbounded_map_fails_wc3() {
        let a = CoerciveMap::custom(1.0, ALL_CLAIMS, |_, _, xi| xi.iter().map(|v| 2.0 * v).collect());
        let r = check_weak_coercivity(&a, 2, 1000, 3).unwrap();
        assert!(!r.pass);
        assert!(r.witnesses.iter().any(|w| w.condition == "wc3"));
        let json = serde_json::to_value(&r).unwrap();
        for key in ["check", "samples", "worst_margin", "witnesses"] {
            assert!(json.get(key).is_some(), "{key}");
        }
    }

    #[test]
    fn miklyukov_examples() {
        let g = miklyukov_gap(&[0.3, -2.0], &[0.3, -2.0]).unwrap();
        assert_eq!((g.lhs, g.rhs, g.gap), (0.0, 0.0, 0.0));
        let g = miklyukov_gap(&[1.0, 0.0], &[0.0, 0.0]).unwrap();
        assert!((g.lhs - 0.5f64.sqrt()).abs() < 1e-15);
        assert!((g.rhs - (2f64.sqrt() + 1.0) / 4.0).abs() < 1e-15);
        assert!((g.gap - 0.103_553_390_593_273_8).abs() < 1e-12);
    }

    #[test]
    fn mean_curvature_strictly_monotone() {
        let r = check_strict_monotonicity(&CoerciveMap::mean_curvature(), 3, 100_000, 5).unwrap();
        assert!(r.pass, "{:?}", r.witnesses);
    }

    #[test]
    fn equal_vectors_exempt_from_strictness() {
        let a = CoerciveMap::mean_curvature();
        let cases = vec![(vec![0.0, 0.0], 0.0, 1.0, vec![0.4, 0.2], vec![0.4, 0.2])];
        let r = monotonicity_on(&a, &cases).unwrap();
        assert!(r.pass);
        assert_eq!(r.worst_margin, 0.0);
    }

    #[test]
    fn zero_map_fails_strictness() {
        let zero = CoerciveMap::custom(1.0, ALL_CLAIMS, |_, _, xi| vec![0.0; xi.len()]);
        let cases = vec![(vec![0.0, 0.0], 0.0, 1.0, vec![1.0, 0.0], vec![0.0, 1.0])];
        let r = monotonicity_on(&zero, &cases).unwrap();
        assert!(!r.pass);
        assert_eq!(r.witnesses[0].condition, "strict");
    }

    #[test]
    fn nonlinearity_slopes() {
        assert!(Nonlinearity::identity().check_slope(1000, 10.0, 1));
        assert!(Nonlinearity::constant(1.0).check_slope(1000, 10.0, 1));
        let bad = Nonlinearity::new(|s| s.powi(3), true, Some(1.0));
        assert!(!bad.check_slope(1000, 10.0, 1));
        let lin = Nonlinearity::from_spec(&NonlinearitySpec::Linear { slope: 2.0, offset: -1.0 });
        assert_eq!(lin.eval(1.5), 2.0);
        assert_eq!(lin.alpha, Some(2.0));
    }
}
