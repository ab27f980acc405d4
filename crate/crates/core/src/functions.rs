//! Radial scalar functions used for coefficients (`b`, `H`) and weights.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// User-supplied radial function returning `(value, derivative)`.
#[derive(Clone)]
pub struct CustomFn(pub Arc<dyn Fn(f64) -> (f64, f64) + Send + Sync>);

impl fmt::Debug for CustomFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("CustomFn(..)")
    }
}

/// A scalar function of the distance `r` from the origin.
///
/// Serializes as `{"kind": ..., "params": {...}}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum RadialFn {
    Constant { value: f64 },
    /// `scale · (1 + r)^(-exponent)`
    Power { scale: f64, exponent: f64 },
    /// `scale · exp(-rate · r)`
    ExpDecay { scale: f64, rate: f64 },
    /// `scale · cosh(r)`
    Cosh { scale: f64 },
    /// `scale · exp(-rate · r²)`
    Gaussian { scale: f64, rate: f64 },
    /// Piecewise-linear interpolation, constant extrapolation.
    Table { r: Vec<f64>, v: Vec<f64> },
    #[serde(skip)]
    Custom(CustomFn),
}

impl RadialFn {
    pub fn constant(value: f64) -> Self {
        RadialFn::Constant { value }
    }

    pub fn custom(f: impl Fn(f64) -> (f64, f64) + Send + Sync + 'static) -> Self {
        RadialFn::Custom(CustomFn(Arc::new(f)))
    }

    pub fn value(&self, r: f64) -> f64 {
        self.value_and_derivative(r).0
    }

    pub fn value_and_derivative(&self, r: f64) -> (f64, f64) {
        match self {
            RadialFn::Constant { value } => (*value, 0.0),
            RadialFn::Power { scale, exponent } => {
                let v = scale * (1.0 + r).powf(-exponent);
                (v, -exponent * v / (1.0 + r))
            }
            RadialFn::ExpDecay { scale, rate } => {
                let v = scale * (-rate * r).exp();
                (v, -rate * v)
            }
            RadialFn::Cosh { scale } => (scale * r.cosh(), scale * r.sinh()),
            RadialFn::Gaussian { scale, rate } => {
                let v = scale * (-rate * r * r).exp();
                (v, -2.0 * rate * r * v)
            }
            RadialFn::Table { r: rs, v } => table_eval(rs, v, r),
            RadialFn::Custom(CustomFn(f)) => f(r),
        }
    }

    /// `log f(r)`, computed without overflow where a closed form allows it.
    pub fn log_value(&self, r: f64) -> f64 {
        match self {
            RadialFn::ExpDecay { scale, rate } => scale.ln() - rate * r,
            RadialFn::Gaussian { scale, rate } => scale.ln() - rate * r * r,
            RadialFn::Cosh { scale } => scale.ln() + log_cosh(r),
            RadialFn::Power { scale, exponent } => scale.ln() - exponent * (1.0 + r).ln(),
            _ => self.value(r).ln(),
        }
    }

    /// `(log f)'(r)`.
    pub fn log_derivative(&self, r: f64) -> f64 {
        match self {
            RadialFn::Constant { .. } => 0.0,
            RadialFn::Cosh { .. } => r.tanh(),
            RadialFn::ExpDecay { rate, .. } => -rate,
            RadialFn::Gaussian { rate, .. } => -2.0 * rate * r,
            RadialFn::Power { exponent, .. } => -exponent / (1.0 + r),
            _ => {
                let (v, d) = self.value_and_derivative(r);
                d / v
            }
        }
    }

    /// `(log f)'` as `limit + remainder`, see
    /// [`ModelManifold::log_derivative_split`](crate::geometry::ModelManifold::log_derivative_split).
    pub fn log_derivative_split(&self, r: f64) -> (f64, f64) {
        match self {
            RadialFn::Constant { .. } => (0.0, 0.0),
            RadialFn::Cosh { .. } => (1.0, -2.0 / ((2.0 * r).exp() + 1.0)),
            RadialFn::ExpDecay { rate, .. } => (-rate, 0.0),
            _ => (0.0, self.log_derivative(r)),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, RadialFn::Constant { .. })
    }

    pub fn validate(&self) -> Result<()> {
        if let RadialFn::Table { r, v } = self {
            if r.len() != v.len() || r.len() < 2 {
                return Err(Error::Parameter("table needs matching r/v arrays of length >= 2".into()));
            }
            if r.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::Parameter("table radii must be strictly increasing".into()));
            }
        }
        Ok(())
    }
}

fn table_eval(rs: &[f64], vs: &[f64], r: f64) -> (f64, f64) {
    if r <= rs[0] {
        return (vs[0], 0.0);
    }
    if r >= rs[rs.len() - 1] {
        return (vs[vs.len() - 1], 0.0);
    }
    let i = rs.partition_point(|&x| x <= r) - 1;
    let slope = (vs[i + 1] - vs[i]) / (rs[i + 1] - rs[i]);
    (vs[i] + slope * (r - rs[i]), slope)
}

pub(crate) fn log_cosh(r: f64) -> f64 {
    let a = r.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

/// A positive weight `w = e^{-h}` on the model space.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Weight {
    w: RadialFn,
}

impl Weight {
    pub fn unit() -> Self {
        Weight { w: RadialFn::constant(1.0) }
    }

    /// Weight given directly by its density `w`.
    pub fn from_density(w: RadialFn) -> Self {
        Weight { w }
    }

    /// Weight given by the potential `h`, so that `w = e^{-h}`.
    pub fn from_potential(h: impl Fn(f64) -> (f64, f64) + Send + Sync + 'static) -> Self {
        Weight {
            w: RadialFn::custom(move |r| {
                let (hv, hd) = h(r);
                let w = (-hv).exp();
                (w, -hd * w)
            }),
        }
    }

    /// `w = cosh r`, the warping of the vertical factor in `ℝ ×_cosh ℍ^m`.
    pub fn cosh() -> Self {
        Weight { w: RadialFn::Cosh { scale: 1.0 } }
    }

    pub fn density(&self) -> &RadialFn {
        &self.w
    }

    pub fn w(&self, r: f64) -> f64 {
        self.w.value(r)
    }

    pub fn h(&self, r: f64) -> f64 {
        -self.w.log_value(r)
    }

    pub fn log_w(&self, r: f64) -> f64 {
        self.w.log_value(r)
    }

    pub fn dlog_w(&self, r: f64) -> f64 {
        self.w.log_derivative(r)
    }

    pub fn dlog_w_split(&self, r: f64) -> (f64, f64) {
        self.w.log_derivative_split(r)
    }

    pub fn is_unit(&self) -> bool {
        matches!(self.w, RadialFn::Constant { value } if value == 1.0)
    }

    /// Checks `w > 0` at each of the given radii.
    pub fn check_positive(&self, radii: &[f64]) -> Result<()> {
        for &r in radii {
            let v = self.w(r);
            if !(v > 0.0) {
                return Err(Error::Parameter(format!("weight not positive at r = {r}: {v}")));
            }
        }
        Ok(())
    }
}

impl Default for Weight {
    fn default() -> Self {
        Self::unit()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_shape() {
        let f = RadialFn::Power { scale: 1.0, exponent: 0.5 };
        let s = serde_json::to_string(&f).unwrap();
        assert_eq!(s, r#"{"kind":"power","params":{"scale":1.0,"exponent":0.5}}"#);
        let back: RadialFn = serde_json::from_str(&s).unwrap();
        assert_eq!(back.value(3.0), 0.5);
    }

    #[test]
    fn cosh_logs_do_not_overflow() {
        let w = Weight::cosh();
        assert!((w.log_w(1000.0) - (1000.0 - std::f64::consts::LN_2)).abs() < 1e-12);
        assert!((w.h(0.0)).abs() < 1e-15);
        assert!((w.dlog_w(2.0) - 2f64.tanh()).abs() < 1e-15);
    }

    #[test]
    fn potential_weight() {
        let w = Weight::from_potential(|r| (r * r, 2.0 * r));
        assert!((w.w(1.0) - (-1f64).exp()).abs() < 1e-15);
        assert!((w.dlog_w(1.5) + 3.0).abs() < 1e-12);
    }

    #[test]
    fn table_interpolates() {
        let t = RadialFn::Table { r: vec![0.0, 1.0, 2.0], v: vec![1.0, 3.0, 2.0] };
        t.validate().unwrap();
        assert_eq!(t.value(0.5), 2.0);
        assert_eq!(t.value_and_derivative(1.5), (2.5, -1.0));
        assert_eq!(t.value(10.0), 2.0);
    }
}
