//! Dormand–Prince 5(4) integrator with continuous (dense) output.

use crate::error::{Error, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub h0: Option<f64>,
    pub h_max: f64,
    /// Relative step floor: steps below `h_min_rel·max(|t|, 1)` count as underflow.
    pub h_min_rel: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
            h0: None,
            h_max: f64::INFINITY,
            h_min_rel: 1e-14,
            max_steps: 2_000_000,
        }
    }
}

/// One accepted step with its interpolation coefficients.
#[derive(Debug, Clone)]
pub struct DenseStep {
    pub t0: f64,
    pub h: f64,
    pub y0: Vec<f64>,
    pub y1: Vec<f64>,
    pub dy0: Vec<f64>,
    pub dy1: Vec<f64>,
    /// Error estimate per component for this step.
    pub err: Vec<f64>,
    rc3: Vec<f64>,
    rc4: Vec<f64>,
    rc5: Vec<f64>,
}

impl DenseStep {
    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }

    /// Continuous extension of the solution inside the step.
    pub fn eval(&self, t: f64) -> Vec<f64> {
        let th = (t - self.t0) / self.h;
        let th1 = 1.0 - th;
        (0..self.y0.len())
            .map(|i| {
                let rc2 = self.y1[i] - self.y0[i];
                self.y0[i] + th * (rc2 + th1 * (self.rc3[i] + th * (self.rc4[i] + th1 * self.rc5[i])))
            })
            .collect()
    }

    pub fn eval_component(&self, t: f64, i: usize) -> f64 {
        let th = (t - self.t0) / self.h;
        let th1 = 1.0 - th;
        let rc2 = self.y1[i] - self.y0[i];
        self.y0[i] + th * (rc2 + th1 * (self.rc3[i] + th * (self.rc4[i] + th1 * self.rc5[i])))
    }
}

/// What the step observer wants the integrator to do next.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

#[derive(Debug, Clone)]
pub struct OdeSummary {
    pub t: f64,
    pub y: Vec<f64>,
    pub steps: usize,
    pub rejected: usize,
    pub stopped: bool,
    /// Sum of per-step error estimates, per component.
    pub err_sum: Vec<f64>,
}

fn axpy(out: &mut [f64], y: &[f64], h: f64, terms: &[(f64, &[f64])]) {
    for i in 0..y.len() {
        let mut s = 0.0;
        for (c, k) in terms {
            s += c * k[i];
        }
        out[i] = y[i] + h * s;
    }
}

/// Integrates `y' = f(t, y)` from `t0` to `t_end` (either direction is not
/// supported; `t_end > t0`). `observer` sees every accepted step.
///
/// Non-finite right-hand sides cause the step to be rejected and shrunk, so
/// a caller can signal "outside the domain of definition" by returning NaN.
pub fn integrate<F, O>(mut f: F, t0: f64, y0: &[f64], t_end: f64, opts: &OdeOptions, mut observer: O) -> Result<OdeSummary>
where
    F: FnMut(f64, &[f64], &mut [f64]),
    O: FnMut(&DenseStep) -> Control,
{
    if !(t_end > t0) {
        return Err(Error::Parameter(format!("t_end {t_end} must exceed t0 {t0}")));
    }
    let n = y0.len();
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut k1 = vec![0.0; n];
    f(t, &y, &mut k1);
    if k1.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric(format!("right-hand side not finite at t = {t0}")));
    }
    let (mut k2, mut k3, mut k4, mut k5, mut k6, mut k7) =
        (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut ytmp = vec![0.0; n];
    let mut ynew = vec![0.0; n];
    let mut h = opts.h0.unwrap_or_else(|| initial_step(&y, &k1, opts, t_end - t0));
    let mut summary = OdeSummary {
        t,
        y: y.clone(),
        steps: 0,
        rejected: 0,
        stopped: false,
        err_sum: vec![0.0; n],
    };
    let mut last_rejected = false;
    while t < t_end {
        if summary.steps + summary.rejected >= opts.max_steps {
            return Err(Error::NoConvergence(format!("step budget exhausted at t = {t}")));
        }
        h = h.min(opts.h_max);
        let mut last = false;
        if t + h >= t_end || t + 1.01 * h >= t_end {
            h = t_end - t;
            last = true;
        }
        if h < opts.h_min_rel * t.abs().max(1.0) {
            return Err(Error::StepUnderflow { t });
        }
        axpy(&mut ytmp, &y, h, &[(A21, &k1)]);
        f(t + C2 * h, &ytmp, &mut k2);
        axpy(&mut ytmp, &y, h, &[(A31, &k1), (A32, &k2)]);
        f(t + C3 * h, &ytmp, &mut k3);
        axpy(&mut ytmp, &y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]);
        f(t + C4 * h, &ytmp, &mut k4);
        axpy(&mut ytmp, &y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]);
        f(t + C5 * h, &ytmp, &mut k5);
        axpy(&mut ytmp, &y, h, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]);
        f(t + h, &ytmp, &mut k6);
        axpy(&mut ynew, &y, h, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
        f(t + h, &ynew, &mut k7);

        let mut err_norm = 0.0;
        let mut finite = ynew.iter().chain(k7.iter()).all(|v| v.is_finite());
        let mut err = vec![0.0; n];
        if finite {
            for i in 0..n {
                let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
                err[i] = e.abs();
                let sc = opts.atol + opts.rtol * y[i].abs().max(ynew[i].abs());
                err_norm = f64::max(err_norm, (e / sc).abs());
            }
            finite = err_norm.is_finite();
        }
        if !finite {
            summary.rejected += 1;
            h *= 0.25;
            last_rejected = true;
            continue;
        }
        if err_norm > 1.0 {
            summary.rejected += 1;
            let fac = (0.9 * err_norm.powf(-0.2)).clamp(0.2, 1.0);
            h *= fac;
            last_rejected = true;
            continue;
        }
        let mut rc3 = vec![0.0; n];
        let mut rc4 = vec![0.0; n];
        let mut rc5 = vec![0.0; n];
        for i in 0..n {
            let rc2 = ynew[i] - y[i];
            rc3[i] = h * k1[i] - rc2;
            rc4[i] = rc2 - h * k7[i] - rc3[i];
            rc5[i] = h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
        }
        let step = DenseStep {
            t0: t,
            h,
            y0: y.clone(),
            y1: ynew.clone(),
            dy0: k1.clone(),
            dy1: k7.clone(),
            err: err.clone(),
            rc3,
            rc4,
            rc5,
        };
        for i in 0..n {
            summary.err_sum[i] += err[i];
        }
        summary.steps += 1;
        t = if last { t_end } else { t + h };
        y.copy_from_slice(&ynew);
        k1.copy_from_slice(&k7);
        summary.t = t;
        summary.y = y.clone();
        if observer(&step) == Control::Stop {
            summary.stopped = true;
            return Ok(summary);
        }
        let mut fac = (0.9 * err_norm.max(1e-10).powf(-0.2)).clamp(0.2, 5.0);
        if last_rejected {
            fac = fac.min(1.0);
        }
        last_rejected = false;
        h *= fac;
    }
    Ok(summary)
}

fn initial_step(y: &[f64], dy: &[f64], opts: &OdeOptions, span: f64) -> f64 {
    let mut d0 = 0.0;
    let mut d1 = 0.0;
    for i in 0..y.len() {
        let sc = opts.atol + opts.rtol * y[i].abs();
        d0 += (y[i] / sc).powi(2);
        d1 += (dy[i] / sc).powi(2);
    }
    let h = if d0 < 1e-10 || d1 < 1e-10 { 1e-6 } else { 0.01 * (d0 / d1).sqrt() };
    h.min(0.1 * span).max(1e-12 * span)
}

/// A solution stored as its sequence of dense steps.
#[derive(Debug, Clone, Default)]
pub struct DenseTrajectory {
    pub steps: Vec<DenseStep>,
}

impl DenseTrajectory {
    pub fn t_start(&self) -> f64 {
        self.steps.first().map_or(f64::NAN, |s| s.t0)
    }

    pub fn t_end(&self) -> f64 {
        self.steps.last().map_or(f64::NAN, |s| s.t1())
    }

    fn locate(&self, t: f64) -> Option<&DenseStep> {
        if self.steps.is_empty() || t < self.t_start() || t > self.t_end() {
            return None;
        }
        let idx = self.steps.partition_point(|s| s.t1() < t);
        self.steps.get(idx.min(self.steps.len() - 1))
    }

    pub fn eval(&self, t: f64) -> Option<Vec<f64>> {
        self.locate(t).map(|s| s.eval(t))
    }

    pub fn eval_component(&self, t: f64, i: usize) -> Option<f64> {
        self.locate(t).map(|s| s.eval_component(t, i))
    }
}

/// Integrates and keeps every step for later interpolation.
pub fn integrate_dense<F>(f: F, t0: f64, y0: &[f64], t_end: f64, opts: &OdeOptions) -> Result<(DenseTrajectory, OdeSummary)>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let mut traj = DenseTrajectory::default();
    let summary = integrate(f, t0, y0, t_end, opts, |s| {
        traj.steps.push(s.clone());
        Control::Continue
    })?;
    Ok((traj, summary))
}
