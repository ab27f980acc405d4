//! Adaptive Gauss–Kronrod (7/15) quadrature, plus a log-domain variant for
//! integrands that over- or underflow `f64`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

pub const DEFAULT_ABS_TOL: f64 = 1e-12;
pub const DEFAULT_REL_TOL: f64 = 1e-10;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub intervals: usize,
}

struct Piece {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Piece {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for (j, (&x, &w)) in XGK.iter().zip(WGK.iter()).take(7).enumerate() {
        let s = f(c - h * x) + f(c + h * x);
        kron += w * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    let value = kron * h;
    let mut error = ((kron - gauss) * h).abs();
    // A spike narrower than the outermost node leaves both rules near zero;
    // compare against the endpoint values so such pieces keep being split.
    let edge = f(a).abs().max(f(b).abs()) * (b - a).abs();
    if edge > 10.0 * value.abs() + f64::MIN_POSITIVE {
        error = error.max(edge);
    }
    Piece { a, b, value, error }
}

/// Globally adaptive integration of `f` over `[a, b]`.
///
/// Stops when the summed error estimate is below `max(abs_tol, rel_tol·|I|)`
/// or when pieces become too narrow to split further.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> QuadResult {
    if a == b {
        return QuadResult { value: 0.0, error: 0.0, intervals: 0 };
    }
    let mut heap = BinaryHeap::new();
    let first = gk15(&f, a, b);
    let mut total = first.value;
    let mut err = first.error;
    heap.push(first);
    let mut frozen_value = 0.0;
    let mut frozen_err = 0.0;
    let mut count = 1;
    while err > abs_tol.max(rel_tol * total.abs()) && count < 20_000 {
        let Some(worst) = heap.pop() else { break };
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a.min(worst.b) || mid >= worst.a.max(worst.b) || (worst.b - worst.a).abs() < 1e-15 * worst.a.abs().max(worst.b.abs()) {
            // cannot split any further; keep its contribution as-is
            frozen_value += worst.value;
            frozen_err += worst.error;
            err -= worst.error;
            if heap.is_empty() {
                break;
            }
            continue;
        }
        let left = gk15(&f, worst.a, mid);
        let right = gk15(&f, mid, worst.b);
        total += left.value + right.value - worst.value;
        err += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        count += 1;
    }
    let live: f64 = heap.iter().map(|p| p.value).sum();
    let live_err: f64 = heap.iter().map(|p| p.error).sum();
    QuadResult {
        value: live + frozen_value,
        error: live_err + frozen_err,
        intervals: count,
    }
}

/// Adaptive integration with the default tolerances (abs 1e-12, rel 1e-10).
pub fn integrate_default<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> QuadResult {
    integrate(f, a, b, DEFAULT_ABS_TOL, DEFAULT_REL_TOL)
}

/// `log(exp(x) + exp(y))` without overflow.
pub fn log_add(x: f64, y: f64) -> f64 {
    if x == f64::NEG_INFINITY {
        return y;
    }
    if y == f64::NEG_INFINITY {
        return x;
    }
    let (hi, lo) = if x > y { (x, y) } else { (y, x) };
    hi + (lo - hi).exp().ln_1p()
}

/// `log ∫_a^b exp(log_f(x)) dx` for `0 <= a < b`.
///
/// The interval is cut at powers of two so that each piece can be shifted by
/// its own maximum before exponentiation.
pub fn log_integrate<F: Fn(f64) -> f64>(log_f: F, a: f64, b: f64, rel_tol: f64) -> f64 {
    if b <= a {
        return f64::NEG_INFINITY;
    }
    let mut cuts = vec![a];
    let mut p = if a > 0.0 { 2f64.powi(a.log2().floor() as i32 + 1) } else { 1.0 };
    // keep a few dyadic cuts below 1 when starting at the pole
    if a == 0.0 {
        let mut q = 0.25;
        while q < b.min(1.0) && cuts.len() < 3 {
            cuts.push(q);
            q *= 2.0;
        }
        p = 1.0;
    }
    while p < b {
        if p > *cuts.last().unwrap() {
            cuts.push(p);
        }
        p *= 2.0;
    }
    cuts.push(b);
    let mut acc = f64::NEG_INFINITY;
    for w in cuts.windows(2) {
        acc = log_add(acc, log_integrate_piece(&log_f, w[0], w[1], rel_tol));
    }
    acc
}

fn log_integrate_piece<F: Fn(f64) -> f64>(log_f: &F, a: f64, b: f64, rel_tol: f64) -> f64 {
    let mut shift = f64::NEG_INFINITY;
    for i in 0..=16 {
        let x = a + (b - a) * i as f64 / 16.0;
        let v = log_f(x);
        if v.is_finite() || v == f64::INFINITY {
            shift = shift.max(v);
        }
    }
    if shift == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let r = integrate(
        |x| {
            let v = log_f(x) - shift;
            if v.is_nan() {
                0.0
            } else {
                v.exp()
            }
        },
        a,
        b,
        0.0,
        rel_tol,
    );
    r.value.ln() + shift
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let r = integrate_default(|x| x * x * x - 2.0 * x, 0.0, 3.0);
        assert!((r.value - (81.0 / 4.0 - 9.0)).abs() < 1e-12);
    }

    #[test]
    fn sqrt_endpoint_singularity() {
        let r = integrate_default(|x: f64| x.sqrt(), 0.0, 1.0);
        assert!((r.value - 2.0 / 3.0).abs() < 1e-10);
    }

    #[test]
    fn log_domain_matches_direct() {
        let direct = integrate_default(|x: f64| x.sinh(), 0.0, 5.0).value;
        let logged = log_integrate(|x: f64| x.sinh().ln(), 0.0, 5.0, 1e-10);
        assert!((logged.exp() / direct - 1.0).abs() < 1e-9);
    }

    #[test]
    fn log_domain_handles_overflow() {
        // ∫_0^R e^{2x} = (e^{2R} - 1)/2
        let r = 2000.0;
        let logged = log_integrate(|x| 2.0 * x, 0.0, r, 1e-10);
        let exact = 2.0 * r - 2f64.ln();
        assert!((logged - exact).abs() < 1e-8, "{logged} vs {exact}");
    }

    #[test]
    fn log_add_is_symmetric() {
        assert!((log_add(1.0, 2.0) - (1f64.exp() + 2f64.exp()).ln()).abs() < 1e-14);
        assert_eq!(log_add(f64::NEG_INFINITY, 3.0), 3.0);
    }
}
