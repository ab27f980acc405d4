//! Weighted volume of superlevel sets cut by geodesic balls,
//! `G(t) = vol_w(B_t ∩ {ψ > γ})`, and the differential inequality
//! `G'(t) >= (β* γ / (‖X‖∞ t^μ)) G(t)` it satisfies for supersolutions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functions::Weight;
use crate::geometry::GrowthCondition;
use crate::grid::{CellLabel, GridDomain};

/// `∫ √(t² − x²) dx`.
fn half_chord_integral(t: f64, x: f64) -> f64 {
    let x = x.clamp(-t, t);
    0.5 * (x * (t * t - x * x).max(0.0).sqrt() + t * t * (x / t).clamp(-1.0, 1.0).asin())
}

/// Area of `{X <= x, Y <= y} ∩ B_t(0)`.
fn quadrant_area(t: f64, x: f64, y: f64) -> f64 {
    let xm = x.clamp(-t, t);
    let s_int = |a: f64, b: f64| if b > a { half_chord_integral(t, b) - half_chord_integral(t, a) } else { 0.0 };
    if y >= t {
        return 2.0 * s_int(-t, xm);
    }
    if y <= -t {
        return 0.0;
    }
    let c = (t * t - y * y).sqrt();
    // on |X| < c the vertical chord is cut at y, giving length y + s(X)
    let mid = y * ((xm.min(c) - (-c)).max(0.0)) + s_int(-c, xm.min(c));
    let outer = if y >= 0.0 { 2.0 * (s_int(-t, xm.min(-c)) + s_int(c, xm)) } else { 0.0 };
    mid + outer
}

/// Exact area of `[x0, x1] × [y0, y1] ∩ B_t(0)`.
pub fn disk_rect_area(t: f64, x0: f64, x1: f64, y0: f64, y1: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let near_x = if x0 > 0.0 { x0 } else if x1 < 0.0 { -x1 } else { 0.0 };
    let near_y = if y0 > 0.0 { y0 } else if y1 < 0.0 { -y1 } else { 0.0 };
    if near_x * near_x + near_y * near_y >= t * t {
        return 0.0;
    }
    let far_x = x0.abs().max(x1.abs());
    let far_y = y0.abs().max(y1.abs());
    if far_x * far_x + far_y * far_y <= t * t {
        return (x1 - x0) * (y1 - y0);
    }
    let a = quadrant_area(t, x1, y1) - quadrant_area(t, x0, y1) - quadrant_area(t, x1, y0) + quadrant_area(t, x0, y0);
    a.clamp(0.0, (x1 - x0) * (y1 - y0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShellOptions {
    /// `β*`; defaults to `0.99 β`.
    pub beta_star: Option<f64>,
    /// Radius past which the decay condition `inf_{B_t} b >= β* t^{−μ}`
    /// holds; computed from `b` when absent.
    pub r0: Option<f64>,
    /// Relative slack on the inequality.
    pub slack: f64,
}

impl Default for ShellOptions {
    fn default() -> Self {
        ShellOptions { beta_star: None, r0: None, slack: 1e-2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShellVerdict {
    pub t: f64,
    /// Centred difference of `G`.
    pub derivative: f64,
    /// `(β* γ / (‖X‖∞ t^μ)) G(t)`, the rate the inequality demands.
    pub required: f64,
    /// `None` for `t <= R₀`, where the inequality is not asserted.
    pub holds: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakShellTrace {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub gamma: f64,
    pub mu: f64,
    pub beta_star: f64,
    pub r0: f64,
    pub x_sup: f64,
    /// One entry per interior radius of the schedule.
    pub verdicts: Vec<ShellVerdict>,
    /// Every asserted verdict holds, so the chain of inequalities would force
    /// `c^w_μ >= γ β* / ‖X‖∞`.
    pub consistent: bool,
    pub implied_growth_lower_bound: f64,
    /// The superlevel set reaches the boundary ring of the grid.
    pub touches_boundary: bool,
}

impl WeakShellTrace {
    /// CSV with columns `t,value,lower_bound,verdict`, where `value` is
    /// `G'(t)` and `lower_bound` the demanded rate.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,value,lower_bound,verdict\n");
        for v in &self.verdicts {
            let verdict = match v.holds {
                Some(true) => "ok",
                Some(false) => "violated",
                None => "n/a",
            };
            s.push_str(&format!("{:e},{:e},{:e},{verdict}\n", v.t, v.derivative, v.required));
        }
        s
    }
}

fn default_r0(gc: &GrowthCondition, beta_star: f64, radii: &[f64]) -> f64 {
    // running minimum of b over [0, t], sampled finely
    let mut inf_b = gc.b.value(0.0);
    let mut prev = 0.0;
    let mut r0 = f64::INFINITY;
    for &t in radii {
        for i in 1..=64 {
            let s = prev + (t - prev) * i as f64 / 64.0;
            inf_b = inf_b.min(gc.b.value(s));
        }
        prev = t;
        let need = if gc.mu == 0.0 { beta_star } else { beta_star * t.powf(-gc.mu) };
        if inf_b >= need {
            if r0.is_infinite() {
                r0 = t;
            }
        } else {
            r0 = f64::INFINITY;
        }
    }
    r0
}

/// Tracks `G(t)` over the radius schedule for the superlevel set `{ψ > γ}`
/// of a grid field, with `X` the vector field of the inequality.
#[allow(clippy::too_many_arguments)]
pub fn weakform_shell(
    domain: &GridDomain,
    psi: &[f64],
    x: &[[f64; 2]],
    w: &Weight,
    gc: &GrowthCondition,
    gamma: f64,
    radii: &[f64],
    opts: &ShellOptions,
) -> Result<WeakShellTrace> {
    let n = domain.len();
    if psi.len() != n || x.len() != n {
        return Err(Error::Parameter("fields do not match the grid".into()));
    }
    if radii.len() < 3 || radii[0] <= 0.0 || radii.windows(2).any(|p| p[1] <= p[0]) {
        return Err(Error::Parameter("radii must be positive, increasing, at least three".into()));
    }
    let h = domain.spacing;
    let [ox, oy] = domain.origin;
    let reach = [
        -(ox - 0.5 * h),
        ox + (domain.nx as f64 - 0.5) * h,
        -(oy - 0.5 * h),
        oy + (domain.ny as f64 - 0.5) * h,
    ]
    .into_iter()
    .fold(f64::INFINITY, f64::min);
    let t_max = *radii.last().unwrap();
    if t_max > reach * (1.0 + 1e-12) {
        return Err(Error::Parameter(format!("radius {t_max} leaves the grid (reach {reach})")));
    }
    let cells: Vec<usize> = (0..n).filter(|&k| domain.mask[k] != CellLabel::Outside && psi[k] > gamma).collect();
    if cells.is_empty() {
        return Err(Error::DegenerateDomain(format!("superlevel set {{psi > {gamma}}} is empty")));
    }
    let touches_boundary = cells.iter().any(|&k| domain.mask[k] == CellLabel::Boundary);
    let x_sup = (0..n)
        .filter(|&k| domain.mask[k] != CellLabel::Outside)
        .map(|k| x[k][0].hypot(x[k][1]))
        .fold(0.0, f64::max);
    let beta_star = opts.beta_star.unwrap_or(0.99 * gc.beta);
    let r0 = opts.r0.unwrap_or_else(|| default_r0(gc, beta_star, radii));

    let values: Vec<f64> = radii
        .iter()
        .map(|&t| {
            cells
                .iter()
                .map(|&k| {
                    let p = domain.position(k);
                    let area = disk_rect_area(t, p[0] - 0.5 * h, p[0] + 0.5 * h, p[1] - 0.5 * h, p[1] + 0.5 * h);
                    if area > 0.0 {
                        w.w(p[0].hypot(p[1])) * area
                    } else {
                        0.0
                    }
                })
                .sum()
        })
        .collect();

    let mut verdicts = Vec::with_capacity(radii.len() - 2);
    for i in 1..radii.len() - 1 {
        let t = radii[i];
        let derivative = (values[i + 1] - values[i - 1]) / (radii[i + 1] - radii[i - 1]);
        let rate = if gc.mu == 0.0 { gamma } else { gamma / t.powf(gc.mu) };
        let required = if x_sup > 0.0 { beta_star * rate * values[i] / x_sup } else { f64::INFINITY };
        let holds = (t > r0).then_some(derivative >= required * (1.0 - opts.slack));
        verdicts.push(ShellVerdict { t, derivative, required, holds });
    }
    let asserted: Vec<bool> = verdicts.iter().filter_map(|v| v.holds).collect();
    let consistent = !asserted.is_empty() && asserted.iter().all(|h| *h);
    Ok(WeakShellTrace {
        times: radii.to_vec(),
        values,
        gamma,
        mu: gc.mu,
        beta_star,
        r0,
        x_sup,
        verdicts,
        consistent,
        implied_growth_lower_bound: if x_sup > 0.0 { gamma * beta_star / x_sup } else { f64::INFINITY },
        touches_boundary,
    })
}
