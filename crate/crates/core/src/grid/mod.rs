//! Damped Newton solver for the capillary and prescribed mean curvature
//! equations on masked planar grids.
//!
//! The discrete operator is a divergence of face fluxes
//! `F = p / √(1 + p² + t²)`, with `p` the central normal difference across
//! the face and `t` the averaged tangential difference of the two adjacent
//! cells. Every face flux is bounded by 1, as in the continuous problem.

mod banded;

pub use banded::BandMatrix;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functions::RadialFn;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellLabel {
    Interior,
    Boundary,
    Outside,
}

/// A planar domain sampled at the nodes `origin + spacing·(i, j)`.
/// Cells are stored row-major, index `j·nx + i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridDomain {
    pub nx: usize,
    pub ny: usize,
    pub spacing: f64,
    pub origin: [f64; 2],
    pub mask: Vec<CellLabel>,
    /// Dirichlet values; only entries on boundary cells are read.
    pub boundary_data: Vec<f64>,
}

impl GridDomain {
    /// Rectangle whose outer ring of cells is the boundary.
    pub fn rectangle(nx: usize, ny: usize, spacing: f64, origin: [f64; 2]) -> Result<Self> {
        let mask = (0..nx * ny)
            .map(|k| {
                let (i, j) = (k % nx, k / nx);
                if i == 0 || j == 0 || i == nx - 1 || j == ny - 1 {
                    CellLabel::Boundary
                } else {
                    CellLabel::Interior
                }
            })
            .collect();
        Self::from_mask(nx, ny, spacing, origin, mask)
    }

    /// `[0, 1]²` with `n` nodes per side.
    pub fn unit_square(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::Parameter(format!("grid needs n >= 3, got {n}")));
        }
        Self::rectangle(n, n, 1.0 / (n - 1) as f64, [0.0, 0.0])
    }

    /// Disk of the given radius centred at the origin, `n` nodes across.
    /// Nodes within the closed disk whose four neighbours are also inside are
    /// interior; the remaining inside nodes form the boundary.
    pub fn disk(n: usize, radius: f64) -> Result<Self> {
        if n < 5 || !(radius > 0.0) {
            return Err(Error::Parameter(format!("disk needs n >= 5 and radius > 0, got {n}, {radius}")));
        }
        let h = 2.0 * radius / (n - 1) as f64;
        let origin = [-radius, -radius];
        let inside = |i: isize, j: isize| -> bool {
            if i < 0 || j < 0 || i >= n as isize || j >= n as isize {
                return false;
            }
            let (x, y) = (origin[0] + h * i as f64, origin[1] + h * j as f64);
            x * x + y * y <= radius * radius * (1.0 + 1e-12)
        };
        let mask = (0..n * n)
            .map(|k| {
                let (i, j) = ((k % n) as isize, (k / n) as isize);
                if !inside(i, j) {
                    CellLabel::Outside
                } else if inside(i - 1, j) && inside(i + 1, j) && inside(i, j - 1) && inside(i, j + 1) {
                    CellLabel::Interior
                } else {
                    CellLabel::Boundary
                }
            })
            .collect();
        Self::from_mask(n, n, h, origin, mask)
    }

    pub fn from_mask(nx: usize, ny: usize, spacing: f64, origin: [f64; 2], mask: Vec<CellLabel>) -> Result<Self> {
        let d = GridDomain { nx, ny, spacing, origin, boundary_data: vec![0.0; mask.len()], mask };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx < 3 || self.ny < 3 {
            return Err(Error::Parameter(format!("grid needs nx, ny >= 3, got {} x {}", self.nx, self.ny)));
        }
        if !(self.spacing > 0.0) || !self.spacing.is_finite() {
            return Err(Error::Parameter(format!("spacing must be positive, got {}", self.spacing)));
        }
        let n = self.nx * self.ny;
        if self.mask.len() != n || self.boundary_data.len() != n {
            return Err(Error::Parameter(format!("mask and boundary data need {n} entries")));
        }
        let interior: Vec<usize> = self.interior_cells();
        if interior.is_empty() {
            return Err(Error::DegenerateDomain("no interior cells".into()));
        }
        for &k in &interior {
            for nb in self.neighbours(k) {
                match nb {
                    Some(c) if self.mask[c] != CellLabel::Outside => {}
                    _ => {
                        let (i, j) = (k % self.nx, k / self.nx);
                        return Err(Error::DegenerateDomain(format!(
                            "interior cell ({i}, {j}) touches the outside"
                        )));
                    }
                }
            }
        }
        // connectivity of the interior
        let mut seen = vec![false; n];
        let mut stack = vec![interior[0]];
        seen[interior[0]] = true;
        let mut count = 0;
        while let Some(k) = stack.pop() {
            count += 1;
            for c in self.neighbours(k).into_iter().flatten() {
                if !seen[c] && self.mask[c] == CellLabel::Interior {
                    seen[c] = true;
                    stack.push(c);
                }
            }
        }
        if count != interior.len() {
            return Err(Error::DegenerateDomain("interior cells are not connected".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn position(&self, k: usize) -> [f64; 2] {
        let (i, j) = (k % self.nx, k / self.nx);
        [self.origin[0] + self.spacing * i as f64, self.origin[1] + self.spacing * j as f64]
    }

    pub fn interior_cells(&self) -> Vec<usize> {
        (0..self.len()).filter(|&k| self.mask[k] == CellLabel::Interior).collect()
    }

    pub fn boundary_cells(&self) -> Vec<usize> {
        (0..self.len()).filter(|&k| self.mask[k] == CellLabel::Boundary).collect()
    }

    /// West, east, south, north neighbours.
    fn neighbours(&self, k: usize) -> [Option<usize>; 4] {
        let (i, j) = (k % self.nx, k / self.nx);
        [
            (i > 0).then(|| k - 1),
            (i + 1 < self.nx).then(|| k + 1),
            (j > 0).then(|| k - self.nx),
            (j + 1 < self.ny).then(|| k + self.nx),
        ]
    }

    fn available(&self, k: Option<usize>) -> Option<usize> {
        k.filter(|&c| self.mask[c] != CellLabel::Outside)
    }

    /// Sets the boundary values from a function of position.
    pub fn with_boundary(mut self, f: impl Fn(f64, f64) -> f64) -> Self {
        for k in 0..self.len() {
            self.boundary_data[k] = if self.mask[k] == CellLabel::Boundary {
                let [x, y] = self.position(k);
                f(x, y)
            } else {
                0.0
            };
        }
        self
    }

    /// Full-grid field with boundary values in place and zeros elsewhere.
    pub fn boundary_field(&self) -> Vec<f64> {
        (0..self.len())
            .map(|k| if self.mask[k] == CellLabel::Boundary { self.boundary_data[k] } else { 0.0 })
            .collect()
    }

    /// Samples `f` on every non-outside cell (outside cells get 0).
    pub fn sample(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        (0..self.len())
            .map(|k| {
                if self.mask[k] == CellLabel::Outside {
                    0.0
                } else {
                    let [x, y] = self.position(k);
                    f(x, y)
                }
            })
            .collect()
    }

    /// CSV with columns `i,j,x,y,label,u`.
    pub fn to_csv(&self, field: &[f64]) -> String {
        let mut s = String::from("i,j,x,y,label,u\n");
        for k in 0..self.len() {
            let [x, y] = self.position(k);
            let label = match self.mask[k] {
                CellLabel::Interior => "interior",
                CellLabel::Boundary => "boundary",
                CellLabel::Outside => "outside",
            };
            s.push_str(&format!("{},{},{x:e},{y:e},{label},{:e}\n", k % self.nx, k / self.nx, field[k]));
        }
        s
    }
}

const BINARY_HEADER: usize = 24;

/// Flat binary layout: `nx: u64, ny: u64, spacing: f64` (little endian)
/// followed by `nx·ny` row-major `f64` values.
pub fn encode_field(nx: usize, ny: usize, spacing: f64, values: &[f64]) -> Result<Vec<u8>> {
    if values.len() != nx * ny {
        return Err(Error::Parameter(format!("field has {} values, expected {}", values.len(), nx * ny)));
    }
    let mut out = Vec::with_capacity(BINARY_HEADER + 8 * values.len());
    out.extend_from_slice(&(nx as u64).to_le_bytes());
    out.extend_from_slice(&(ny as u64).to_le_bytes());
    out.extend_from_slice(&spacing.to_le_bytes());
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

/// Inverse of [`encode_field`]: `(nx, ny, spacing, values)`.
pub fn decode_field(bytes: &[u8]) -> Result<(usize, usize, f64, Vec<f64>)> {
    let word = |k: usize| -> [u8; 8] { bytes[8 * k..8 * k + 8].try_into().unwrap() };
    if bytes.len() < BINARY_HEADER {
        return Err(Error::Parameter("binary field shorter than its header".into()));
    }
    let nx = u64::from_le_bytes(word(0)) as usize;
    let ny = u64::from_le_bytes(word(1)) as usize;
    let spacing = f64::from_le_bytes(word(2));
    if bytes.len() != BINARY_HEADER + 8 * nx * ny {
        return Err(Error::Parameter(format!("binary field size does not match header {nx} x {ny}")));
    }
    let values = (0..nx * ny).map(|k| f64::from_le_bytes(word(3 + k))).collect();
    Ok((nx, ny, spacing, values))
}

/// Right-hand side of `div(∇u/√(1+|∇u|²)) = ...`; coefficients are
/// functions of `|x|`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GridEquation {
    /// `= b(x) u`
    Capillary { b: RadialFn },
    /// `= 2 H(x)`
    Pmc {
        #[serde(rename = "H")]
        h: RadialFn,
    },
}

impl GridEquation {
    pub fn capillary(b: f64) -> Self {
        GridEquation::Capillary { b: RadialFn::constant(b) }
    }

    pub fn pmc(h: f64) -> Self {
        GridEquation::Pmc { h: RadialFn::constant(h) }
    }

    /// `(source, ∂source/∂u)` at radius `r`.
    fn source(&self, r: f64, u: f64) -> (f64, f64) {
        match self {
            GridEquation::Capillary { b } => {
                let bv = b.value(r);
                (bv * u, bv)
            }
            GridEquation::Pmc { h } => (2.0 * h.value(r), 0.0),
        }
    }

    fn check(&self, d: &GridDomain) -> Result<()> {
        if let GridEquation::Capillary { b } = self {
            for k in d.interior_cells() {
                let [x, y] = d.position(k);
                let v = b.value(x.hypot(y));
                if !(v >= 0.0) {
                    return Err(Error::Parameter(format!("capillary coefficient must be >= 0, got {v}")));
                }
            }
        }
        Ok(())
    }
}

/// A linear form `Σ c_k u_k` over cells.
type Stencil = Vec<(usize, f64)>;

#[derive(Debug, Clone)]
struct Face {
    p: Stencil,
    t: Stencil,
}

/// Precomputed faces and the unknown numbering of a domain.
#[derive(Debug, Clone)]
struct Scheme {
    /// `[west, east, south, north]` face ids per interior cell, in unknown order.
    cells: Vec<(usize, [usize; 4])>,
    faces: Vec<Face>,
    unknown: Vec<Option<usize>>,
    band: usize,
}

impl Scheme {
    fn new(d: &GridDomain) -> Self {
        let h = d.spacing;
        let mut unknown = vec![None; d.len()];
        let interior = d.interior_cells();
        for (n, &k) in interior.iter().enumerate() {
            unknown[k] = Some(n);
        }
        // derivative along an axis at a cell from whatever neighbours exist
        let axis_diff = |k: usize, axis: usize| -> Stencil {
            let nb = d.neighbours(k);
            let (lo, hi) = (d.available(nb[2 * axis]), d.available(nb[2 * axis + 1]));
            match (lo, hi) {
                (Some(a), Some(b)) => vec![(b, 0.5 / h), (a, -0.5 / h)],
                (None, Some(b)) => vec![(b, 1.0 / h), (k, -1.0 / h)],
                (Some(a), None) => vec![(k, 1.0 / h), (a, -1.0 / h)],
                (None, None) => Vec::new(),
            }
        };
        let mut face_id = std::collections::HashMap::new();
        let mut faces = Vec::new();
        let mut cells = Vec::with_capacity(interior.len());
        for &k in &interior {
            let nb = d.neighbours(k);
            let mut ids = [0; 4];
            for (slot, id) in ids.iter_mut().enumerate() {
                let axis = slot / 2;
                let other = nb[slot].unwrap();
                let (a, b) = if slot % 2 == 0 { (other, k) } else { (k, other) };
                *id = *face_id.entry((a, b)).or_insert_with(|| {
                    let p = vec![(b, 1.0 / h), (a, -1.0 / h)];
                    let (ta, tb) = (axis_diff(a, 1 - axis), axis_diff(b, 1 - axis));
                    let t = match (ta.is_empty(), tb.is_empty()) {
                        (false, false) => ta.iter().chain(&tb).map(|&(c, w)| (c, 0.5 * w)).collect(),
                        (false, true) => ta,
                        (true, false) => tb,
                        (true, true) => Vec::new(),
                    };
                    faces.push(Face { p, t });
                    faces.len() - 1
                });
            }
            cells.push((k, ids));
        }
        let mut band = 0;
        for (row, (_, ids)) in cells.iter().enumerate() {
            for &f in ids {
                for &(c, _) in faces[f].p.iter().chain(&faces[f].t) {
                    if let Some(col) = unknown[c] {
                        band = band.max(row.abs_diff(col));
                    }
                }
            }
        }
        Scheme { cells, faces, unknown, band }
    }

    /// Face flux `p/√(1+p²+t²)` and its partials in `p` and `t`.
    fn flux(face: &Face, u: &[f64]) -> (f64, f64, f64) {
        let p: f64 = face.p.iter().map(|&(c, w)| w * u[c]).sum();
        let t: f64 = face.t.iter().map(|&(c, w)| w * u[c]).sum();
        let q = 1.0 + p * p + t * t;
        let s = q.sqrt();
        let s3 = q * s;
        (p / s, (1.0 + t * t) / s3, -p * t / s3)
    }

    fn residual(&self, d: &GridDomain, eq: &GridEquation, u: &[f64]) -> Vec<f64> {
        let fluxes: Vec<f64> = self.faces.iter().map(|f| Self::flux(f, u).0).collect();
        let h = d.spacing;
        self.cells
            .iter()
            .map(|&(k, [w, e, s, n])| {
                let [x, y] = d.position(k);
                let div = ((fluxes[e] - fluxes[w]) + (fluxes[n] - fluxes[s])) / h;
                div - eq.source(x.hypot(y), u[k]).0
            })
            .collect()
    }

    fn jacobian(&self, d: &GridDomain, eq: &GridEquation, u: &[f64]) -> BandMatrix {
        let n = self.cells.len();
        let h = d.spacing;
        let mut jac = BandMatrix::zeros(n, self.band, self.band);
        let partials: Vec<(f64, f64)> = self
            .faces
            .iter()
            .map(|f| {
                let (_, fp, ft) = Self::flux(f, u);
                (fp, ft)
            })
            .collect();
        for (row, &(k, ids)) in self.cells.iter().enumerate() {
            for (slot, &f) in ids.iter().enumerate() {
                let sign = if slot % 2 == 0 { -1.0 } else { 1.0 } / h;
                let (fp, ft) = partials[f];
                let face = &self.faces[f];
                for &(c, wgt) in &face.p {
                    if let Some(col) = self.unknown[c] {
                        jac.add(row, col, sign * fp * wgt);
                    }
                }
                for &(c, wgt) in &face.t {
                    if let Some(col) = self.unknown[c] {
                        jac.add(row, col, sign * ft * wgt);
                    }
                }
            }
            let [x, y] = d.position(k);
            jac.add(row, row, -eq.source(x.hypot(y), u[k]).1);
        }
        jac
    }

    /// Discrete Laplace extension of the boundary data.
    fn laplace(&self, d: &GridDomain) -> Result<Vec<f64>> {
        let h2 = d.spacing * d.spacing;
        let n = self.cells.len();
        let mut a = BandMatrix::zeros(n, self.band, self.band);
        let mut rhs = vec![0.0; n];
        let bdry = d.boundary_field();
        for (row, &(k, _)) in self.cells.iter().enumerate() {
            for nb in d.neighbours(k).into_iter().flatten() {
                a.add(row, row, -1.0 / h2);
                match self.unknown[nb] {
                    Some(col) => a.add(row, col, 1.0 / h2),
                    None => rhs[row] -= bdry[nb] / h2,
                }
            }
        }
        let x = a.solve(&rhs)?;
        let mut u = bdry;
        for (row, &(k, _)) in self.cells.iter().enumerate() {
            u[k] = x[row];
        }
        Ok(u)
    }
}

/// Per-cell residual of the discrete equation at the interior cells, in the
/// order of [`GridDomain::interior_cells`].
pub fn assemble_residual(d: &GridDomain, u: &[f64], eq: &GridEquation) -> Result<Vec<f64>> {
    if u.len() != d.len() {
        return Err(Error::Parameter(format!("field has {} values, grid has {}", u.len(), d.len())));
    }
    Ok(Scheme::new(d).residual(d, eq, u))
}

/// All face fluxes `p/√(1+p²+t²)` of the field (each bounded by 1).
pub fn face_fluxes(d: &GridDomain, u: &[f64]) -> Vec<f64> {
    let s = Scheme::new(d);
    s.faces.iter().map(|f| Scheme::flux(f, u).0).collect()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, x| a.max(x.abs()))
}

fn two_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSolution {
    pub nx: usize,
    pub ny: usize,
    pub spacing: f64,
    /// Full-grid field; outside cells hold 0.
    pub u: Vec<f64>,
    /// Max-norm of the interior residual.
    pub residual_norm: f64,
    pub newton_iters: usize,
    pub converged: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

impl GridSolution {
    pub fn sup_abs(&self, d: &GridDomain) -> f64 {
        (0..d.len()).filter(|&k| d.mask[k] != CellLabel::Outside).fold(0.0, |a, k| a.max(self.u[k].abs()))
    }

    pub fn to_binary(&self) -> Result<Vec<u8>> {
        encode_field(self.nx, self.ny, self.spacing, &self.u)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iters: usize,
    /// Armijo sufficient-decrease constant.
    pub armijo: f64,
    pub min_step: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions { tol: 1e-10, max_iters: 50, armijo: 1e-4, min_step: 1e-10 }
    }
}

/// Damped Newton iteration starting from the discrete Laplace extension.
///
/// A stalled line search returns a solution with `converged = false` and the
/// last iterate rather than an error.
pub fn newton_solve(d: &GridDomain, eq: &GridEquation, tol: f64, max_iters: usize) -> Result<GridSolution> {
    newton_with(d, eq, &NewtonOptions { tol, max_iters, ..Default::default() })
}

pub fn newton_with(d: &GridDomain, eq: &GridEquation, opts: &NewtonOptions) -> Result<GridSolution> {
    d.validate()?;
    eq.check(d)?;
    if d.boundary_cells().iter().any(|&k| !d.boundary_data[k].is_finite()) {
        return Err(Error::Numeric("boundary data not finite".into()));
    }
    let scheme = Scheme::new(d);
    let mut u = scheme.laplace(d)?;
    let mut res = scheme.residual(d, eq, &u);
    let mut iters = 0;
    let finish = |u: Vec<f64>, res: &[f64], iters, converged, failure| GridSolution {
        nx: d.nx,
        ny: d.ny,
        spacing: d.spacing,
        u,
        residual_norm: inf_norm(res),
        newton_iters: iters,
        converged,
        failure,
    };
    loop {
        if inf_norm(&res) <= opts.tol {
            return Ok(finish(u, &res, iters, true, None));
        }
        if iters >= opts.max_iters {
            let msg = format!("no convergence after {iters} Newton iterations");
            return Ok(finish(u, &res, iters, false, Some(msg)));
        }
        iters += 1;
        let jac = scheme.jacobian(d, eq, &u);
        let neg: Vec<f64> = res.iter().map(|r| -r).collect();
        let step = jac.solve(&neg)?;
        let n0 = two_norm(&res);
        let mut lambda = 1.0;
        loop {
            let mut trial = u.clone();
            for (row, &(k, _)) in scheme.cells.iter().enumerate() {
                trial[k] += lambda * step[row];
            }
            let r_trial = scheme.residual(d, eq, &trial);
            let n1 = two_norm(&r_trial);
            if n1.is_finite() && n1 <= (1.0 - opts.armijo * lambda) * n0 {
                u = trial;
                res = r_trial;
                break;
            }
            lambda *= 0.5;
            if lambda < opts.min_step {
                let msg = format!("line search stalled at iteration {iters} (residual {})", inf_norm(&res));
                return Ok(finish(u, &res, iters, false, Some(msg)));
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub max_interior_diff: f64,
    pub max_boundary_diff: f64,
    pub slack: f64,
    pub pass: bool,
    pub newton_iters: [usize; 2],
}

/// Slack allowed on converged solves when comparing interior and boundary.
pub const COMPARISON_SLACK: f64 = 1e-6;

/// Solves with two sets of boundary data and checks
/// `max_interior (u − v) <= max_boundary (u − v) + slack`.
pub fn comparison_experiment(d: &GridDomain, data_u: &[f64], data_v: &[f64], eq: &GridEquation, tol: f64) -> Result<ComparisonReport> {
    if data_u.len() != d.len() || data_v.len() != d.len() {
        return Err(Error::Parameter("boundary data must cover the whole grid".into()));
    }
    let solve = |data: &[f64]| -> Result<GridSolution> {
        let mut dd = d.clone();
        dd.boundary_data = data.to_vec();
        let s = newton_solve(&dd, eq, tol, 50)?;
        if !s.converged {
            return Err(Error::NoConvergence(s.failure.unwrap_or_default()));
        }
        Ok(s)
    };
    let (su, sv) = (solve(data_u)?, solve(data_v)?);
    let diff = |k: usize| su.u[k] - sv.u[k];
    let max_interior_diff = d.interior_cells().into_iter().map(diff).fold(f64::NEG_INFINITY, f64::max);
    let max_boundary_diff = d.boundary_cells().into_iter().map(diff).fold(f64::NEG_INFINITY, f64::max);
    Ok(ComparisonReport {
        max_interior_diff,
        max_boundary_diff,
        slack: COMPARISON_SLACK,
        pass: max_interior_diff <= max_boundary_diff + COMPARISON_SLACK,
        newton_iters: [su.newton_iters, sv.newton_iters],
    })
}

/// Compares analytic Jacobian columns at `probes` random interior cells with
/// central differences (step `1e-6 (1 + |u_k|)`); returns the worst relative
/// column error in the max norm.
pub fn jacobian_check(d: &GridDomain, eq: &GridEquation, u: &[f64], probes: usize, seed: u64) -> Result<f64> {
    if probes == 0 {
        return Err(Error::Parameter("probes must be >= 1".into()));
    }
    if u.len() != d.len() {
        return Err(Error::Parameter("field does not match the grid".into()));
    }
    let scheme = Scheme::new(d);
    let jac = scheme.jacobian(d, eq, u);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = scheme.cells.len();
    let mut worst = 0.0f64;
    for _ in 0..probes {
        let col = rng.random_range(0..n);
        let k = scheme.cells[col].0;
        let step = 1e-6 * (1.0 + u[k].abs());
        let mut up = u.to_vec();
        up[k] += step;
        let mut dn = u.to_vec();
        dn[k] -= step;
        let (rp, rm) = (scheme.residual(d, eq, &up), scheme.residual(d, eq, &dn));
        let lo = col.saturating_sub(scheme.band);
        let hi = (col + scheme.band).min(n - 1);
        let mut diff = 0.0f64;
        let mut size = 0.0f64;
        for row in lo..=hi {
            let fd = (rp[row] - rm[row]) / (2.0 * step);
            diff = diff.max((jac.get(row, col) - fd).abs());
            size = size.max(fd.abs());
        }
        worst = worst.max(diff / size.max(1e-300));
    }
    Ok(worst)
}
