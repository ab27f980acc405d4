use crate::error::{Error, Result};

/// A subset of a uniform planar grid, measured by cell counting.
///
/// Cell `(i, j)` sits at `origin + (i, j)·spacing` and carries area
/// `spacing²` times its weight.
#[derive(Debug, Clone)]
pub struct MaskedDomain {
    nx: usize,
    ny: usize,
    spacing: f64,
    origin: [f64; 2],
    center: [f64; 2],
    mask: Vec<bool>,
    weights: Option<Vec<f64>>,
}

impl MaskedDomain {
    pub fn new(nx: usize, ny: usize, spacing: f64, center: [f64; 2], mask: Vec<bool>, weights: Option<Vec<f64>>) -> Result<Self> {
        if mask.len() != nx * ny {
            return Err(Error::Parameter(format!("mask has {} cells, expected {}", mask.len(), nx * ny)));
        }
        if !(spacing > 0.0) {
            return Err(Error::Parameter("spacing must be positive".into()));
        }
        if let Some(w) = &weights {
            if w.len() != nx * ny {
                return Err(Error::Parameter("weights must match the mask".into()));
            }
            if w.iter().zip(&mask).any(|(&v, &m)| m && !(v > 0.0)) {
                return Err(Error::Parameter("weights must be positive on the domain".into()));
            }
        }
        Ok(MaskedDomain { nx, ny, spacing, origin: [0.0, 0.0], center, mask, weights })
    }

    /// Full rectangle.
    pub fn rectangle(nx: usize, ny: usize, spacing: f64, center: [f64; 2]) -> Self {
        Self::new(nx, ny, spacing, center, vec![true; nx * ny], None).unwrap()
    }

    pub fn with_origin(mut self, origin: [f64; 2]) -> Self {
        self.origin = origin;
        self
    }

    pub fn with_center(mut self, center: [f64; 2]) -> Self {
        self.center = center;
        self
    }

    pub fn center(&self) -> [f64; 2] {
        self.center
    }

    pub fn position(&self, i: usize, j: usize) -> [f64; 2] {
        [self.origin[0] + i as f64 * self.spacing, self.origin[1] + j as f64 * self.spacing]
    }

    pub fn contains_cell(&self, i: usize, j: usize) -> bool {
        self.mask[j * self.nx + i]
    }

    /// Intersection with another domain on the same lattice.
    pub fn intersect(&self, other: &MaskedDomain) -> Result<MaskedDomain> {
        if self.nx != other.nx || self.ny != other.ny || self.spacing != other.spacing {
            return Err(Error::Parameter("domains live on different grids".into()));
        }
        let mask = self.mask.iter().zip(&other.mask).map(|(a, b)| *a && *b).collect();
        let mut d = self.clone();
        d.mask = mask;
        Ok(d)
    }

    /// `log vol(B_R(center) ∩ Ω)` for increasing radii; cells count when their
    /// centre lies strictly inside the ball.
    pub fn log_ball_volumes(&self, radii: &[f64]) -> Vec<f64> {
        let area = self.spacing * self.spacing;
        let mut cells: Vec<(f64, f64)> = Vec::new();
        for j in 0..self.ny {
            for i in 0..self.nx {
                let k = j * self.nx + i;
                if !self.mask[k] {
                    continue;
                }
                let p = self.position(i, j);
                let d = ((p[0] - self.center[0]).powi(2) + (p[1] - self.center[1]).powi(2)).sqrt();
                let w = self.weights.as_ref().map_or(1.0, |w| w[k]);
                cells.push((d, w * area));
            }
        }
        cells.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut cumulative = Vec::with_capacity(cells.len());
        let mut acc = 0.0;
        for c in &cells {
            acc += c.1;
            cumulative.push(acc);
        }
        radii
            .iter()
            .map(|&r| {
                let n = cells.partition_point(|c| c.0 < r);
                if n == 0 {
                    f64::NEG_INFINITY
                } else {
                    cumulative[n - 1].ln()
                }
            })
            .collect()
    }

    pub fn total_volume(&self) -> f64 {
        self.log_ball_volumes(&[f64::INFINITY])[0].exp()
    }
}
