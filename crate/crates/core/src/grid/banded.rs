//! Banded LU factorization with partial pivoting.

use crate::error::{Error, Result};

/// Square band matrix with `kl` sub- and `ku` super-diagonals. Storage
/// reserves `kl` extra super-diagonals for the fill created by row swaps.
#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        BandMatrix { n, kl, ku, width, data: vec![0.0; n * width] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        // row i stores columns i-kl ..= i+kl+ku
        if j + self.kl < i || j > i + self.kl + self.ku {
            return None;
        }
        Some(i * self.width + (j + self.kl - i))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |s| self.data[s])
    }

    /// Adds `v` at `(i, j)`; panics outside the declared band.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(
            j + self.kl >= i && j <= i + self.ku,
            "entry ({i}, {j}) outside band kl={} ku={}",
            self.kl,
            self.ku
        );
        let s = self.slot(i, j).unwrap();
        self.data[s] += v;
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.kl);
                let hi = (i + self.ku).min(self.n - 1);
                (lo..=hi).map(|j| self.get(i, j) * x[j]).sum()
            })
            .collect()
    }

    /// Factors in place and solves `A x = b`.
    pub fn solve(mut self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.n;
        let (kl, ku) = (self.kl, self.ku);
        let mut x = b.to_vec();
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = self.get(k, k).abs();
            for i in k + 1..=last {
                let v = self.get(i, k).abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if !(best > 0.0) || !best.is_finite() {
                return Err(Error::Numeric(format!("singular banded matrix at pivot {k}")));
            }
            let col_end = (k + kl + ku).min(n - 1);
            if p != k {
                for j in k..=col_end {
                    let (a, c) = (self.slot(k, j).unwrap(), self.slot(p, j).unwrap());
                    self.data.swap(a, c);
                }
                x.swap(k, p);
            }
            let piv = self.get(k, k);
            let w = self.width;
            let len = col_end - k;
            // row k, columns k+1..=col_end, as one contiguous run
            let pivot_row: Vec<f64> = {
                let start = k * w + kl + 1;
                self.data[start..start + len].to_vec()
            };
            for i in k + 1..=last {
                let si = self.slot(i, k).unwrap();
                let l = self.data[si] / piv;
                if l == 0.0 {
                    continue;
                }
                self.data[si] = 0.0;
                let run = &mut self.data[si + 1..si + 1 + len];
                for (a, &b) in run.iter_mut().zip(&pivot_row) {
                    *a -= l * b;
                }
                x[i] -= l * x[k];
            }
        }
        for k in (0..n).rev() {
            let col_end = (k + kl + ku).min(n - 1);
            let mut s = x[k];
            for j in k + 1..=col_end {
                s -= self.get(k, j) * x[j];
            }
            x[k] = s / self.get(k, k);
        }
        Ok(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn solves_random_band_system_needing_pivots() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (n, kl, ku) = (60, 4, 3);
        let mut a = BandMatrix::zeros(n, kl, ku);
        for i in 0..n {
            for j in i.saturating_sub(kl)..=(i + ku).min(n - 1) {
                // small diagonal forces row exchanges
                let v: f64 = rng.random_range(-1.0..1.0);
                a.add(i, j, if i == j { 1e-3 * v } else { v });
            }
        }
        let x: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let b = a.mul_vec(&x);
        let got = a.clone().solve(&b).unwrap();
        let err = got.iter().zip(&x).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        assert!(err < 1e-9, "{err}");
    }

    #[test]
    fn singular_is_reported() {
        let a = BandMatrix::zeros(3, 1, 1);
        assert!(a.solve(&[1.0, 1.0, 1.0]).is_err());
    }
}
