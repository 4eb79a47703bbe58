//! Upper-banded storage, banded Cholesky and triangular solves.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// `n x n` matrix with nonzeros only in `U[j, j + d]`, `0 <= d <= bw`.
///
/// Used both for upper-triangular factors and for the upper half of
/// symmetric banded matrices. Entry `U[j, j + d]` lives at
/// `data[j * (bw + 1) + d]`.
#[derive(Debug, Clone, PartialEq)]
pub struct UpperBand {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl UpperBand {
    pub fn zeros(n: usize, bw: usize) -> Self {
        Self {
            n,
            bw,
            data: vec![0.0; n * (bw + 1)],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j < i || j - i > self.bw || j >= self.n {
            0.0
        } else {
            self.data[i * (self.bw + 1) + (j - i)]
        }
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(j >= i && j - i <= self.bw && j < self.n);
        self.data[i * (self.bw + 1) + (j - i)] = v;
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(j >= i && j - i <= self.bw && j < self.n);
        self.data[i * (self.bw + 1) + (j - i)] += v;
    }

    /// Upper band of a dense matrix (entries outside the band are ignored).
    pub fn from_dense_upper(m: &DMatrix<f64>, bw: usize) -> Self {
        let n = m.nrows();
        let mut out = Self::zeros(n, bw);
        for i in 0..n {
            for j in i..(i + bw + 1).min(n) {
                out.set(i, j, m[(i, j)]);
            }
        }
        out
    }

    /// Dense upper-triangular matrix.
    pub fn to_dense(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }

    /// Dense symmetric matrix whose upper half is `self`.
    pub fn to_dense_symmetric(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| {
            if i <= j {
                self.get(i, j)
            } else {
                self.get(j, i)
            }
        })
    }

    /// `U x`.
    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for (i, yi) in y.iter_mut().enumerate() {
            let row = &self.data[i * (self.bw + 1)..];
            let hi = self.bw.min(self.n - 1 - i);
            let mut acc = 0.0;
            for d in 0..=hi {
                acc += row[d] * x[i + d];
            }
            *yi = acc;
        }
        y
    }

    /// `U^T x`.
    pub fn mul_t(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for (i, &xi) in x.iter().enumerate().take(self.n) {
            if xi == 0.0 {
                continue;
            }
            let row = &self.data[i * (self.bw + 1)..];
            let hi = self.bw.min(self.n - 1 - i);
            for d in 0..=hi {
                y[i + d] += row[d] * xi;
            }
        }
        y
    }

    /// `S x` where `S` is the symmetric matrix with upper half `self`.
    pub fn mul_symmetric(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.mul(x);
        for (i, &xi) in x.iter().enumerate().take(self.n) {
            let row = &self.data[i * (self.bw + 1)..];
            let hi = self.bw.min(self.n - 1 - i);
            for d in 1..=hi {
                y[i + d] += row[d] * xi;
            }
        }
        y
    }

    /// Solves `U x = b` by back substitution.
    pub fn solve_upper(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        for i in (0..self.n).rev() {
            let row = &self.data[i * (self.bw + 1)..];
            let hi = self.bw.min(self.n - 1 - i);
            let mut acc = x[i];
            for d in 1..=hi {
                acc -= row[d] * x[i + d];
            }
            x[i] = acc / row[0];
        }
        x
    }

    /// Solves `U^T x = b` by forward substitution.
    pub fn solve_upper_t(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        for i in 0..self.n {
            let row = &self.data[i * (self.bw + 1)..];
            let xi = x[i] / row[0];
            x[i] = xi;
            let hi = self.bw.min(self.n - 1 - i);
            for d in 1..=hi {
                x[i + d] -= row[d] * xi;
            }
        }
        x
    }

    /// Cholesky factor `U` (upper, same bandwidth) with `U^T U = S`, where
    /// `S` is the symmetric matrix whose upper half is `self`.
    pub fn cholesky(&self) -> Result<UpperBand> {
        let n = self.n;
        let bw = self.bw;
        let mut u = self.clone();
        // right-looking update: after finishing row i, subtract its outer
        // product from the trailing band
        for i in 0..n {
            let pivot = u.get(i, i);
            if !(pivot > 0.0) || !pivot.is_finite() {
                return Err(Error::NotPositiveDefinite { row: i + 1, pivot });
            }
            let diag = pivot.sqrt();
            let hi = bw.min(n - 1 - i);
            let base = i * (bw + 1);
            u.data[base] = diag;
            for d in 1..=hi {
                u.data[base + d] /= diag;
            }
            for d1 in 1..=hi {
                let v1 = u.data[base + d1];
                if v1 == 0.0 {
                    continue;
                }
                let row = (i + d1) * (bw + 1);
                for d2 in d1..=hi {
                    u.data[row + (d2 - d1)] -= v1 * u.data[base + d2];
                }
            }
        }
        Ok(u)
    }
}
