//! Dense least squares for tall, skinny designs.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::svd::{singular_values, thin_svd};

/// Relative singular value threshold below which a design is rank deficient.
pub const RANK_TOL: f64 = 1e-12;
/// Condition estimate of `R` above which the SVD path is taken.
const COND_SWITCH: f64 = 1e12;

/// Factorization of a tall design `A`, reusable for several right-hand sides.
///
/// Householder QR with column-norm pivoting; the SVD of `A` is used instead
/// when `R` is too badly conditioned.
#[derive(Debug, Clone)]
pub struct LstsqSolver {
    m: usize,
    k: usize,
    kind: Kind,
}

#[derive(Debug, Clone)]
enum Kind {
    Qr {
        r: DMatrix<f64>,
        reflectors: Vec<DVector<f64>>,
        perm: Vec<usize>,
    },
    Svd {
        u: DMatrix<f64>,
        s: DVector<f64>,
        vt: DMatrix<f64>,
    },
}

impl LstsqSolver {
    pub fn new(a: &DMatrix<f64>) -> Result<Self> {
        let (m, k) = a.shape();
        if m < k {
            return Err(Error::RankDeficient { ratio: 0.0 });
        }
        let (packed, reflectors, perm) = householder_qr(a.clone());
        let r = packed.view((0, 0), (k, k)).upper_triangle();
        if k > 0 {
            let sv = singular_values(&r);
            let (smax, smin) = (sv.max(), sv.min());
            if !(smax > 0.0) || !smax.is_finite() {
                return Err(Error::RankDeficient { ratio: 0.0 });
            }
            if smin / smax <= 1.0 / COND_SWITCH {
                return Self::svd(a);
            }
        }
        Ok(Self {
            m,
            k,
            kind: Kind::Qr {
                r,
                reflectors,
                perm,
            },
        })
    }

    fn svd(a: &DMatrix<f64>) -> Result<Self> {
        let (m, k) = a.shape();
        let svd = thin_svd(a);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        let ratio = if smax > 0.0 { smin / smax } else { 0.0 };
        if !(ratio >= RANK_TOL) {
            return Err(Error::RankDeficient { ratio });
        }
        Ok(Self {
            m,
            k,
            kind: Kind::Svd {
                u: svd.u,
                s: svd.singular_values,
                vt: svd.v.transpose(),
            },
        })
    }

    pub fn ncols(&self) -> usize {
        self.k
    }

    pub fn solve(&self, b: &DVector<f64>) -> Result<DVector<f64>> {
        if b.len() != self.m {
            return Err(Error::DimensionMismatch {
                expected: self.m,
                found: b.len(),
            });
        }
        match &self.kind {
            Kind::Qr {
                r,
                reflectors,
                perm,
            } => {
                let mut qtb = b.clone();
                for (j, v) in reflectors.iter().enumerate() {
                    let vn = v.norm_squared();
                    if vn == 0.0 {
                        continue;
                    }
                    let mut bt = qtb.rows_mut(j, self.m - j);
                    let dot = v.dot(&bt);
                    bt.axpy(-2.0 * dot / vn, v, 1.0);
                }
                let y = r
                    .solve_upper_triangular(&qtb.rows(0, self.k).into_owned())
                    .ok_or(Error::RankDeficient { ratio: 0.0 })?;
                let mut x = DVector::zeros(self.k);
                for (i, &p) in perm.iter().enumerate() {
                    x[p] = y[i];
                }
                Ok(x)
            }
            Kind::Svd { u, s, vt } => {
                let mut c = u.transpose() * b;
                for (ci, si) in c.iter_mut().zip(s.iter()) {
                    *ci /= si;
                }
                Ok(vt.transpose() * c)
            }
        }
    }
}

/// Minimizes `‖A x - b‖` for `A` with at least as many rows as columns.
pub fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    if b.len() != a.nrows() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            found: b.len(),
        });
    }
    LstsqSolver::new(a)?.solve(b)
}

/// Householder QR with column pivoting on the remaining column norms.
/// Returns the matrix with `R` in its upper triangle, the reflectors and the
/// column permutation (`perm[i]` is the original index of column `i`).
fn householder_qr(mut a: DMatrix<f64>) -> (DMatrix<f64>, Vec<DVector<f64>>, Vec<usize>) {
    let (m, k) = a.shape();
    let mut perm: Vec<usize> = (0..k).collect();
    let mut norms: Vec<f64> = (0..k).map(|j| a.column(j).norm_squared()).collect();
    let mut reflectors = Vec::with_capacity(k);
    for j in 0..k {
        let (best, _) = norms[j..]
            .iter()
            .enumerate()
            .fold((0, -1.0), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
        let p = j + best;
        if p != j {
            a.swap_columns(j, p);
            norms.swap(j, p);
            perm.swap(j, p);
        }
        let mut v: DVector<f64> = a.view((j, j), (m - j, 1)).column(0).into_owned();
        let alpha = v.norm();
        if alpha == 0.0 {
            reflectors.push(DVector::zeros(m - j));
            continue;
        }
        let sign = if v[0] >= 0.0 { 1.0 } else { -1.0 };
        v[0] += sign * alpha;
        let vnorm2 = v.norm_squared();
        // H = I - 2 v v^T / (v^T v)
        for c in j..k {
            let mut block = a.view_mut((j, c), (m - j, 1));
            let mut col = block.column_mut(0);
            let dot = v.dot(&col);
            col.axpy(-2.0 * dot / vnorm2, &v, 1.0);
        }
        for c in j + 1..k {
            norms[c] = a.view((j + 1, c), (m - j - 1, 1)).norm_squared();
        }
        reflectors.push(v);
    }
    (a, reflectors, perm)
}
