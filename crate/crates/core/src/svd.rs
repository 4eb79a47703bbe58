//! Thin singular value decomposition by one-sided Jacobi rotations.
//!
//! Meant for tall matrices with few columns, where it is both cheap and
//! accurate in a relative sense.

use nalgebra::{ComplexField, DMatrix, DVector};

const MAX_SWEEPS: usize = 80;

/// `A = U diag(σ) V^H` with `σ` sorted in decreasing order.
///
/// Columns of `U` belonging to zero singular values are zero.
#[derive(Debug, Clone)]
pub struct ThinSvd<T: ComplexField<RealField = f64>> {
    pub u: DMatrix<T>,
    pub singular_values: DVector<f64>,
    pub v: DMatrix<T>,
}

/// Thin SVD of an `m x n` matrix with `m >= n`.
pub fn thin_svd<T: ComplexField<RealField = f64> + Copy>(a: &DMatrix<T>) -> ThinSvd<T> {
    let (m, n) = a.shape();
    assert!(m >= n, "thin_svd expects at least as many rows as columns");
    let mut w = a.clone();
    let mut v = DMatrix::<T>::identity(n, n);
    let eps = f64::EPSILON;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let mut alpha = 0.0;
                let mut beta = 0.0;
                let mut gamma = T::zero();
                for i in 0..m {
                    let x = w[(i, p)];
                    let y = w[(i, q)];
                    alpha += x.modulus_squared();
                    beta += y.modulus_squared();
                    gamma += x.conjugate() * y;
                }
                let g = gamma.modulus();
                if g == 0.0 || g <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                // phase that makes the inner product real and positive
                let phase = gamma.unscale(g);
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..m {
                    let x = w[(i, p)];
                    let y = w[(i, q)] * phase.conjugate();
                    w[(i, p)] = x.scale(c) - y.scale(s);
                    w[(i, q)] = (x.scale(s) + y.scale(c)) * phase;
                }
                for i in 0..n {
                    let x = v[(i, p)];
                    let y = v[(i, q)] * phase.conjugate();
                    v[(i, p)] = x.scale(c) - y.scale(s);
                    v[(i, q)] = (x.scale(s) + y.scale(c)) * phase;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let norms: Vec<f64> = (0..n).map(|j| w.column(j).norm()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));
    let mut u = DMatrix::<T>::zeros(m, n);
    let mut vs = DMatrix::<T>::zeros(n, n);
    let mut sv = DVector::zeros(n);
    for (k, &j) in order.iter().enumerate() {
        sv[k] = norms[j];
        if norms[j] > 0.0 {
            for i in 0..m {
                u[(i, k)] = w[(i, j)].unscale(norms[j]);
            }
        }
        vs.set_column(k, &v.column(j));
    }
    ThinSvd {
        u,
        singular_values: sv,
        v: vs,
    }
}

/// Singular values of any matrix, decreasing.
pub fn singular_values<T: ComplexField<RealField = f64> + Copy>(a: &DMatrix<T>) -> DVector<f64> {
    if a.nrows() >= a.ncols() {
        thin_svd(a).singular_values
    } else {
        thin_svd(&a.adjoint()).singular_values
    }
}
