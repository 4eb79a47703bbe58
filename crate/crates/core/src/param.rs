//! Explicit local coordinates `(ṡ, ȧ)` of rank-`r` series.
//!
//! For `a = H_τ(ȧ)`, the boundary values `ṡ = s_{I(τ)}` determine the series:
//! the remaining entries solve `Q^T(a)_{:,J} s_J = -Q^T(a)_{:,I} s_I`, where
//! `J = {τ..N-r-1+τ}`. The square block `Q^T(a)_{:,J}` has `-1` on its
//! diagonal, so it is invertible for small `N`, which is all this is used for.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::series::{h_tau, i_set};

/// `S_τ(ṡ, ȧ)` for series of length `n`.
pub fn series_from_coordinates(sdot: &[f64], adot: &[f64], tau: usize, n: usize) -> Result<Vec<f64>> {
    let r = adot.len();
    if sdot.len() != r {
        return Err(Error::DimensionMismatch {
            expected: r,
            found: sdot.len(),
        });
    }
    let a = h_tau(adot, tau)?;
    if 2 * r >= n {
        return Err(Error::OrderTooLarge { order: r, len: n });
    }
    let c = a.coeffs();
    let boundary = i_set(tau, r, n);
    let rows = n - r;
    let first = tau - 1;
    // Q^T has c at columns i..i+r of row i; interior column t is index first+t
    let block = DMatrix::from_fn(rows, rows, |i, t| {
        let col = first + t;
        if col >= i && col - i <= r {
            c[col - i]
        } else {
            0.0
        }
    });
    let rhs = DVector::from_fn(rows, |i, _| {
        -boundary
            .iter()
            .zip(sdot)
            .filter(|(&col, _)| col >= i && col - i <= r)
            .map(|(&col, &v)| c[col - i] * v)
            .sum::<f64>()
    });
    let interior = block
        .lu()
        .solve(&rhs)
        .ok_or(Error::RankDeficient { ratio: 0.0 })?;
    let mut s = vec![0.0; n];
    for (&i, &v) in boundary.iter().zip(sdot) {
        s[i] = v;
    }
    for t in 0..rows {
        s[first + t] = interior[t];
    }
    Ok(s)
}

/// Boundary values `s_{I(τ)}`.
pub fn boundary_values(s: &[f64], tau: usize, r: usize) -> Vec<f64> {
    i_set(tau, r, s.len()).into_iter().map(|i| s[i]).collect()
}

/// Central-difference Jacobian of `(ṡ, ȧ) -> S_τ(ṡ, ȧ)`; the first `r`
/// columns are the `ṡ` directions.
pub fn coordinate_jacobian(sdot: &[f64], adot: &[f64], tau: usize, n: usize, h: f64) -> Result<DMatrix<f64>> {
    let r = adot.len();
    let mut jac = DMatrix::zeros(n, 2 * r);
    for k in 0..2 * r {
        let (mut sp, mut ap) = (sdot.to_vec(), adot.to_vec());
        let (mut sm, mut am) = (sdot.to_vec(), adot.to_vec());
        if k < r {
            sp[k] += h;
            sm[k] -= h;
        } else {
            ap[k - r] += h;
            am[k - r] -= h;
        }
        let plus = series_from_coordinates(&sp, &ap, tau, n)?;
        let minus = series_from_coordinates(&sm, &am, tau, n)?;
        for i in 0..n {
            jac[(i, k)] = (plus[i] - minus[i]) / (2.0 * h);
        }
    }
    Ok(jac)
}
