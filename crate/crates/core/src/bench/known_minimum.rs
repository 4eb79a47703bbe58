//! A test problem whose weighted least-squares solution is known.
//!
//! `Y*` is a sampled parabola, so it satisfies the GLRR `a* = (1, -3, 3, -1)`.
//! The noise is made orthogonal to the tangent space `Z(a*²)` (polynomials of
//! degree at most 5), which makes `Y*` a stationary point of the objective.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::series::{GlrrVector, TimeSeries};
use crate::weights::norm;

pub const A_STAR: [f64; 4] = [1.0, -3.0, 3.0, -1.0];
/// Number of tangent directions, `2r` for `r = 3`.
const TANGENT_DIM: usize = 6;

#[derive(Debug, Clone)]
pub struct KnownMinimumProblem {
    pub x: TimeSeries,
    pub y_star: TimeSeries,
    pub a_star: GlrrVector,
    /// Orthonormal basis of `Z(a*²)` on the grid.
    pub tangent: DMatrix<f64>,
}

impl KnownMinimumProblem {
    /// Perturbed start `a* + eps (1, 1, 1, 1)`.
    pub fn start(&self, eps: f64) -> GlrrVector {
        GlrrVector::new(A_STAR.iter().map(|v| v + eps).collect()).expect("nonzero")
    }
}

/// Equidistant grid on `[-1, 1]`.
pub fn grid(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| -1.0 + 2.0 * i as f64 / (n - 1) as f64)
        .collect()
}

/// Values of the Legendre polynomials `P_0..P_{deg}` at `x`, one column each.
pub fn legendre_values(x: &[f64], deg: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(x.len(), deg + 1);
    for (i, &t) in x.iter().enumerate() {
        let (mut p0, mut p1) = (1.0, t);
        m[(i, 0)] = p0;
        if deg >= 1 {
            m[(i, 1)] = p1;
        }
        for k in 1..deg {
            let kf = k as f64;
            let p2 = ((2.0 * kf + 1.0) * t * p1 - kf * p0) / (kf + 1.0);
            m[(i, k + 1)] = p2;
            p0 = p1;
            p1 = p2;
        }
    }
    m
}

fn unit(v: Vec<f64>) -> Vec<f64> {
    let s = norm(&v);
    v.into_iter().map(|x| x / s).collect()
}

pub fn build_known_minimum(n: usize) -> Result<KnownMinimumProblem> {
    if n < 13 {
        return Err(Error::SeriesTooShort { needed: 13, len: n });
    }
    let x = grid(n);
    let y = unit(x.iter().map(|t| t * t).collect());
    let noise = unit(x.iter().map(|t| t.abs()).collect());
    let tangent = legendre_values(&x, TANGENT_DIM - 1).qr().q();
    let nv = DVector::from_vec(noise.clone());
    let coef = tangent.transpose() * &nv;
    let proj = &tangent * coef;
    let xv: Vec<f64> = (0..n).map(|i| y[i] + noise[i] - proj[i]).collect();
    Ok(KnownMinimumProblem {
        x: TimeSeries::new(xv)?,
        y_star: TimeSeries::new(y)?,
        a_star: GlrrVector::new(A_STAR.to_vec())?,
        tangent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nullspace::max_principal_angle;
    use crate::series::apply_qt;

    #[test]
    fn legendre_low_degrees() {
        let m = legendre_values(&[0.5], 3);
        assert_eq!(m[(0, 0)], 1.0);
        assert_eq!(m[(0, 1)], 0.5);
        assert!((m[(0, 2)] - (1.5 * 0.25 - 0.5)).abs() < 1e-15);
        assert!((m[(0, 3)] - (2.5 * 0.125 - 1.5 * 0.5)).abs() < 1e-15);
    }

    #[test]
    fn residual_orthogonal_to_tangent_space() {
        for n in [13, 20, 100, 1000] {
            let p = build_known_minimum(n).unwrap();
            let d: Vec<f64> = p.x.values().iter().zip(p.y_star.values()).map(|(a, b)| a - b).collect();
            for j in 0..TANGENT_DIM {
                let dot: f64 = p.tangent.column(j).iter().zip(&d).map(|(a, b)| a * b).sum();
                assert!(dot.abs() < 1e-10, "n = {n}, column {j}: {dot:e}");
            }
            assert!((norm(p.y_star.values()) - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn target_satisfies_the_glrr() {
        let p = build_known_minimum(500).unwrap();
        let res = apply_qt(&A_STAR, p.y_star.values()).unwrap();
        assert!(norm(&res) <= 1e-10);
    }

    #[test]
    fn tangent_basis_spans_low_degree_polynomials() {
        let n = 200;
        let x = grid(n);
        let mono = DMatrix::from_fn(n, TANGENT_DIM, |i, k| x[i].powi(k as i32));
        // Gram-Schmidt on the monomials
        let mut q = mono.clone();
        for k in 0..TANGENT_DIM {
            for _ in 0..2 {
                for j in 0..k {
                    let d = q.column(j).dot(&q.column(k));
                    let cj = q.column(j).into_owned();
                    q.column_mut(k).axpy(-d, &cj, 1.0);
                }
            }
            let s = q.column(k).norm();
            q.column_mut(k).scale_mut(1.0 / s);
        }
        let p = build_known_minimum(n).unwrap();
        assert!(max_principal_angle(&q, &p.tangent) <= 1e-8);
    }

    #[test]
    fn too_short() {
        assert!(build_known_minimum(12).is_err());
    }
}
