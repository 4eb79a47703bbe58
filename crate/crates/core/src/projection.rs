//! Weighted projections onto `Z(a)`.
//!
//! Two routes are available. The basis route builds an orthonormal basis of
//! `Z(a)` and solves a weighted least-squares problem in it; it accepts every
//! weight variant. The Γ route uses `Π x = x - W^{-1} Q Γ^{-1} Q^T x` with the
//! banded Gram matrix `Γ = Q^T W^{-1} Q` and needs a banded `W^{-1}`.

use nalgebra::{DMatrix, DVector};

use crate::banded::UpperBand;
use crate::error::{Error, Result};
use crate::lstsq::LstsqSolver;
use crate::nullspace::{basis_from_spectrum, EvalMode, RotatedSpectrum, SubspaceBasis};
use crate::series::{apply_q, apply_qt, k_set, GlrrVector};
use crate::weights::{WeightKind, WeightSpec};

#[derive(Debug, Clone)]
pub struct ProjectionResult {
    pub projected: Vec<f64>,
    /// Coefficients of `projected` in the supplied basis.
    pub coefficients: DVector<f64>,
}

/// Weighted least squares in a fixed basis: `q = argmin ‖x - Z q‖_W`.
#[derive(Debug, Clone)]
pub struct WeightedProjector {
    z: DMatrix<f64>,
    solver: LstsqSolver,
    w: WeightSpec,
}

impl WeightedProjector {
    pub fn new(z: &DMatrix<f64>, w: &WeightSpec) -> Result<Self> {
        let zw = w.whiten_matrix(z)?;
        Ok(Self {
            z: z.clone(),
            solver: LstsqSolver::new(&zw)?,
            w: w.clone(),
        })
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.z
    }

    pub fn apply(&self, x: &[f64]) -> Result<ProjectionResult> {
        let xw = DVector::from_vec(self.w.apply_c(x)?);
        let q = self.solver.solve(&xw)?;
        let p = &self.z * &q;
        Ok(ProjectionResult {
            projected: p.as_slice().to_vec(),
            coefficients: q,
        })
    }
}

/// `Z Z^{†W} x` together with the coefficients `Z^{†W} x`.
pub fn weighted_pinv_apply(z: &DMatrix<f64>, w: &WeightSpec, x: &[f64]) -> Result<ProjectionResult> {
    WeightedProjector::new(z, w)?.apply(x)
}

/// `Π_{Z(a),W} x` through an orthonormal basis of `Z(a)`.
pub fn project_onto_glrr_space(
    a: &GlrrVector,
    w: &WeightSpec,
    x: &[f64],
    mode: EvalMode,
) -> Result<ProjectionResult> {
    let spec = RotatedSpectrum::new(a, x.len(), mode)?;
    let basis = basis_from_spectrum(&spec)?;
    weighted_pinv_apply(&basis.z, w, x)
}

/// Basis route with a caller-supplied basis.
pub fn project_with_basis(
    basis: &SubspaceBasis,
    w: &WeightSpec,
    x: &[f64],
) -> Result<ProjectionResult> {
    weighted_pinv_apply(&basis.z, w, x)
}

/// Banded Cholesky factor of `Γ(a) = Q^T(a) W^{-1} Q(a)`.
#[derive(Debug, Clone)]
pub struct GammaFactor {
    gc: UpperBand,
    a: GlrrVector,
    w: WeightSpec,
}

fn require_winv(w: &WeightSpec) -> Result<()> {
    match w.kind() {
        WeightKind::Identity | WeightKind::BandedWinv { .. } => Ok(()),
        _ => Err(Error::WeightVariant {
            required: "banded inverse W",
            found: w.variant_name(),
        }),
    }
}

impl GammaFactor {
    pub fn new(a: &GlrrVector, w: &WeightSpec) -> Result<Self> {
        require_winv(w)?;
        let n = w.dim();
        let c = a.coeffs();
        let r = a.order();
        if r >= n {
            return Err(Error::OrderTooLarge { order: r, len: n });
        }
        let p = w.bandwidth();
        let cols = n - r;
        // window j: rows [lo_j, lo_j + len) of Ĉ q_j where q_j = Q(a) e_j
        let width = r + p + 1;
        let mut windows = vec![0.0; cols * width];
        let mut starts = vec![0usize; cols];
        for j in 0..cols {
            let lo = j.saturating_sub(p);
            starts[j] = lo;
            let win = &mut windows[j * width..(j + 1) * width];
            for (t, slot) in win.iter_mut().enumerate() {
                let i = lo + t;
                if i > j + r {
                    break;
                }
                let mut acc = 0.0;
                match w.chat() {
                    Some(chat) => {
                        for d in 0..=p {
                            let m = i + d;
                            if m >= j && m <= j + r && m < n {
                                acc += chat.get(i, m) * c[m - j];
                            }
                        }
                    }
                    None => {
                        if i >= j {
                            acc = c[i - j];
                        }
                    }
                }
                *slot = acc;
            }
        }
        let bw = (r + p).min(cols.saturating_sub(1));
        let mut gamma = UpperBand::zeros(cols, bw);
        for j in 0..cols {
            let (sj, wj) = (starts[j], &windows[j * width..(j + 1) * width]);
            for k in j..(j + bw + 1).min(cols) {
                let (sk, wk) = (starts[k], &windows[k * width..(k + 1) * width]);
                let lo = sj.max(sk);
                let hi = (sj + width).min(sk + width);
                let mut acc = 0.0;
                for i in lo..hi {
                    acc += wj[i - sj] * wk[i - sk];
                }
                gamma.set(j, k, acc);
            }
        }
        Ok(Self {
            gc: gamma.cholesky()?,
            a: a.clone(),
            w: w.clone(),
        })
    }

    pub fn factor(&self) -> &UpperBand {
        &self.gc
    }

    /// `Γ^{-1} v`.
    pub fn solve(&self, v: &[f64]) -> Vec<f64> {
        self.gc.solve_upper(&self.gc.solve_upper_t(v))
    }

    /// `W^{-1} Q(a) Γ^{-1} Q^T(a) x`.
    fn complement(&self, x: &[f64]) -> Result<Vec<f64>> {
        let g = self.solve(&apply_qt(self.a.coeffs(), x)?);
        self.w.apply_winv(&apply_q(self.a.coeffs(), &g))
    }

    /// `Π_{Z(a),W} x`.
    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        let y = self.complement(x)?;
        Ok(x.iter().zip(y).map(|(a, b)| a - b).collect())
    }
}

/// `Π_{Z(a),W} x = (I - W^{-1} Q Γ^{-1} Q^T) x`.
pub fn project_gamma(a: &GlrrVector, w: &WeightSpec, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != w.dim() {
        return Err(Error::DimensionMismatch {
            expected: w.dim(),
            found: x.len(),
        });
    }
    GammaFactor::new(a, w)?.project(x)
}

/// Jacobian of `ȧ -> Π_{Z(H_τ(ȧ)),W} x`, one column per free coefficient.
pub fn vp_jacobian(a: &GlrrVector, tau: usize, w: &WeightSpec, x: &[f64]) -> Result<DMatrix<f64>> {
    let gf = GammaFactor::new(a, w)?;
    vp_jacobian_with(&gf, tau, x)
}

pub fn vp_jacobian_with(gf: &GammaFactor, tau: usize, x: &[f64]) -> Result<DMatrix<f64>> {
    let a = &gf.a;
    let r = a.order();
    let n = x.len();
    if tau == 0 || tau > r + 1 {
        return Err(Error::IndexOutOfRange {
            index: tau,
            max: r + 1,
        });
    }
    let g = gf.solve(&apply_qt(a.coeffs(), x)?);
    let winv_qg = gf.w.apply_winv(&apply_q(a.coeffs(), &g))?;
    let px: Vec<f64> = x.iter().zip(&winv_qg).map(|(a, b)| a - b).collect();
    let rows = n - r;
    let mut jac = DMatrix::zeros(n, r);
    for (i, j) in k_set(tau, r).into_iter().enumerate() {
        // Q^T(e_j) Πx is a shifted window of Πx
        let shifted: Vec<f64> = px[j..j + rows].to_vec();
        let t1 = gf.w.apply_winv(&apply_q(a.coeffs(), &gf.solve(&shifted)))?;
        // Q(e_j) g places g at rows j..j+rows
        let mut qe = vec![0.0; n];
        qe[j..j + rows].copy_from_slice(&g);
        let v = gf.w.apply_winv(&qe)?;
        let t2 = gf.project(&v)?;
        for k in 0..n {
            jac[(k, i)] = -t1[k] - t2[k];
        }
    }
    Ok(jac)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nullspace::nullspace_basis;
    use crate::series::{build_q_matrix, h_tau};
    use crate::weights::{ar_inverse_covariance, ar_inverse_covariance_band, mask_missing};
    use proptest::prelude::*;

    fn glrr(c: &[f64]) -> GlrrVector {
        GlrrVector::new(c.to_vec()).unwrap()
    }

    fn tridiag_winv(n: usize, phi: f64) -> WeightSpec {
        WeightSpec::banded_winv(&ar_inverse_covariance_band(&[phi], 1.0, n).unwrap()).unwrap()
    }

    fn vecnorm(x: &[f64]) -> f64 {
        x.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    #[test]
    fn mean_projection() {
        let n = 9;
        let z = DMatrix::from_element(n, 1, 1.0 / (n as f64).sqrt());
        let x: Vec<f64> = (0..n).map(|i| (i * i) as f64).collect();
        let mean = x.iter().sum::<f64>() / n as f64;
        let p = weighted_pinv_apply(&z, &WeightSpec::identity(n), &x).unwrap();
        assert!(p.projected.iter().all(|v| (v - mean).abs() < 1e-12));

        let a = glrr(&[1.0, -1.0]);
        let p = project_onto_glrr_space(&a, &WeightSpec::identity(n), &x, EvalMode::Compensated).unwrap();
        assert!(p.projected.iter().all(|v| (v - mean).abs() < 1e-10));
        let g = project_gamma(&a, &WeightSpec::identity(n), &x).unwrap();
        for (u, v) in g.iter().zip(&p.projected) {
            assert!((u - v).abs() < 1e-10);
        }
    }

    #[test]
    fn orthogonal_projection_is_idempotent_and_symmetric() {
        let n = 40;
        let a = glrr(&[0.5, -1.0, 0.8]);
        let w = WeightSpec::identity(n);
        let basis = nullspace_basis(&a, n, EvalMode::Compensated).unwrap();
        let mut p = DMatrix::zeros(n, n);
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            let col = project_with_basis(&basis, &w, &e).unwrap().projected;
            p.column_mut(j).copy_from_slice(&col);
        }
        assert!((&p * &p - &p).norm() < 1e-12);
        assert!((p.transpose() - &p).norm() < 1e-12);
        assert!((p.transpose() * &p - &p).norm() < 1e-12);
    }

    #[test]
    fn random_design_matches_normal_equations() {
        let n = 40;
        let z = DMatrix::from_fn(n, 3, |i, j| ((i * 13 + j * 7 + i * j * 5) % 11) as f64 - 5.0);
        let w = ar_inverse_covariance(&[0.6], 1.0, n).unwrap();
        let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.21).cos() + 0.1 * i as f64).collect();
        let p = weighted_pinv_apply(&z, &w, &x).unwrap();
        let wd = w.to_dense();
        let xv = DVector::from_vec(x);
        let oracle = (z.transpose() * &wd * &z).try_inverse().unwrap() * (z.transpose() * &wd * xv);
        assert!((&p.coefficients - &oracle).norm() <= 1e-9 * oracle.norm());
    }

    #[test]
    fn rank_deficient_design_is_reported() {
        let z = DMatrix::from_fn(10, 2, |i, _| i as f64);
        let r = weighted_pinv_apply(&z, &WeightSpec::identity(10), &[1.0; 10]);
        assert!(matches!(r, Err(Error::RankDeficient { .. })));
    }

    #[test]
    fn series_in_space_is_fixed() {
        let n = 30;
        let a = glrr(&[1.0, -2.0, 1.0]);
        let x: Vec<f64> = (0..n).map(|i| 2.0 - 0.3 * i as f64).collect();
        let w = ar_inverse_covariance(&[0.3], 1.0, n).unwrap();
        let p = project_onto_glrr_space(&a, &w, &x, EvalMode::Compensated).unwrap();
        for (u, v) in p.projected.iter().zip(&x) {
            assert!((u - v).abs() <= 1e-10 * vecnorm(&x));
        }
    }

    #[test]
    fn gamma_factor_reconstructs_gram() {
        let n = 25;
        let a = glrr(&[0.3, -1.0, 0.6, 0.2]);
        for w in [WeightSpec::identity(n), tridiag_winv(n, 0.5)] {
            let gf = GammaFactor::new(&a, &w).unwrap();
            let q = build_q_matrix(a.coeffs(), n).unwrap();
            let winv = w.to_dense().try_inverse().unwrap();
            let gamma = q.transpose() * winv * &q;
            let gd = gf.factor().to_dense();
            let rec = gd.transpose() * gd;
            assert!((rec - &gamma).norm() <= 1e-8 * gamma.norm());
        }
    }

    #[test]
    fn gamma_rejects_masked_and_banded_w() {
        let a = glrr(&[1.0, -1.0]);
        let m = mask_missing(WeightSpec::identity(5), &[true, false, true, true, true]).unwrap();
        assert!(matches!(project_gamma(&a, &m, &[1.0; 5]), Err(Error::WeightVariant { .. })));
        let b = ar_inverse_covariance(&[0.2], 1.0, 5).unwrap();
        assert!(matches!(project_gamma(&a, &b, &[1.0; 5]), Err(Error::WeightVariant { .. })));
        // the basis route accepts both
        assert!(project_onto_glrr_space(&a, &m, &[1.0; 5], EvalMode::Plain).is_ok());
        assert!(project_onto_glrr_space(&a, &b, &[1.0; 5], EvalMode::Plain).is_ok());
    }

    #[test]
    fn residual_term_vanishes_on_the_space() {
        // for x in Z(a) only the term driven by Q^T(e_j) x survives
        let n = 20;
        let a = glrr(&[1.0, -2.0, 1.0]);
        let w = tridiag_winv(n, 0.3);
        let x: Vec<f64> = (0..n).map(|i| 1.0 + 0.5 * i as f64).collect();
        let j = vp_jacobian(&a, 2, &w, &x).unwrap();
        let gf = GammaFactor::new(&a, &w).unwrap();
        for (i, pos) in [0usize, 2].into_iter().enumerate() {
            let shifted = &x[pos..pos + n - 2];
            let t1 = w.apply_winv(&apply_q(a.coeffs(), &gf.solve(shifted))).unwrap();
            for k in 0..n {
                assert!((j[(k, i)] + t1[k]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn masked_projection_ignores_unobserved_values() {
        let n = 24;
        let mut mask = vec![true; n];
        for m in mask.iter_mut().skip(8).take(4) {
            *m = false;
        }
        let w = mask_missing(ar_inverse_covariance(&[0.4], 1.0, n).unwrap(), &mask).unwrap();
        let a = glrr(&[0.9, -1.0, 0.4]);
        let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.4).sin()).collect();
        let mut y = x.clone();
        for v in y.iter_mut().skip(8).take(4) {
            *v += 100.0;
        }
        let px = project_onto_glrr_space(&a, &w, &x, EvalMode::Compensated).unwrap().projected;
        let py = project_onto_glrr_space(&a, &w, &y, EvalMode::Compensated).unwrap().projected;
        for i in 0..n {
            if mask[i] {
                assert!((px[i] - py[i]).abs() < 1e-9);
            }
        }
    }

    fn random_glrr(seed: &[f64]) -> GlrrVector {
        glrr(seed)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn gamma_matches_dense_formula(
            coeffs in proptest::collection::vec(-1.0f64..1.0, 2..5),
            x in proptest::collection::vec(-1.0f64..1.0, 12..100)
        ) {
            prop_assume!(coeffs.iter().any(|c| c.abs() > 0.1));
            let a = random_glrr(&coeffs);
            let n = x.len();
            prop_assume!(2 * a.order() < n);
            let q = build_q_matrix(a.coeffs(), n).unwrap();
            let qtq = q.transpose() * &q;
            let xv = DVector::from_vec(x.clone());
            let dense = &xv - &q * qtq.lu().solve(&(q.transpose() * &xv)).unwrap();
            let g = project_gamma(&a, &WeightSpec::identity(n), &x).unwrap();
            let err: f64 = g.iter().zip(dense.iter()).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt();
            prop_assert!(err <= 1e-9 * xv.norm().max(1.0));
        }

        #[test]
        fn basis_and_gamma_routes_agree(
            coeffs in proptest::collection::vec(-1.0f64..1.0, 2..5),
            phi in -0.7f64..0.7,
            x in proptest::collection::vec(-1.0f64..1.0, 12..120)
        ) {
            let a = random_glrr(&coeffs);
            let n = x.len();
            prop_assume!(2 * a.order() < n);
            // keep g_a away from the unit circle
            let spec = RotatedSpectrum::new(&a, 4096, EvalMode::Plain);
            prop_assume!(spec.map(|s| s.lambda_min() > 0.2 * a.norm()).unwrap_or(false));
            let w = tridiag_winv(n, phi);
            let b = project_onto_glrr_space(&a, &w, &x, EvalMode::Compensated).unwrap().projected;
            let g = project_gamma(&a, &w, &x).unwrap();
            let d: Vec<f64> = b.iter().zip(&g).map(|(u, v)| u - v).collect();
            prop_assert!(vecnorm(&d) <= 1e-8 * vecnorm(&x));
        }

        #[test]
        fn projection_is_idempotent_and_w_orthogonal(
            coeffs in proptest::collection::vec(-1.0f64..1.0, 2..5),
            phi in -0.7f64..0.7,
            x in proptest::collection::vec(-1.0f64..1.0, 20..80)
        ) {
            prop_assume!(coeffs.iter().any(|c| c.abs() > 0.1));
            let a = random_glrr(&coeffs);
            let n = x.len();
            let w = ar_inverse_covariance(&[phi], 1.0, n).unwrap();
            let basis = nullspace_basis(&a, n, EvalMode::Compensated).unwrap();
            let p1 = project_with_basis(&basis, &w, &x).unwrap().projected;
            let p2 = project_with_basis(&basis, &w, &p1).unwrap().projected;
            let d: Vec<f64> = p1.iter().zip(&p2).map(|(u, v)| u - v).collect();
            prop_assert!(vecnorm(&d) <= 1e-10 * vecnorm(&p1).max(1e-300));
            let res: Vec<f64> = x.iter().zip(&p1).map(|(u, v)| u - v).collect();
            let wres = w.apply_w(&res).unwrap();
            let xn = w.weighted_norm(&x).unwrap();
            for j in 0..basis.dim() {
                let z: Vec<f64> = basis.z.column(j).iter().copied().collect();
                let ip: f64 = wres.iter().zip(&z).map(|(u, v)| u * v).sum();
                let zn = w.weighted_norm(&z).unwrap();
                prop_assert!(ip.abs() <= 1e-9 * xn * zn);
            }
            let qt = apply_qt(a.coeffs(), &p1).unwrap();
            prop_assert!(vecnorm(&qt) <= 1e-8 * vecnorm(&p1) * a.norm());
        }

        #[test]
        fn jacobian_matches_finite_differences(
            coeffs in proptest::collection::vec(-1.0f64..1.0, 2..5),
            phi in -0.5f64..0.5,
            x in proptest::collection::vec(-1.0f64..1.0, 20..120)
        ) {
            let a0 = random_glrr(&coeffs);
            let n = x.len();
            let norm = crate::series::normalize_glrr(&a0);
            let a = h_tau(&norm.adot, norm.tau).unwrap();
            let spec = RotatedSpectrum::new(&a, 4096, EvalMode::Plain);
            prop_assume!(spec.map(|s| s.lambda_min() > 0.1).unwrap_or(false));
            // roots bounded away from zero and infinity
            let ends = [a.coeffs()[0], a.coeffs()[a.order()]];
            prop_assume!(ends.iter().all(|v| v.abs() > 0.2));
            let w = tridiag_winv(n, phi);
            let jac = vp_jacobian(&a, norm.tau, &w, &x).unwrap();
            let h = 1e-6;
            for i in 0..a.order() {
                let mut up = norm.adot.clone();
                let mut dn = norm.adot.clone();
                up[i] += h;
                dn[i] -= h;
                let pu = project_onto_glrr_space(&h_tau(&up, norm.tau).unwrap(), &w, &x, EvalMode::Compensated).unwrap().projected;
                let pd = project_onto_glrr_space(&h_tau(&dn, norm.tau).unwrap(), &w, &x, EvalMode::Compensated).unwrap().projected;
                let fd: Vec<f64> = pu.iter().zip(&pd).map(|(u, v)| (u - v) / (2.0 * h)).collect();
                let col: Vec<f64> = jac.column(i).iter().copied().collect();
                let d: Vec<f64> = fd.iter().zip(&col).map(|(u, v)| u - v).collect();
                prop_assert!(vecnorm(&d) <= 1e-4 * vecnorm(&col).max(1e-8), "col {} diff {}", i, vecnorm(&d));
            }
            // columns lie in the tangent space Z(a^2)
            let a2 = crate::series::acyclic_self_convolution(&a);
            for i in 0..a.order() {
                let col: Vec<f64> = jac.column(i).iter().copied().collect();
                if 2 * a2.order() < n {
                    let t = apply_qt(a2.coeffs(), &col).unwrap();
                    prop_assert!(vecnorm(&t) <= 1e-6 * vecnorm(&col).max(1e-300) * a2.norm());
                }
            }
        }
    }
}
