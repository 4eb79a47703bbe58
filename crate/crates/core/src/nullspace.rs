//! Orthonormal bases of `Z(a)` and particular solutions of `Q^T(a) F = M`
//! through rotated circulant systems diagonalized by the FFT.
//!
//! `C(a)` is the `N x N` circulant extension of `Q^T(a)`. Its eigenvalues are
//! `g_a(ω_k)` on the unit roots `ω_k = exp(2πik/N)`, with the unitary DFT
//! `y_k = N^{-1/2} sum x_n exp(-2πikn/N)`. Roots of `g_a` on the unit circle
//! make `C(a)` singular, so the grid is rotated by `α0`: the work is done for
//! `ã = T_{r+1}(-α0) a`, whose eigenvalues are `g_a(ω_k exp(-iα0))`, and the
//! result is mapped back with `T_N(-α0)`.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::horner::{comp_horner, comp_horner_real, horner_real};
use crate::series::{k_set, GlrrVector};
use crate::svd::{singular_values, thin_svd};

/// Largest admissible realness defect of an assembled basis.
pub const REALNESS_TOL: f64 = 1e-9;
/// Plain evaluation loses about `eps / λ_min` in the span, so its defect is
/// only reported unless it exceeds this cap.
pub const PLAIN_REALNESS_CAP: f64 = 1e-3;

const SCAN_POINTS: usize = 256;
const GOLDEN_ITERS: usize = 60;

/// How polynomial values on the grid are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum EvalMode {
    Plain,
    Compensated,
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(n)
        } else {
            p.plan_fft_forward(n)
        }
    })
}

/// Unitary forward DFT in place.
fn fft_unitary(buf: &mut [Complex64]) {
    let n = buf.len();
    plan(n, false).process(buf);
    let s = 1.0 / (n as f64).sqrt();
    buf.iter_mut().for_each(|v| *v *= s);
}

/// Unitary inverse DFT in place.
fn ifft_unitary(buf: &mut [Complex64]) {
    let n = buf.len();
    plan(n, true).process(buf);
    let s = 1.0 / (n as f64).sqrt();
    buf.iter_mut().for_each(|v| *v *= s);
}

/// `exp(2πi m / n)` with exact integer reduction of `m`.
fn unit_root(m: usize, n: usize) -> Complex64 {
    let m = m % n;
    let signed = if 2 * m <= n { m as f64 } else { m as f64 - n as f64 };
    let (s, c) = (2.0 * PI * signed / n as f64).sin_cos();
    Complex64::new(c, s)
}

/// Grid point `exp(i(2πk/N - α))`.
fn grid_point(k: usize, n: usize, alpha: f64) -> Complex64 {
    let k = k % n;
    let signed = if 2 * k <= n { k as f64 } else { k as f64 - n as f64 };
    let (s, c) = (2.0 * PI * signed / n as f64 - alpha).sin_cos();
    Complex64::new(c, s)
}

/// `exp(-iαn)` for `n = 0..len`.
fn rotation(alpha: f64, len: usize) -> Vec<Complex64> {
    (0..len)
        .map(|n| {
            let (s, c) = (-alpha * n as f64).sin_cos();
            Complex64::new(c, s)
        })
        .collect()
}

/// Values `g_a(exp(i(2πj/N - α)))`, `j = 0..N`.
pub fn eval_poly_grid(a: &GlrrVector, alpha: f64, n: usize, mode: EvalMode) -> Vec<Complex64> {
    let c = a.coeffs();
    (0..n)
        .map(|j| {
            let z = grid_point(j, n, alpha);
            match mode {
                EvalMode::Plain => horner_real(c, z),
                EvalMode::Compensated => comp_horner_real(c, z),
            }
        })
        .collect()
}

fn min_modulus(a: &[f64], base: &[Complex64], shift: Complex64) -> f64 {
    base.iter()
        .map(|&w| horner_real(a, w * shift).norm())
        .fold(f64::INFINITY, f64::min)
}

/// Rotation `α0 ∈ (-π/N, π/N]` approximately maximizing the smallest modulus
/// of `g_a` on the rotated grid: a 256-point scan followed by golden-section
/// refinement around the best candidate.
pub fn find_rotation(a: &GlrrVector, n: usize) -> Result<f64> {
    if n == 0 || a.order() >= n {
        return Err(Error::OrderTooLarge {
            order: a.order(),
            len: n,
        });
    }
    let c = a.coeffs();
    let base: Vec<Complex64> = (0..n).map(|k| grid_point(k, n, 0.0)).collect();
    let lo = -PI / n as f64;
    let step = 2.0 * PI / (SCAN_POINTS as f64 * n as f64);
    let objective = |alpha: f64| {
        let (s, co) = (-alpha).sin_cos();
        min_modulus(c, &base, Complex64::new(co, s))
    };
    let mut best = (0usize, f64::NEG_INFINITY);
    for k in 0..SCAN_POINTS {
        let v = objective(lo + (k + 1) as f64 * step);
        if v > best.1 {
            best = (k, v);
        }
    }
    let center = lo + (best.0 + 1) as f64 * step;
    let (mut x0, mut x3) = (center - step, center + step);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = x3 - g * (x3 - x0);
    let mut x2 = x0 + g * (x3 - x0);
    let (mut f1, mut f2) = (objective(x1), objective(x2));
    for _ in 0..GOLDEN_ITERS {
        if f1 >= f2 {
            x3 = x2;
            x2 = x1;
            f2 = f1;
            x1 = x3 - g * (x3 - x0);
            f1 = objective(x1);
        } else {
            x0 = x1;
            x1 = x2;
            f1 = f2;
            x2 = x0 + g * (x3 - x0);
            f2 = objective(x2);
        }
    }
    let (mut alpha, mut val) = if f1 >= f2 { (x1, f1) } else { (x2, f2) };
    if best.1 > val {
        alpha = center;
        val = best.1;
    }
    // a rotation by -π/N gives the same grid as +π/N
    if alpha <= lo {
        alpha += 2.0 * PI / n as f64;
    }
    if alpha > -lo {
        alpha -= 2.0 * PI / n as f64;
    }
    if !(val > 0.0) || !val.is_finite() {
        return Err(Error::DegenerateSpectrum);
    }
    Ok(alpha)
}

/// Eigenvalues of the rotated circulant `C(ã)`.
#[derive(Debug, Clone)]
pub struct RotatedSpectrum {
    pub alpha0: f64,
    pub eigenvalues: Vec<Complex64>,
    pub mode: EvalMode,
    a: GlrrVector,
    n: usize,
}

impl RotatedSpectrum {
    pub fn new(a: &GlrrVector, n: usize, mode: EvalMode) -> Result<Self> {
        let alpha = find_rotation(a, n)?;
        Self::with_alpha(a, n, alpha, mode)
    }

    /// Spectrum at a prescribed rotation.
    pub fn with_alpha(a: &GlrrVector, n: usize, alpha: f64, mode: EvalMode) -> Result<Self> {
        if a.order() >= n {
            return Err(Error::OrderTooLarge {
                order: a.order(),
                len: n,
            });
        }
        let eigenvalues = eval_poly_grid(a, alpha, n, mode);
        let min = eigenvalues.iter().map(|v| v.norm()).fold(f64::INFINITY, f64::min);
        if !(min > 0.0) || !min.is_finite() {
            return Err(Error::DegenerateSpectrum);
        }
        Ok(Self {
            alpha0: alpha,
            eigenvalues,
            mode,
            a: a.clone(),
            n,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn glrr(&self) -> &GlrrVector {
        &self.a
    }

    /// `min_k |λ_k|`.
    pub fn lambda_min(&self) -> f64 {
        self.eigenvalues
            .iter()
            .map(|v| v.norm())
            .fold(f64::INFINITY, f64::min)
    }

    /// Solves `C(ã) u = v` in place.
    fn circulant_solve(&self, buf: &mut [Complex64]) {
        fft_unitary(buf);
        for (b, l) in buf.iter_mut().zip(&self.eigenvalues) {
            *b /= l;
        }
        ifft_unitary(buf);
    }
}

/// Real orthonormal basis of `Z(a)`.
#[derive(Debug, Clone)]
pub struct SubspaceBasis {
    pub z: DMatrix<f64>,
    /// `σ_{r+1} / σ_1` of `[Re Z_c, Im Z_c]`; zero in exact arithmetic.
    pub realness_defect: f64,
    pub alpha0: f64,
}

impl SubspaceBasis {
    pub fn dim(&self) -> usize {
        self.z.ncols()
    }

    /// `‖Q^T(a) Z‖_F`.
    pub fn nullspace_residual(&self, a: &GlrrVector) -> f64 {
        let c = a.coeffs();
        let mut acc = 0.0;
        for j in 0..self.z.ncols() {
            let col = self.z.column(j);
            let n = col.len();
            for i in 0..n - c.len() + 1 {
                let v: f64 = c.iter().enumerate().map(|(k, ck)| ck * col[i + k]).sum();
                acc += v * v;
            }
        }
        acc.sqrt()
    }
}

/// Orthonormal basis of `Z(a)` for series of length `n`.
pub fn nullspace_basis(a: &GlrrVector, n: usize, mode: EvalMode) -> Result<SubspaceBasis> {
    let spec = RotatedSpectrum::new(a, n, mode)?;
    basis_from_spectrum(&spec)
}

/// Basis of `Z(a)` from a precomputed spectrum.
pub fn basis_from_spectrum(spec: &RotatedSpectrum) -> Result<SubspaceBasis> {
    let n = spec.n;
    let r = spec.a.order();
    if 2 * r >= n {
        return Err(Error::OrderTooLarge { order: r, len: n });
    }
    let inv_sqrt_n = 1.0 / (n as f64).sqrt();
    // L_r = A_g^{-1} R_r, R_r[k, c] = ω_k^{r-c} / sqrt(N)
    let l = DMatrix::from_fn(n, r, |k, c| {
        unit_root(k * (r - c), n) * inv_sqrt_n / spec.eigenvalues[k]
    });
    let u = match spec.mode {
        EvalMode::Plain => l.qr().q(),
        EvalMode::Compensated => {
            let svd = thin_svd(&l);
            let sv = &svd.singular_values;
            // O_r = V Σ^{-1}
            let o = DMatrix::from_fn(r, r, |j, c| svd.v[(j, c)] / sv[c]);
            let mut u = DMatrix::<Complex64>::zeros(n, r);
            let mut coeffs = vec![Complex64::new(0.0, 0.0); r + 1];
            for c in 0..r {
                for p in 1..=r {
                    coeffs[p] = o[(r - p, c)];
                }
                for k in 0..n {
                    let w = unit_root(k, n);
                    u[(k, c)] = comp_horner(&coeffs, w) * inv_sqrt_n / spec.eigenvalues[k];
                }
            }
            u
        }
    };
    let rot = rotation(spec.alpha0, n);
    let mut parts = DMatrix::<f64>::zeros(n, 2 * r);
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for c in 0..r {
        buf.copy_from_slice(u.column(c).as_slice());
        ifft_unitary(&mut buf);
        for k in 0..n {
            let v = buf[k] * rot[k];
            parts[(k, c)] = v.re;
            parts[(k, r + c)] = v.im;
        }
    }
    let (z, defect) = leading_left_singular(parts, r);
    let tol = match spec.mode {
        EvalMode::Plain => PLAIN_REALNESS_CAP,
        EvalMode::Compensated => REALNESS_TOL,
    };
    if !(defect <= tol) {
        return Err(Error::NotReal { defect, tol });
    }
    Ok(SubspaceBasis {
        z,
        realness_defect: defect,
        alpha0: spec.alpha0,
    })
}

/// Leading `r` left singular vectors of a tall matrix and `σ_{r+1} / σ_1`.
fn leading_left_singular(m: DMatrix<f64>, r: usize) -> (DMatrix<f64>, f64) {
    let svd = thin_svd(&m);
    let sv = &svd.singular_values;
    let defect = if sv.len() > r && sv[0] > 0.0 {
        sv[r] / sv[0]
    } else {
        0.0
    };
    (svd.u.columns(0, r).into_owned(), defect)
}

/// Real `N x r` matrix `F` with `Q^T(a) F = M`, where column `i` of `M` is
/// minus row `K(τ)_i` of the trajectory matrix `T_{r+1}(s)`.
pub fn fhat_matrix(a: &GlrrVector, s: &[f64], tau: usize, mode: EvalMode) -> Result<DMatrix<f64>> {
    let spec = RotatedSpectrum::new(a, s.len(), mode)?;
    fhat_with_spectrum(&spec, s, tau)
}

pub fn fhat_with_spectrum(spec: &RotatedSpectrum, s: &[f64], tau: usize) -> Result<DMatrix<f64>> {
    let n = spec.n;
    let r = spec.a.order();
    if s.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: s.len(),
        });
    }
    if tau == 0 || tau > r + 1 {
        return Err(Error::IndexOutOfRange {
            index: tau,
            max: r + 1,
        });
    }
    if 2 * r >= n {
        return Err(Error::OrderTooLarge { order: r, len: n });
    }
    let rows = n - r;
    let fwd = rotation(-spec.alpha0, rows);
    let back = rotation(spec.alpha0, n);
    let mut out = DMatrix::zeros(n, r);
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for (c, j) in k_set(tau, r).into_iter().enumerate() {
        for m in 0..rows {
            buf[m] = fwd[m] * (-s[j + m]);
        }
        buf[rows..].iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        spec.circulant_solve(&mut buf);
        for k in 0..n {
            out[(k, c)] = (buf[k] * back[k]).re;
        }
    }
    Ok(out)
}

/// `M = -(T_{r+1}(s) restricted to rows K(τ))^T`.
pub fn m_matrix(s: &[f64], tau: usize, r: usize) -> DMatrix<f64> {
    let rows = s.len() - r;
    let ks = k_set(tau, r);
    DMatrix::from_fn(rows, ks.len(), |m, c| -s[ks[c] + m])
}

/// Sanity helper: `‖Q^T(a) F - M‖_F`.
pub fn fhat_residual(a: &GlrrVector, f: &DMatrix<f64>, m: &DMatrix<f64>) -> f64 {
    let c = a.coeffs();
    let mut acc = 0.0;
    for j in 0..f.ncols() {
        for i in 0..m.nrows() {
            let v: f64 = c.iter().enumerate().map(|(k, ck)| ck * f[(i + k, j)]).sum();
            let d = v - m[(i, j)];
            acc += d * d;
        }
    }
    acc.sqrt()
}

/// Cosines of the principal angles between two column spaces, smallest
/// first. Both inputs must have orthonormal columns.
pub fn principal_cosines(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DVector<f64> {
    let m = a.transpose() * b;
    let mut sv = singular_values(&m);
    sv.as_mut_slice().sort_by(|x, y| x.total_cmp(y));
    sv
}

/// Largest principal angle (radians) between two column spaces.
pub fn max_principal_angle(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    // sin of the largest angle is ‖(I - A A^T) B‖_2, accurate for small angles
    let proj = b - a * (a.transpose() * b);
    let s = singular_values(&proj).max().min(1.0);
    s.asin()
}
