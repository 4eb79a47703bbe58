//! Weight matrices `W` and their factors.
//!
//! Every variant exposes a "whitening" factor `F` with `F^T F = W`:
//! `C` for a banded `W = C^T C`, `Ĉ^{-T}` for a banded `W^{-1} = Ĉ^T Ĉ`, and
//! `F_0 U` for a masked weight `W = U^T W_0 U`.

use nalgebra::DMatrix;

use crate::banded::UpperBand;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum WeightKind {
    Identity,
    /// `W = C^T C` with `C` upper banded.
    BandedW { c: UpperBand },
    /// `W^{-1} = Ĉ^T Ĉ` with `Ĉ` upper banded.
    BandedWinv { chat: UpperBand },
    /// `W = U^T W_0 U`, `U = diag(mask)`.
    Masked { inner: Box<WeightSpec>, mask: Vec<bool> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightSpec {
    kind: WeightKind,
    n: usize,
}

impl WeightSpec {
    pub fn identity(n: usize) -> Self {
        Self {
            kind: WeightKind::Identity,
            n,
        }
    }

    /// Factorizes a symmetric banded `W` given by its upper band.
    pub fn banded_w(w_upper: &UpperBand) -> Result<Self> {
        Ok(Self {
            n: w_upper.n(),
            kind: WeightKind::BandedW {
                c: w_upper.cholesky()?,
            },
        })
    }

    /// Factorizes a symmetric banded `W^{-1}` given by its upper band.
    pub fn banded_winv(winv_upper: &UpperBand) -> Result<Self> {
        Ok(Self {
            n: winv_upper.n(),
            kind: WeightKind::BandedWinv {
                chat: winv_upper.cholesky()?,
            },
        })
    }

    pub fn kind(&self) -> &WeightKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn variant_name(&self) -> &'static str {
        match self.kind {
            WeightKind::Identity => "identity",
            WeightKind::BandedW { .. } => "banded W",
            WeightKind::BandedWinv { .. } => "banded inverse W",
            WeightKind::Masked { .. } => "masked",
        }
    }

    /// Bandwidth `p` of the stored factor (0 for identity).
    pub fn bandwidth(&self) -> usize {
        match &self.kind {
            WeightKind::Identity => 0,
            WeightKind::BandedW { c } => c.bandwidth(),
            WeightKind::BandedWinv { chat } => chat.bandwidth(),
            WeightKind::Masked { inner, .. } => inner.bandwidth(),
        }
    }

    /// `true` unless some entries are masked out.
    pub fn is_positive_definite(&self) -> bool {
        match &self.kind {
            WeightKind::Masked { mask, inner } => {
                mask.iter().all(|&m| m) && inner.is_positive_definite()
            }
            _ => true,
        }
    }

    /// Observation mask implied by the weight (all true unless masked).
    pub fn mask(&self) -> Vec<bool> {
        match &self.kind {
            WeightKind::Masked { inner, mask } => {
                let im = inner.mask();
                mask.iter().zip(im).map(|(&a, b)| a && b).collect()
            }
            _ => vec![true; self.n],
        }
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: x.len(),
            });
        }
        Ok(())
    }

    /// Whitening factor applied to `x`: `‖F x‖² = x^T W x`.
    pub fn apply_c(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check(x)?;
        Ok(self.whiten(x))
    }

    pub(crate) fn whiten(&self, x: &[f64]) -> Vec<f64> {
        match &self.kind {
            WeightKind::Identity => x.to_vec(),
            WeightKind::BandedW { c } => c.mul(x),
            WeightKind::BandedWinv { chat } => chat.solve_upper_t(x),
            WeightKind::Masked { inner, mask } => inner.whiten(&apply_mask(mask, x)),
        }
    }

    fn whiten_t(&self, y: &[f64]) -> Vec<f64> {
        match &self.kind {
            WeightKind::Identity => y.to_vec(),
            WeightKind::BandedW { c } => c.mul_t(y),
            WeightKind::BandedWinv { chat } => chat.solve_upper(y),
            WeightKind::Masked { inner, mask } => apply_mask(mask, &inner.whiten_t(y)),
        }
    }

    /// `W x` in `O(N p)`.
    pub fn apply_w(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check(x)?;
        Ok(self.whiten_t(&self.whiten(x)))
    }

    /// `W^{-1} x`; defined for identity and banded-inverse weights.
    pub fn apply_winv(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check(x)?;
        match &self.kind {
            WeightKind::Identity => Ok(x.to_vec()),
            WeightKind::BandedWinv { chat } => Ok(chat.mul_t(&chat.mul(x))),
            _ => Err(Error::WeightVariant {
                required: "banded inverse W",
                found: self.variant_name(),
            }),
        }
    }

    /// `(Ĉ^{-1})^T x`; only for banded-inverse weights.
    pub fn solve_chat_t(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check(x)?;
        match &self.kind {
            WeightKind::BandedWinv { chat } => Ok(chat.solve_upper_t(x)),
            WeightKind::Identity => Ok(x.to_vec()),
            _ => Err(Error::WeightVariant {
                required: "banded inverse W",
                found: self.variant_name(),
            }),
        }
    }

    /// `Ĉ x` (identity weights use `Ĉ = I`).
    pub fn apply_chat(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check(x)?;
        match &self.kind {
            WeightKind::BandedWinv { chat } => Ok(chat.mul(x)),
            WeightKind::Identity => Ok(x.to_vec()),
            _ => Err(Error::WeightVariant {
                required: "banded inverse W",
                found: self.variant_name(),
            }),
        }
    }

    /// Upper factor `Ĉ` of `W^{-1}`, if the weight has a banded inverse.
    pub fn chat(&self) -> Option<&UpperBand> {
        match &self.kind {
            WeightKind::BandedWinv { chat } => Some(chat),
            _ => None,
        }
    }

    /// `sqrt(x^T W x)` computed as `‖F x‖`.
    pub fn weighted_norm(&self, x: &[f64]) -> Result<f64> {
        self.check(x)?;
        Ok(norm(&self.whiten(x)))
    }

    /// Applies the whitening factor to each column of `m`.
    pub fn whiten_matrix(&self, m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if m.nrows() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: m.nrows(),
            });
        }
        let mut out = DMatrix::zeros(m.nrows(), m.ncols());
        for j in 0..m.ncols() {
            let col: Vec<f64> = m.column(j).iter().copied().collect();
            let w = self.whiten(&col);
            out.column_mut(j).copy_from_slice(&w);
        }
        Ok(out)
    }

    /// Dense `W` (for tests and small problems).
    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.n;
        let mut f = DMatrix::zeros(n, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            let col = self.whiten(&e);
            f.column_mut(j).copy_from_slice(&col);
            e[j] = 0.0;
        }
        f.transpose() * f
    }
}

fn apply_mask(mask: &[bool], x: &[f64]) -> Vec<f64> {
    x.iter()
        .zip(mask)
        .map(|(&v, &m)| if m { v } else { 0.0 })
        .collect()
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `W = U^T W_0 U`: zero rows and columns at unobserved positions.
pub fn mask_missing(w0: WeightSpec, mask: &[bool]) -> Result<WeightSpec> {
    if mask.len() != w0.n {
        return Err(Error::DimensionMismatch {
            expected: w0.n,
            found: mask.len(),
        });
    }
    let n = w0.n;
    Ok(WeightSpec {
        kind: WeightKind::Masked {
            inner: Box::new(w0),
            mask: mask.to_vec(),
        },
        n,
    })
}

/// Reflection coefficients of an AR(p) model `x_t = sum phi_i x_{t-i} + e_t`,
/// together with the prediction coefficients of every order `0..=p`.
fn step_down(phi: &[f64]) -> Result<Vec<Vec<f64>>> {
    let p = phi.len();
    let mut orders = vec![Vec::new(); p + 1];
    orders[p] = phi.to_vec();
    for k in (1..=p).rev() {
        let cur = &orders[k];
        let kappa = cur[k - 1];
        if !kappa.is_finite() || kappa.abs() >= 1.0 {
            return Err(Error::UnstableAr(kappa));
        }
        let den = 1.0 - kappa * kappa;
        let prev: Vec<f64> = (0..k - 1)
            .map(|i| (cur[i] + kappa * cur[k - 2 - i]) / den)
            .collect();
        orders[k - 1] = prev;
    }
    Ok(orders)
}

/// Inverse autocovariance matrix of a stationary AR(p) process with
/// innovation variance `sigma2`, returned as a factored banded weight.
///
/// Built from the innovations representation `W = A^T D^{-1} A`, where row
/// `t` of the unit lower triangular `A` is the order-`min(t-1, p)`
/// prediction-error filter and `D` holds the matching prediction variances.
pub fn ar_inverse_covariance(phi: &[f64], sigma2: f64, n: usize) -> Result<WeightSpec> {
    let band = ar_inverse_covariance_band(phi, sigma2, n)?;
    WeightSpec::banded_w(&band)
}

/// The upper band of the AR(p) inverse covariance (bandwidth `p`).
pub fn ar_inverse_covariance_band(phi: &[f64], sigma2: f64, n: usize) -> Result<UpperBand> {
    let p = phi.len();
    if n <= p {
        return Err(Error::SeriesTooShort { needed: p + 1, len: n });
    }
    if !(sigma2 > 0.0) || !sigma2.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "innovation variance must be positive, got {sigma2}"
        )));
    }
    let orders = step_down(phi)?;
    let mut var = vec![0.0; p + 1];
    var[p] = sigma2;
    for k in (1..=p).rev() {
        let kappa = orders[k][k - 1];
        var[k - 1] = var[k] / (1.0 - kappa * kappa);
    }
    let mut w = UpperBand::zeros(n, p);
    let mut row = vec![0.0; p + 1];
    for t in 0..n {
        let m = t.min(p);
        // filter coefficients on x_{t-m}..x_t
        row[m] = 1.0;
        for i in 1..=m {
            row[m - i] = -orders[m][i - 1];
        }
        let inv = 1.0 / var[m];
        let start = t - m;
        for i in 0..=m {
            for j in i..=m {
                w.add(start + i, start + j, row[i] * row[j] * inv);
            }
        }
    }
    Ok(w)
}
