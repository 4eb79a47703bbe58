//! Time series values, Hankel embedding and GLRR algebra.
//!
//! Indices in this module's documentation are 1-based; slices are 0-based.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Real-valued series with an observation mask (`true` = observed).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    values: Vec<f64>,
    mask: Vec<bool>,
}

impl TimeSeries {
    /// Fully observed series.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        let mask = vec![true; values.len()];
        Self::with_mask(values, mask)
    }

    pub fn with_mask(values: Vec<f64>, mask: Vec<bool>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::SeriesTooShort { needed: 1, len: 0 });
        }
        if mask.len() != values.len() {
            return Err(Error::DimensionMismatch {
                expected: values.len(),
                found: mask.len(),
            });
        }
        Ok(Self { values, mask })
    }

    /// Builds a series from raw values, treating NaN entries as missing.
    /// Missing entries are stored as zero.
    pub fn from_nan_values(raw: &[f64]) -> Result<Self> {
        let mask: Vec<bool> = raw.iter().map(|v| !v.is_nan()).collect();
        let values = raw
            .iter()
            .map(|&v| if v.is_nan() { 0.0 } else { v })
            .collect();
        Self::with_mask(values, mask)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn is_fully_observed(&self) -> bool {
        self.mask.iter().all(|&m| m)
    }

    pub fn observed_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// Values with NaN at unobserved positions.
    pub fn to_nan_values(&self) -> Vec<f64> {
        self.values
            .iter()
            .zip(&self.mask)
            .map(|(&v, &m)| if m { v } else { f64::NAN })
            .collect()
    }

    /// Values with the mean of the observed entries imputed at gaps.
    pub fn mean_imputed(&self) -> Result<Vec<f64>> {
        let n_obs = self.observed_count();
        if n_obs == 0 {
            return Err(Error::NoObservations);
        }
        let mean = self
            .values
            .iter()
            .zip(&self.mask)
            .filter(|(_, &m)| m)
            .map(|(v, _)| v)
            .sum::<f64>()
            / n_obs as f64;
        Ok(self
            .values
            .iter()
            .zip(&self.mask)
            .map(|(&v, &m)| if m { v } else { mean })
            .collect())
    }
}

/// Coefficients `a = (a_1, ..., a_{r+1})` of a generalized linear recurrence
/// relation `sum_j a_j s_{i+j-1} = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlrrVector {
    coeffs: Vec<f64>,
}

impl GlrrVector {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() < 2 || coeffs.iter().all(|&c| c == 0.0) || coeffs.iter().any(|c| !c.is_finite())
        {
            return Err(Error::InvalidGlrr);
        }
        Ok(Self { coeffs })
    }

    /// Order `r` of the relation.
    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.coeffs.iter().map(|v| v * c).collect())
    }
}

/// Local coordinates of a GLRR: pivot `tau` (1-based) with `a_tau = -1` and
/// the remaining `r` free coefficients `adot`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedGlrr {
    pub tau: usize,
    pub adot: Vec<f64>,
}

impl NormalizedGlrr {
    pub fn to_glrr(&self) -> Result<GlrrVector> {
        h_tau(&self.adot, self.tau)
    }
}

/// Trajectory (Hankel) matrix with `window` rows: entry `(i, j)` is
/// `values[i + j - 1]`.
pub fn embed(series: &TimeSeries, window: usize) -> Result<DMatrix<f64>> {
    embed_values(series.values(), window)
}

pub fn embed_values(values: &[f64], window: usize) -> Result<DMatrix<f64>> {
    let n = values.len();
    if window == 0 || window > n {
        return Err(Error::WindowOutOfRange { window, len: n });
    }
    let k = n - window + 1;
    Ok(DMatrix::from_fn(window, k, |i, j| values[i + j]))
}

/// `Q^T(a) S`: component `i` is `sum_j a_j s_{i+j-1}`.
pub fn glrr_residual(series: &TimeSeries, a: &GlrrVector) -> Result<Vec<f64>> {
    apply_qt(a.coeffs(), series.values())
}

/// `Q^T(b) s` for any coefficient slice `b` (length `d+1`) and series `s`.
pub fn apply_qt(b: &[f64], s: &[f64]) -> Result<Vec<f64>> {
    let d = b.len().saturating_sub(1);
    if b.is_empty() || d >= s.len() {
        return Err(Error::OrderTooLarge {
            order: d,
            len: s.len(),
        });
    }
    Ok(s.windows(b.len())
        .map(|w| w.iter().zip(b).map(|(x, c)| x * c).sum())
        .collect())
}

/// `Q(b) u`: places `u_k * b` at rows `k..k+d`. Output length is `u.len() + d`.
pub fn apply_q(b: &[f64], u: &[f64]) -> Vec<f64> {
    let d = b.len() - 1;
    let mut out = vec![0.0; u.len() + d];
    for (k, &uk) in u.iter().enumerate() {
        if uk == 0.0 {
            continue;
        }
        for (j, &bj) in b.iter().enumerate() {
            out[k + j] += uk * bj;
        }
    }
    out
}

/// The banded `M x (M-d)` matrix whose column `j` holds `b` at rows `j..j+d`.
pub fn build_q_matrix(b: &[f64], m: usize) -> Result<DMatrix<f64>> {
    let d = b.len().saturating_sub(1);
    if b.is_empty() || m <= d {
        return Err(Error::OrderTooLarge { order: d, len: m });
    }
    let mut q = DMatrix::zeros(m, m - d);
    for j in 0..m - d {
        for (k, &bk) in b.iter().enumerate() {
            q[(j + k, j)] = bk;
        }
    }
    Ok(q)
}

/// Coefficients of `g_a(z)^2`, i.e. the acyclic convolution of `a` with itself.
pub fn acyclic_self_convolution(a: &GlrrVector) -> GlrrVector {
    let c = a.coeffs();
    let mut out = vec![0.0; 2 * c.len() - 1];
    for (i, &x) in c.iter().enumerate() {
        for (j, &y) in c.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    // the square of a nonzero polynomial is nonzero
    GlrrVector { coeffs: out }
}

/// Picks `tau = argmax |a_i|` (smallest index on ties) and rescales so that
/// `a_tau = -1`; returns the remaining coefficients.
pub fn normalize_glrr(a: &GlrrVector) -> NormalizedGlrr {
    let c = a.coeffs();
    let mut tau = 0;
    for (i, v) in c.iter().enumerate() {
        if v.abs() > c[tau].abs() {
            tau = i;
        }
    }
    let scale = -1.0 / c[tau];
    let adot = c
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != tau)
        .map(|(_, v)| v * scale)
        .collect();
    NormalizedGlrr { tau: tau + 1, adot }
}

/// Inserts `-1` at (1-based) position `tau`.
pub fn h_tau(adot: &[f64], tau: usize) -> Result<GlrrVector> {
    if adot.is_empty() {
        return Err(Error::InvalidGlrr);
    }
    if tau == 0 || tau > adot.len() + 1 {
        return Err(Error::IndexOutOfRange {
            index: tau,
            max: adot.len() + 1,
        });
    }
    let mut coeffs = Vec::with_capacity(adot.len() + 1);
    coeffs.extend_from_slice(&adot[..tau - 1]);
    coeffs.push(-1.0);
    coeffs.extend_from_slice(&adot[tau - 1..]);
    Ok(GlrrVector { coeffs })
}

/// 0-based positions of `K(tau) = {1..r+1} \ {tau}`.
pub fn k_set(tau: usize, r: usize) -> Vec<usize> {
    (0..=r).filter(|&i| i + 1 != tau).collect()
}

/// 0-based positions of the boundary set `I(tau) = {1..N} \ {tau..N-r-1+tau}`.
pub fn i_set(tau: usize, r: usize, n: usize) -> Vec<usize> {
    (0..n)
        .filter(|&i| {
            let one = i + 1;
            one < tau || one > n - r - 1 + tau
        })
        .collect()
}

/// One term `P(n) exp(alpha n) sin(2 pi omega n + phi)` of the signal model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelComponent {
    /// Polynomial coefficients in increasing degree.
    pub poly: Vec<f64>,
    pub alpha: f64,
    pub omega: f64,
    pub phi: f64,
}

impl ModelComponent {
    fn degree(&self) -> Option<usize> {
        self.poly.iter().rposition(|&c| c != 0.0)
    }

    fn is_edge_frequency(&self) -> bool {
        self.omega == 0.0 || self.omega == 0.5
    }
}

fn validate_components(components: &[ModelComponent]) -> Result<()> {
    if components.is_empty() {
        return Err(Error::InvalidComponent("no components".into()));
    }
    for (i, c) in components.iter().enumerate() {
        if !(0.0..=0.5).contains(&c.omega) {
            return Err(Error::InvalidComponent(format!(
                "component {}: omega {} outside [0, 0.5]",
                i + 1,
                c.omega
            )));
        }
        if c.degree().is_none() {
            return Err(Error::InvalidComponent(format!(
                "component {}: zero polynomial",
                i + 1
            )));
        }
        if !c.alpha.is_finite() || !c.phi.is_finite() || c.poly.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidComponent(format!(
                "component {}: non-finite parameter",
                i + 1
            )));
        }
        for other in &components[..i] {
            if other.alpha == c.alpha && other.omega == c.omega {
                return Err(Error::InvalidComponent(format!(
                    "duplicate (alpha, omega) = ({}, {})",
                    c.alpha, c.omega
                )));
            }
        }
    }
    Ok(())
}

/// Evaluates the signal model at `n = 1..=len`.
pub fn generate_model_signal(components: &[ModelComponent], len: usize) -> Result<TimeSeries> {
    validate_components(components)?;
    let values = (1..=len)
        .map(|n| {
            let t = n as f64;
            components
                .iter()
                .map(|c| {
                    let p = c.poly.iter().rev().fold(0.0, |acc, &k| acc * t + k);
                    p * (c.alpha * t).exp()
                        * (2.0 * std::f64::consts::PI * c.omega * t + c.phi).sin()
                })
                .sum()
        })
        .collect();
    TimeSeries::new(values)
}

/// Rank `sum (m_k + 1) r_k` of a model signal, `r_k = 2` for `0 < omega < 0.5`
/// and `1` otherwise.
pub fn model_rank(components: &[ModelComponent]) -> Result<usize> {
    validate_components(components)?;
    let mut rank = 0;
    for (i, c) in components.iter().enumerate() {
        if c.is_edge_frequency() && c.phi.sin().abs() < 1e-12 {
            return Err(Error::InvalidComponent(format!(
                "component {}: omega in {{0, 0.5}} requires sin(phi) != 0",
                i + 1
            )));
        }
        let m = c.degree().unwrap_or(0);
        let r = if c.is_edge_frequency() { 1 } else { 2 };
        rank += (m + 1) * r;
    }
    Ok(rank)
}
