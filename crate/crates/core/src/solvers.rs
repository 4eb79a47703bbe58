//! Gauss-Newton solvers for the weighted Hankel low-rank problem.
//!
//! Every method iterates on the free GLRR coefficients `ȧ` of a normalized
//! `a = H_τ(ȧ)`. The estimate at `ȧ` is the weighted projection
//! `S*(ȧ) = Π_{Z(a),W} X`. MGN and S-MGN take the image-space step built from
//! `(I - Π) F̂`; VPGN and S-VPGN differentiate the projection itself.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nullspace::{basis_from_spectrum, fhat_with_spectrum, EvalMode, RotatedSpectrum};
use crate::projection::{vp_jacobian_with, weighted_pinv_apply, GammaFactor, WeightedProjector};
use crate::series::{apply_qt, embed_values, h_tau, normalize_glrr, GlrrVector, TimeSeries};
use crate::svd::thin_svd;
use crate::weights::{norm, WeightSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    Mgn,
    SMgn,
    Vpgn,
    SVpgn,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Mgn, Method::SMgn, Method::Vpgn, Method::SVpgn];

    pub fn name(self) -> &'static str {
        match self {
            Method::Mgn => "mgn",
            Method::SMgn => "s-mgn",
            Method::Vpgn => "vpgn",
            Method::SVpgn => "s-vpgn",
        }
    }

    /// Polynomial evaluation used for the projection `S*`.
    fn projection(self) -> Proj {
        match self {
            Method::Mgn => Proj::Basis(EvalMode::Plain),
            Method::SMgn | Method::SVpgn => Proj::Basis(EvalMode::Compensated),
            Method::Vpgn => Proj::Gamma,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mgn" => Ok(Method::Mgn),
            "s-mgn" | "smgn" => Ok(Method::SMgn),
            "vpgn" => Ok(Method::Vpgn),
            "s-vpgn" | "svpgn" => Ok(Method::SVpgn),
            other => Err(Error::Parse(format!("unknown method '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Proj {
    Basis(EvalMode),
    Gamma,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub method: Method,
    pub max_iter: usize,
    /// Trial steps are `2^{-m}` for `m = 0..=gamma_min_exponent`.
    pub gamma_min_exponent: u32,
    pub zeta: f64,
    pub retau_each_iter: bool,
}

impl SolverConfig {
    pub fn new(method: Method) -> Self {
        Self {
            method,
            max_iter: 200,
            gamma_min_exponent: 16,
            zeta: 5e-8,
            retau_each_iter: true,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.max_iter == 0 {
            return Err(Error::InvalidArgument("max_iter must be at least 1".into()));
        }
        if !(self.zeta > 0.0) {
            return Err(Error::InvalidArgument("zeta must be positive".into()));
        }
        Ok(())
    }
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self::new(Method::SMgn)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    StepZero,
    MaxIter,
    SmallStepStop,
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Termination::StepZero => "step_zero",
            Termination::MaxIter => "max_iter",
            Termination::SmallStepStop => "small_step_stop",
        })
    }
}

/// State at iterate `k` and the step size taken from it (0 for the last).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub tau: usize,
    pub adot: Vec<f64>,
    /// `‖X - S_k‖_W`.
    pub residual: f64,
    pub gamma: f64,
    /// `‖Q^T(a) S_k‖ / ‖a‖`.
    pub glrr_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverTrace {
    pub iterations: Vec<IterationRecord>,
    pub termination: Termination,
}

impl SolverTrace {
    /// Number of steps taken.
    pub fn steps(&self) -> usize {
        self.iterations.len().saturating_sub(1)
    }

    pub fn is_monotone(&self) -> bool {
        self.iterations.windows(2).all(|p| p[1].residual <= p[0].residual)
    }
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub signal: Vec<f64>,
    pub glrr: GlrrVector,
    pub trace: SolverTrace,
}

/// `‖Q^T(a) s‖ / ‖a‖`.
pub fn glrr_relative_residual(a: &GlrrVector, s: &[f64]) -> Result<f64> {
    Ok(norm(&apply_qt(a.coeffs(), s)?) / a.norm())
}

/// Last left singular vector of `T_{r+1}(x̃)`, with the observed mean put
/// into the gaps.
pub fn initial_glrr(x: &TimeSeries, r: usize) -> Result<GlrrVector> {
    let n = x.len();
    if r == 0 {
        return Err(Error::InvalidArgument("rank must be at least 1".into()));
    }
    if n < 2 * r + 2 {
        return Err(Error::SeriesTooShort {
            needed: 2 * r + 2,
            len: n,
        });
    }
    let filled = x.mean_imputed()?;
    let t = embed_values(&filled, r + 1)?.transpose();
    let svd = thin_svd(&t);
    GlrrVector::new(svd.v.column(r).iter().copied().collect())
}

/// Projection of `X` at a given GLRR together with whatever the step reuses.
struct Projected {
    a: GlrrVector,
    s: Vec<f64>,
    objective: f64,
    cache: Cache,
}

enum Cache {
    Basis {
        spec: RotatedSpectrum,
        projector: WeightedProjector,
    },
    Gamma(GammaFactor),
}

struct Problem<'a> {
    x: &'a [f64],
    w: &'a WeightSpec,
    method: Method,
}

impl Problem<'_> {
    fn project(&self, a: &GlrrVector) -> Result<Projected> {
        let (s, cache) = match self.method.projection() {
            Proj::Basis(mode) => {
                let (spec, projector) = self.basis_projector(a, mode)?;
                let s = projector.apply(self.x)?.projected;
                (s, Cache::Basis { spec, projector })
            }
            Proj::Gamma => {
                let gf = GammaFactor::new(a, self.w)?;
                (gf.project(self.x)?, Cache::Gamma(gf))
            }
        };
        let resid: Vec<f64> = self.x.iter().zip(&s).map(|(x, s)| x - s).collect();
        Ok(Projected {
            a: a.clone(),
            objective: self.w.weighted_norm(&resid)?,
            s,
            cache,
        })
    }

    /// Spectrum and projector; MGN gets one retry on a shifted grid.
    fn basis_projector(&self, a: &GlrrVector, mode: EvalMode) -> Result<(RotatedSpectrum, WeightedProjector)> {
        let n = self.x.len();
        let build = |spec: RotatedSpectrum| -> Result<(RotatedSpectrum, WeightedProjector)> {
            let basis = basis_from_spectrum(&spec)?;
            let p = WeightedProjector::new(&basis.z, self.w)?;
            Ok((spec, p))
        };
        match RotatedSpectrum::new(a, n, mode) {
            Ok(spec) => {
                let alpha = spec.alpha0;
                match build(spec) {
                    Ok(v) => Ok(v),
                    Err(e) if self.retries(&e) => build(RotatedSpectrum::with_alpha(a, n, shifted(alpha, n), mode)?),
                    Err(e) => Err(e),
                }
            }
            Err(e) if self.retries(&e) => build(RotatedSpectrum::with_alpha(a, n, shifted(0.0, n), mode)?),
            Err(e) => Err(e),
        }
    }

    fn retries(&self, e: &Error) -> bool {
        matches!(self.method, Method::Mgn | Method::SMgn)
            && matches!(e, Error::DegenerateSpectrum | Error::NotReal { .. })
    }

    /// Gauss-Newton direction at `(τ, ȧ)`; `cur` is the projection at `H_τ(ȧ)`
    /// up to a positive scale of the GLRR.
    fn direction(&self, cur: &Projected, a: &GlrrVector, tau: usize) -> Result<Vec<f64>> {
        let resid: Vec<f64> = self.x.iter().zip(&cur.s).map(|(x, s)| x - s).collect();
        let same = cur.a.coeffs() == a.coeffs();
        match self.method {
            Method::Mgn | Method::SMgn => {
                let fresh;
                let (spec, projector) = match (&cur.cache, same) {
                    (Cache::Basis { spec, projector }, true) => (spec, projector),
                    _ => {
                        let mode = match self.method.projection() {
                            Proj::Basis(m) => m,
                            Proj::Gamma => unreachable!(),
                        };
                        fresh = self.basis_projector(a, mode)?;
                        (&fresh.0, &fresh.1)
                    }
                };
                mgn_direction(spec, projector, &cur.s, &resid, tau, self.w)
            }
            Method::Vpgn | Method::SVpgn => {
                let fresh;
                let gf = match (&cur.cache, same) {
                    (Cache::Gamma(gf), true) => gf,
                    _ => {
                        fresh = GammaFactor::new(a, self.w)?;
                        &fresh
                    }
                };
                let jac = vp_jacobian_with(gf, tau, self.x)?;
                Ok(weighted_pinv_apply(&jac, self.w, &resid)?.coefficients.as_slice().to_vec())
            }
        }
    }
}

/// A quarter grid spacing away from `alpha`, kept in `(-π/N, π/N]`.
fn shifted(alpha: f64, n: usize) -> f64 {
    let h = 2.0 * PI / n as f64;
    let mut b = alpha + 0.25 * h;
    if b > 0.5 * h {
        b -= h;
    }
    b
}

/// `((I - Π) F̂)^{†W} (X - S)`.
fn mgn_direction(
    spec: &RotatedSpectrum,
    projector: &WeightedProjector,
    s: &[f64],
    resid: &[f64],
    tau: usize,
    w: &WeightSpec,
) -> Result<Vec<f64>> {
    let mut f = fhat_with_spectrum(spec, s, tau)?;
    for j in 0..f.ncols() {
        let col: Vec<f64> = f.column(j).iter().copied().collect();
        let p = projector.apply(&col)?.projected;
        for (i, v) in p.into_iter().enumerate() {
            f[(i, j)] -= v;
        }
    }
    Ok(weighted_pinv_apply(&f, w, resid)?.coefficients.as_slice().to_vec())
}

/// Direction of the image-space step at `H_τ(ȧ)`, together with `S_k`.
pub fn mgn_step(
    adot: &[f64],
    tau: usize,
    x: &[f64],
    w: &WeightSpec,
    mode: EvalMode,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let method = match mode {
        EvalMode::Plain => Method::Mgn,
        EvalMode::Compensated => Method::SMgn,
    };
    step(method, adot, tau, x, w)
}

/// Direction `J^{†W}(X - S_k)` of the variable-projection step, with `S_k`
/// from the Γ route or, for `compensated`, from the compensated basis.
pub fn vpgn_step(
    adot: &[f64],
    tau: usize,
    x: &[f64],
    w: &WeightSpec,
    compensated: bool,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let method = if compensated { Method::SVpgn } else { Method::Vpgn };
    step(method, adot, tau, x, w)
}

fn step(method: Method, adot: &[f64], tau: usize, x: &[f64], w: &WeightSpec) -> Result<(Vec<f64>, Vec<f64>)> {
    check_dims(x, w)?;
    let pb = Problem { x, w, method };
    let a = h_tau(adot, tau)?;
    let cur = pb.project(&a)?;
    let d = pb.direction(&cur, &a, tau)?;
    Ok((d, cur.s))
}

fn check_dims(x: &[f64], w: &WeightSpec) -> Result<()> {
    if x.len() != w.dim() {
        return Err(Error::DimensionMismatch {
            expected: w.dim(),
            found: x.len(),
        });
    }
    Ok(())
}

/// Outcome of one line search.
#[derive(Debug, Clone, PartialEq)]
pub struct LineSearch {
    pub gamma: f64,
    pub adot: Vec<f64>,
    pub small_step: bool,
}

/// Line search from `ȧ` along `delta`. `prev_step_norm` is `‖Δ̃_{k-1}‖`,
/// `None` at the first iteration.
pub fn line_search(
    adot: &[f64],
    delta: &[f64],
    tau: usize,
    x: &[f64],
    w: &WeightSpec,
    prev_step_norm: Option<f64>,
    config: &SolverConfig,
) -> Result<LineSearch> {
    check_dims(x, w)?;
    let pb = Problem {
        x,
        w,
        method: config.method,
    };
    let cur = pb.project(&h_tau(adot, tau)?)?;
    let (ls, _) = search(&pb, &cur, adot, delta, tau, prev_step_norm, config)?;
    Ok(ls)
}

fn search(
    pb: &Problem,
    cur: &Projected,
    adot: &[f64],
    delta: &[f64],
    tau: usize,
    prev_step_norm: Option<f64>,
    config: &SolverConfig,
) -> Result<(LineSearch, Option<Projected>)> {
    if delta.iter().any(|d| !d.is_finite()) {
        return Err(Error::InvalidArgument("non-finite search direction".into()));
    }
    let trial = |gamma: f64| -> (Vec<f64>, Option<Projected>) {
        let next: Vec<f64> = adot.iter().zip(delta).map(|(a, d)| a + gamma * d).collect();
        // a failed projection counts as a rejected trial
        let p = h_tau(&next, tau).and_then(|a| pb.project(&a)).ok();
        (next, p)
    };
    let stay = |small_step| LineSearch {
        gamma: 0.0,
        adot: adot.to_vec(),
        small_step,
    };
    let (full, full_proj) = trial(1.0);
    if let Some(p) = &full_proj {
        let diff: Vec<f64> = p.s.iter().zip(&cur.s).map(|(a, b)| a - b).collect();
        let base = norm(&cur.s);
        let rel = if base > 0.0 { norm(&diff) / base } else { norm(&diff) };
        if rel < config.zeta {
            let step_norm = norm(delta);
            let take = match prev_step_norm {
                None => true,
                Some(prev) => step_norm < prev,
            };
            // never accept an increase of the objective
            if take && p.objective <= cur.objective {
                let ls = LineSearch {
                    gamma: 1.0,
                    adot: full,
                    small_step: true,
                };
                return Ok((ls, full_proj));
            }
            return Ok((stay(true), None));
        }
    }
    let mut candidate = (full, full_proj);
    for m in 0..=config.gamma_min_exponent {
        let gamma = 0.5f64.powi(m as i32);
        if m > 0 {
            candidate = trial(gamma);
        }
        if let Some(p) = &candidate.1 {
            if p.objective <= cur.objective {
                let ls = LineSearch {
                    gamma,
                    adot: candidate.0,
                    small_step: false,
                };
                return Ok((ls, candidate.1));
            }
        }
    }
    Ok((stay(false), None))
}

/// Fits a rank-`r` signal to `x`.
pub fn fit(
    x: &TimeSeries,
    r: usize,
    w: &WeightSpec,
    config: &SolverConfig,
    a0: Option<&GlrrVector>,
) -> Result<FitResult> {
    config.validate()?;
    let n = x.len();
    check_dims(x.values(), w)?;
    if x.observed_count() == 0 {
        return Err(Error::NoObservations);
    }
    let a0 = match a0 {
        Some(a) => {
            if a.order() != r {
                return Err(Error::DimensionMismatch {
                    expected: r + 1,
                    found: a.order() + 1,
                });
            }
            a.clone()
        }
        None => initial_glrr(x, r)?,
    };
    if 2 * r >= n {
        return Err(Error::OrderTooLarge { order: r, len: n });
    }
    // unobserved entries carry no weight; zero them so they cannot leak
    let xv: Vec<f64> = x
        .values()
        .iter()
        .zip(x.mask())
        .map(|(&v, &m)| if m { v } else { 0.0 })
        .collect();
    let pb = Problem {
        x: &xv,
        w,
        method: config.method,
    };
    let first = normalize_glrr(&a0);
    let (mut tau, mut adot) = (first.tau, first.adot);
    let mut cur = pb.project(&h_tau(&adot, tau)?)?;
    let mut records = Vec::new();
    let mut prev_step: Option<f64> = None;
    let mut termination = Termination::MaxIter;
    for k in 0..config.max_iter {
        if config.retau_each_iter && k > 0 {
            let nz = normalize_glrr(&h_tau(&adot, tau)?);
            tau = nz.tau;
            adot = nz.adot;
        }
        let a = h_tau(&adot, tau)?;
        let mut record = IterationRecord {
            tau,
            adot: adot.clone(),
            residual: cur.objective,
            gamma: 0.0,
            glrr_residual: glrr_relative_residual(&a, &cur.s)?,
        };
        let delta = pb.direction(&cur, &a, tau)?;
        let (ls, next) = search(&pb, &cur, &adot, &delta, tau, prev_step, config)?;
        record.gamma = ls.gamma;
        records.push(record);
        if ls.gamma == 0.0 {
            termination = if ls.small_step {
                Termination::SmallStepStop
            } else {
                Termination::StepZero
            };
            break;
        }
        prev_step = Some(ls.gamma * norm(&delta));
        adot = ls.adot;
        cur = next.expect("accepted step carries its projection");
    }
    let a = h_tau(&adot, tau)?;
    if termination == Termination::MaxIter {
        records.push(IterationRecord {
            tau,
            adot: adot.clone(),
            residual: cur.objective,
            gamma: 0.0,
            glrr_residual: glrr_relative_residual(&a, &cur.s)?,
        });
    }
    Ok(FitResult {
        signal: cur.s,
        glrr: a,
        trace: SolverTrace {
            iterations: records,
            termination,
        },
    })
}

/// Gauss-Newton direction of the explicit coordinates `(ṡ, ȧ)` with a dense
/// Jacobian, for comparison with the image-space step.
pub fn full_gn_direction(jac: &DMatrix<f64>, w: &WeightSpec, resid: &[f64]) -> Result<Vec<f64>> {
    Ok(weighted_pinv_apply(jac, w, resid)?.coefficients.as_slice().to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::known_minimum::build_known_minimum;
    use crate::series::{generate_model_signal, ModelComponent};
    use crate::weights::{ar_inverse_covariance, mask_missing};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sine(n: usize) -> Vec<f64> {
        (0..n).map(|i| 2.0 * (0.3 * i as f64 + 0.4).sin()).collect()
    }

    fn dist(a: &[f64], b: &[f64]) -> f64 {
        norm(&a.iter().zip(b).map(|(x, y)| x - y).collect::<Vec<_>>())
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("gn".parse::<Method>().is_err());
    }

    #[test]
    fn initial_glrr_annihilates_exact_series() {
        let x = TimeSeries::new(sine(40)).unwrap();
        let a = initial_glrr(&x, 2).unwrap();
        let res = norm(&apply_qt(a.coeffs(), x.values()).unwrap());
        assert!(res <= 1e-8 * norm(x.values()));
    }

    #[test]
    fn initial_glrr_of_constant_is_first_difference() {
        let x = TimeSeries::new(vec![3.0; 12]).unwrap();
        let a = initial_glrr(&x, 1).unwrap();
        let c = a.coeffs();
        assert!((c[0] + c[1]).abs() < 1e-14 && c[0].abs() > 0.5);
    }

    #[test]
    fn initial_glrr_needs_enough_points() {
        let x = TimeSeries::new(vec![1.0; 5]).unwrap();
        assert!(matches!(initial_glrr(&x, 2), Err(Error::SeriesTooShort { .. })));
    }

    #[test]
    fn initial_glrr_with_gaps() {
        let comps = [
            ModelComponent { poly: vec![1.0], alpha: 0.9f64.ln(), omega: 0.1, phi: PI / 2.0 },
            ModelComponent { poly: vec![0.2], alpha: 1.05f64.ln(), omega: 1.0 / 24.0, phi: 3.0 * PI / 4.0 },
        ];
        let s = generate_model_signal(&comps, 50).unwrap();
        let mask: Vec<bool> = (0..50).map(|i| !(10..20).contains(&i) && !(35..40).contains(&i)).collect();
        let x = TimeSeries::with_mask(s.values().to_vec(), mask).unwrap();
        let a = initial_glrr(&x, 4).unwrap();
        assert!(a.coeffs().iter().all(|v| v.is_finite()) && a.norm() > 0.5);
    }

    #[test]
    fn step_vanishes_at_an_exact_fit() {
        let x = sine(30);
        let a = initial_glrr(&TimeSeries::new(x.clone()).unwrap(), 2).unwrap();
        let nz = normalize_glrr(&a);
        let w = WeightSpec::identity(30);
        for mode in [EvalMode::Plain, EvalMode::Compensated] {
            let (d, s) = mgn_step(&nz.adot, nz.tau, &x, &w, mode).unwrap();
            assert!(norm(&d) <= 1e-8, "{d:?}");
            assert!(dist(&s, &x) <= 1e-10 * norm(&x));
        }
        let (d, _) = vpgn_step(&nz.adot, nz.tau, &x, &w, false).unwrap();
        assert!(norm(&d) <= 1e-8);
    }

    #[test]
    fn step_is_stationary_at_the_known_minimum() {
        let p = build_known_minimum(100).unwrap();
        let nz = normalize_glrr(&p.a_star);
        let w = WeightSpec::identity(100);
        let (d, s) = mgn_step(&nz.adot, nz.tau, p.x.values(), &w, EvalMode::Compensated).unwrap();
        assert!(norm(&d) <= 1e-6, "{d:?}");
        assert!(dist(&s, p.y_star.values()) <= 1e-10);
    }

    #[test]
    fn zero_direction_takes_unit_step_first() {
        let p = build_known_minimum(40).unwrap();
        let nz = normalize_glrr(&p.start(1e-3));
        let w = WeightSpec::identity(40);
        let cfg = SolverConfig::new(Method::SMgn);
        let zero = vec![0.0; 3];
        let ls = line_search(&nz.adot, &zero, nz.tau, p.x.values(), &w, None, &cfg).unwrap();
        assert_eq!(ls.gamma, 1.0);
        assert!(ls.small_step);
        assert_eq!(ls.adot, nz.adot);
        // the same zero step later on is not shorter than the previous one
        let ls = line_search(&nz.adot, &zero, nz.tau, p.x.values(), &w, Some(0.0), &cfg).unwrap();
        assert_eq!(ls.gamma, 0.0);
    }

    #[test]
    fn improving_full_step_is_accepted() {
        let p = build_known_minimum(60).unwrap();
        let nz = normalize_glrr(&p.start(1e-4));
        let w = WeightSpec::identity(60);
        let cfg = SolverConfig::new(Method::SMgn);
        let (d, _) = mgn_step(&nz.adot, nz.tau, p.x.values(), &w, EvalMode::Compensated).unwrap();
        let ls = line_search(&nz.adot, &d, nz.tau, p.x.values(), &w, None, &cfg).unwrap();
        assert_eq!(ls.gamma, 1.0);
        assert!(!ls.small_step);
    }

    #[test]
    fn adversarial_direction_gives_zero_step() {
        let p = build_known_minimum(60).unwrap();
        let nz = normalize_glrr(&p.a_star);
        let w = WeightSpec::identity(60);
        let cfg = SolverConfig::new(Method::SMgn);
        let d = vec![40.0, -25.0, 31.0];
        let ls = line_search(&nz.adot, &d, nz.tau, p.x.values(), &w, Some(1.0), &cfg).unwrap();
        assert_eq!(ls.gamma, 0.0);
        assert!(!ls.small_step);
        assert_eq!(ls.adot, nz.adot);
    }

    #[test]
    fn noiseless_input_is_a_fixed_point() {
        let x = TimeSeries::new(sine(50)).unwrap();
        let w = WeightSpec::identity(50);
        for m in Method::ALL {
            let f = fit(&x, 2, &w, &SolverConfig::new(m), None).unwrap();
            assert!(dist(&f.signal, x.values()) <= 1e-8 * norm(x.values()), "{m}");
            assert!(f.trace.steps() <= 2, "{m}: {:?}", f.trace);
        }
    }

    #[test]
    fn converges_on_the_known_minimum() {
        let p = build_known_minimum(100).unwrap();
        let w = WeightSpec::identity(100);
        let f = fit(&p.x, 3, &w, &SolverConfig::new(Method::SMgn), Some(&p.start(1e-6))).unwrap();
        assert!(dist(&f.signal, p.y_star.values()) <= 1e-6);
        assert!(f.trace.is_monotone());
        assert!(glrr_relative_residual(&f.glrr, &f.signal).unwrap() <= 1e-8);
    }

    #[test]
    fn positive_rescaling_of_the_start_changes_nothing() {
        let p = build_known_minimum(50).unwrap();
        let w = WeightSpec::identity(50);
        let cfg = SolverConfig::new(Method::SMgn);
        let a0 = p.start(1e-3);
        let base = fit(&p.x, 3, &w, &cfg, Some(&a0)).unwrap();
        for c in [2.0, 0.125, 1024.0] {
            let f = fit(&p.x, 3, &w, &cfg, Some(&a0.scaled(c).unwrap())).unwrap();
            assert_eq!(f.trace, base.trace);
            assert_eq!(f.signal, base.signal);
        }
    }

    #[test]
    fn fixed_tau_is_respected() {
        let p = build_known_minimum(50).unwrap();
        let w = WeightSpec::identity(50);
        let mut cfg = SolverConfig::new(Method::SMgn);
        cfg.retau_each_iter = false;
        let f = fit(&p.x, 3, &w, &cfg, Some(&p.start(1e-2))).unwrap();
        let t0 = f.trace.iterations[0].tau;
        assert!(f.trace.iterations.iter().all(|r| r.tau == t0));
    }

    #[test]
    fn max_iter_is_reported() {
        let p = build_known_minimum(50).unwrap();
        let w = WeightSpec::identity(50);
        let mut cfg = SolverConfig::new(Method::SMgn);
        cfg.max_iter = 1;
        let f = fit(&p.x, 3, &w, &cfg, Some(&p.start(1e-2))).unwrap();
        assert_eq!(f.trace.termination, Termination::MaxIter);
        assert_eq!(f.trace.iterations.len(), 2);
    }

    #[test]
    fn rejects_bad_config_and_shapes() {
        let x = TimeSeries::new(sine(30)).unwrap();
        let w = WeightSpec::identity(30);
        let mut cfg = SolverConfig::new(Method::Mgn);
        cfg.max_iter = 0;
        assert!(fit(&x, 2, &w, &cfg, None).is_err());
        let cfg = SolverConfig::new(Method::Mgn);
        assert!(fit(&x, 2, &WeightSpec::identity(29), &cfg, None).is_err());
        let a0 = GlrrVector::new(vec![1.0, -1.0]).unwrap();
        assert!(fit(&x, 2, &w, &cfg, Some(&a0)).is_err());
    }

    #[test]
    fn variable_projection_needs_banded_inverse() {
        let x = TimeSeries::new(sine(30)).unwrap();
        let ar = ar_inverse_covariance(&[0.5], 1.0, 30).unwrap();
        let masked = mask_missing(WeightSpec::identity(30), &[true; 30]).unwrap();
        for m in [Method::Vpgn, Method::SVpgn] {
            for w in [&ar, &masked] {
                let err = fit(&x, 2, w, &SolverConfig::new(m), None).unwrap_err();
                assert!(matches!(err, Error::WeightVariant { .. }), "{err}");
            }
        }
        assert!(fit(&x, 2, &ar, &SolverConfig::new(Method::Mgn), None).is_ok());
    }

    #[test]
    fn variable_projection_direction_descends() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 40;
        let w = WeightSpec::identity(n);
        let mut ok = 0;
        for _ in 0..100 {
            let x: Vec<f64> = sine(n).into_iter().map(|v| v + 0.3 * rng.random_range(-1.0..1.0)).collect();
            let a = initial_glrr(&TimeSeries::new(x.clone()).unwrap(), 2).unwrap();
            let nz = normalize_glrr(&a);
            let (d, s) = vpgn_step(&nz.adot, nz.tau, &x, &w, false).unwrap();
            let f0 = dist(&x, &s);
            let next: Vec<f64> = nz.adot.iter().zip(&d).map(|(a, d)| a + 1e-3 * d).collect();
            let s1 = crate::projection::project_gamma(&h_tau(&next, nz.tau).unwrap(), &w, &x).unwrap();
            if dist(&x, &s1) < f0 {
                ok += 1;
            }
        }
        assert!(ok >= 95, "{ok}");
    }

    #[test]
    fn gapped_fit_respects_the_mask() {
        let n = 40;
        let mut vals = sine(n);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        vals.iter_mut().for_each(|v| *v += 0.1 * rng.random_range(-1.0..1.0));
        let mask: Vec<bool> = (0..n).map(|i| !(12..18).contains(&i)).collect();
        let x = TimeSeries::with_mask(vals, mask.clone()).unwrap();
        let w = mask_missing(WeightSpec::identity(n), &mask).unwrap();
        let f = fit(&x, 2, &w, &SolverConfig::new(Method::SMgn), None).unwrap();
        assert!(f.trace.is_monotone());
        assert!(f.signal.iter().all(|v| v.is_finite()));
        assert!(glrr_relative_residual(&f.glrr, &f.signal).unwrap() <= 1e-8 * norm(&f.signal));
        // values at the gaps do not matter
        let mut other = x.values().to_vec();
        for i in 12..18 {
            other[i] = 1e3;
        }
        let g = fit(&TimeSeries::with_mask(other, mask).unwrap(), 2, &w, &SolverConfig::new(Method::SMgn), Some(&f.glrr)).unwrap();
        let h = fit(&x, 2, &w, &SolverConfig::new(Method::SMgn), Some(&f.glrr)).unwrap();
        assert_eq!(g.signal, h.signal);
    }
}
