//! Synthetic series: model signals, seeded noise and gaps.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::series::{generate_model_signal, ModelComponent};
use crate::weights::norm;

/// Noise level of the 50-point preset.
pub const ISHTEVA50_NOISE: f64 = 0.2;
pub const ISHTEVA50_RANK: usize = 4;

/// Named test series.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// `0.9^i cos(πi/5) + 0.2 · 1.05^i cos(πi/12 + π/4)`, `i = 1..50`.
    Ishteva50,
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ishteva50" => Ok(Preset::Ishteva50),
            other => Err(Error::Parse(format!("unknown preset '{other}'"))),
        }
    }
}

impl Preset {
    pub fn components(self) -> Vec<ModelComponent> {
        match self {
            Preset::Ishteva50 => vec![
                ModelComponent {
                    poly: vec![1.0],
                    alpha: 0.9f64.ln(),
                    omega: 0.1,
                    phi: PI / 2.0,
                },
                ModelComponent {
                    poly: vec![0.2],
                    alpha: 1.05f64.ln(),
                    omega: 1.0 / 24.0,
                    phi: 0.75 * PI,
                },
            ],
        }
    }

    pub fn len(self) -> usize {
        match self {
            Preset::Ishteva50 => 50,
        }
    }

    pub fn is_empty(self) -> bool {
        false
    }

    pub fn default_noise(self) -> f64 {
        match self {
            Preset::Ishteva50 => ISHTEVA50_NOISE,
        }
    }

    pub fn signal(self) -> Result<Vec<f64>> {
        Ok(generate_model_signal(&self.components(), self.len())?.values().to_vec())
    }
}

/// `s + level · ε/‖ε‖ · ‖s‖` with standard normal `ε` drawn from ChaCha8
/// seeded with `seed`.
pub fn add_noise(signal: &[f64], level: f64, seed: u64) -> Vec<f64> {
    if level == 0.0 {
        return signal.to_vec();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let eps: Vec<f64> = (0..signal.len()).map(|_| StandardNormal.sample(&mut rng)).collect();
    let scale = level * norm(signal) / norm(&eps);
    signal.iter().zip(&eps).map(|(s, e)| s + scale * e).collect()
}

/// 1-based inclusive ranges such as `10-19,35-39`; a single number is a
/// one-point gap.
pub fn parse_gaps(s: &str) -> Result<Vec<(usize, usize)>> {
    let bad = |t: &str| Error::Parse(format!("bad gap range '{t}'"));
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| {
            let t = t.trim();
            let (lo, hi) = match t.split_once('-') {
                Some((a, b)) => (a.trim(), b.trim()),
                None => (t, t),
            };
            let lo: usize = lo.parse().map_err(|_| bad(t))?;
            let hi: usize = hi.parse().map_err(|_| bad(t))?;
            if lo == 0 || hi < lo {
                return Err(bad(t));
            }
            Ok((lo, hi))
        })
        .collect()
}

/// Replaces the gap positions by `NaN`.
pub fn apply_gaps(values: &[f64], gaps: &[(usize, usize)]) -> Result<Vec<f64>> {
    let mut out = values.to_vec();
    for &(lo, hi) in gaps {
        if hi > values.len() {
            return Err(Error::IndexOutOfRange {
                index: hi,
                max: values.len(),
            });
        }
        out[lo - 1..hi].iter_mut().for_each(|v| *v = f64::NAN);
    }
    Ok(out)
}

/// Components separated by `;`, each `c0,c1,...:alpha:omega:phi` where the
/// `c_k` are polynomial coefficients in increasing degree.
pub fn parse_components(s: &str) -> Result<Vec<ModelComponent>> {
    let bad = |t: &str| Error::Parse(format!("bad component '{t}'"));
    s.split(';')
        .filter(|t| !t.trim().is_empty())
        .map(|t| {
            let f: Vec<&str> = t.split(':').collect();
            if f.len() != 4 {
                return Err(bad(t));
            }
            let poly = f[0]
                .split(',')
                .map(|c| c.trim().parse::<f64>().map_err(|_| bad(t)))
                .collect::<Result<Vec<_>>>()?;
            let num = |x: &str| x.trim().parse::<f64>().map_err(|_| bad(t));
            Ok(ModelComponent {
                poly,
                alpha: num(f[1])?,
                omega: num(f[2])?,
                phi: num(f[3])?,
            })
        })
        .collect()
}
