//! CSV series files and the weight argument syntax.
//!
//! A series file has one column named `value`; the header is optional and an
//! empty cell or `NaN` marks a missing observation.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::series::TimeSeries;
use crate::weights::{ar_inverse_covariance, ar_inverse_covariance_band, mask_missing, WeightSpec};

fn parse_cell(cell: &str, line: usize) -> Result<f64> {
    let t = cell.trim();
    if t.is_empty() || t.eq_ignore_ascii_case("nan") {
        return Ok(f64::NAN);
    }
    t.parse::<f64>()
        .map_err(|_| Error::Parse(format!("line {line}: '{t}' is not a number")))
}

/// Raw values with `NaN` at missing entries. Blank lines are missing values.
pub fn read_values<R: Read>(mut reader: R) -> Result<Vec<f64>> {
    let mut text = String::new();
    reader.read_to_string(&mut text)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let first = line.split(',').next().unwrap_or("").trim().trim_matches('"');
        if i == 0 && first.eq_ignore_ascii_case("value") {
            continue;
        }
        out.push(parse_cell(first, i + 1)?);
    }
    Ok(out)
}

pub fn read_series<R: Read>(reader: R) -> Result<TimeSeries> {
    let raw = read_values(reader)?;
    if raw.is_empty() {
        return Err(Error::Parse("no values in input".into()));
    }
    TimeSeries::from_nan_values(&raw)
}

fn cell(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        // shortest representation that parses back to the same bits
        format!("{v}")
    }
}

/// Writes a `value` column; `NaN` becomes an empty cell.
pub fn write_values<W: Write>(writer: W, values: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["value"])?;
    for &v in values {
        w.write_record([cell(v)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_series<W: Write>(writer: W, series: &TimeSeries) -> Result<()> {
    write_values(writer, &series.to_nan_values())
}

/// `index, observed, fitted` with 1-based indices.
pub fn write_fit<W: Write>(writer: W, observed: &TimeSeries, fitted: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["index", "observed", "fitted"])?;
    for (i, (o, f)) in observed.to_nan_values().iter().zip(fitted).enumerate() {
        w.write_record([(i + 1).to_string(), cell(*o), cell(*f)])?;
    }
    w.flush()?;
    Ok(())
}

/// Weight choice before the series length is known.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightArg {
    Identity,
    /// `W` is the inverse covariance of an AR process (banded `W`).
    Ar { phi: Vec<f64>, sigma2: f64 },
    /// `W^{-1}` is the inverse covariance of an AR process (banded `W^{-1}`).
    ArInv { phi: Vec<f64>, sigma2: f64 },
}

impl WeightArg {
    /// `identity`, `ar:phi1[,phi2,...][:sigma2]` or the same with `arinv`.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("identity") {
            return Ok(WeightArg::Identity);
        }
        let mut parts = s.split(':');
        let head = parts.next().unwrap_or("");
        let bad = || Error::Parse(format!("bad weight spec '{s}'"));
        let coeffs = parts.next().ok_or_else(bad)?;
        let phi = coeffs
            .split(',')
            .map(|t| t.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<Result<Vec<_>>>()?;
        let sigma2 = match parts.next() {
            Some(t) => t.trim().parse::<f64>().map_err(|_| bad())?,
            None => 1.0,
        };
        if parts.next().is_some() || !(sigma2 > 0.0) {
            return Err(bad());
        }
        match head.to_ascii_lowercase().as_str() {
            "ar" => Ok(WeightArg::Ar { phi, sigma2 }),
            "arinv" => Ok(WeightArg::ArInv { phi, sigma2 }),
            _ => Err(bad()),
        }
    }

    /// Weight matrix of size `n`, masked where `mask` is false.
    pub fn build(&self, n: usize, mask: &[bool]) -> Result<WeightSpec> {
        let w = match self {
            WeightArg::Identity => WeightSpec::identity(n),
            WeightArg::Ar { phi, sigma2 } => ar_inverse_covariance(phi, *sigma2, n)?,
            WeightArg::ArInv { phi, sigma2 } => {
                WeightSpec::banded_winv(&ar_inverse_covariance_band(phi, *sigma2, n)?)?
            }
        };
        if mask.iter().all(|&m| m) {
            Ok(w)
        } else {
            mask_missing(w, mask)
        }
    }
}
