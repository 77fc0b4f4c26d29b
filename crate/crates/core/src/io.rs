//! CSV files for streams, schemes, measurements, coefficients and traces,
//! plus the flat `key = value` format used for configs and metadata.
//!
//! Complex values are split into `_re`/`_im` columns and floats are written
//! with Rust's shortest round-trip formatting.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use ndarray::Array1;

use crate::error::{Error, Result};
use crate::fri::{DiracStream, SamplingScheme};
use crate::linalg::C64;
use crate::solvers::RecoveryTrace;
use crate::toeplitz::FourierVector;

/// Shortest decimal that parses back to the same `f64`, switching to
/// exponent notation for very large or small magnitudes.
pub fn format_f64(v: f64) -> String {
    format!("{v:?}")
}

fn parse_f64(field: &str, what: &str) -> Result<f64> {
    field
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("bad {what} value '{field}'")))
}

fn read_rows(path: &Path, header: &[&str]) -> Result<Vec<Vec<f64>>> {
    let mut r = csv::Reader::from_path(path)?;
    let found: Vec<String> = r.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if found != header {
        return Err(Error::Parse(format!(
            "{}: expected columns {}, found {}",
            path.display(),
            header.join(","),
            found.join(",")
        )));
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let row = rec
            .iter()
            .zip(header)
            .map(|(f, h)| parse_f64(f, h))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

fn write_rows<I, R>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

const DIRAC_HEADER: [&str; 3] = ["t", "amplitude_re", "amplitude_im"];

pub fn write_diracs(path: impl AsRef<Path>, locations: &[f64], amplitudes: &[C64]) -> Result<()> {
    write_rows(
        path.as_ref(),
        &DIRAC_HEADER,
        locations
            .iter()
            .zip(amplitudes)
            .map(|(t, a)| [format_f64(*t), format_f64(a.re), format_f64(a.im)]),
    )
}

pub fn write_stream(path: impl AsRef<Path>, stream: &DiracStream) -> Result<()> {
    write_diracs(path, &stream.locations, &stream.amplitudes)
}

pub fn read_stream(path: impl AsRef<Path>, period: f64) -> Result<DiracStream> {
    let rows = read_rows(path.as_ref(), &DIRAC_HEADER)?;
    let locations = rows.iter().map(|r| r[0]).collect();
    let amplitudes = rows.iter().map(|r| C64::new(r[1], r[2])).collect();
    DiracStream::new(period, locations, amplitudes)
}

pub fn write_scheme(path: impl AsRef<Path>, scheme: &SamplingScheme) -> Result<()> {
    write_rows(path.as_ref(), &["theta"], scheme.times.iter().map(|t| [format_f64(*t)]))
}

pub fn read_scheme(path: impl AsRef<Path>, half_bandwidth: usize) -> Result<SamplingScheme> {
    let rows = read_rows(path.as_ref(), &["theta"])?;
    SamplingScheme::new(rows.into_iter().map(|r| r[0]).collect(), half_bandwidth)
}

const MEASUREMENT_HEADER: [&str; 3] = ["theta", "y_re", "y_im"];

pub fn write_measurements(path: impl AsRef<Path>, times: &[f64], y: &Array1<C64>) -> Result<()> {
    if times.len() != y.len() {
        return Err(Error::Dimension(format!(
            "{} times for {} samples",
            times.len(),
            y.len()
        )));
    }
    write_rows(
        path.as_ref(),
        &MEASUREMENT_HEADER,
        times
            .iter()
            .zip(y.iter())
            .map(|(t, v)| [format_f64(*t), format_f64(v.re), format_f64(v.im)]),
    )
}

pub fn read_measurements(path: impl AsRef<Path>) -> Result<(Vec<f64>, Array1<C64>)> {
    let rows = read_rows(path.as_ref(), &MEASUREMENT_HEADER)?;
    let times = rows.iter().map(|r| r[0]).collect();
    let y = rows.iter().map(|r| C64::new(r[1], r[2])).collect();
    Ok((times, y))
}

const COEFFICIENT_HEADER: [&str; 3] = ["m", "re", "im"];

pub fn write_coefficients(path: impl AsRef<Path>, x: &FourierVector) -> Result<()> {
    let m = x.half_bandwidth() as i64;
    write_rows(
        path.as_ref(),
        &COEFFICIENT_HEADER,
        x.values()
            .iter()
            .enumerate()
            .map(|(i, z)| [(i as i64 - m).to_string(), format_f64(z.re), format_f64(z.im)]),
    )
}

pub fn read_coefficients(path: impl AsRef<Path>) -> Result<FourierVector> {
    let rows = read_rows(path.as_ref(), &COEFFICIENT_HEADER)?;
    let m = (rows.len() / 2) as f64;
    for (i, r) in rows.iter().enumerate() {
        if r[0] != i as f64 - m {
            return Err(Error::Parse(format!(
                "coefficient rows must run m = -{m}..={m} in order; row {i} has m = {}",
                r[0]
            )));
        }
    }
    FourierVector::new(rows.iter().map(|r| C64::new(r[1], r[2])).collect())
}

pub fn write_trace(path: impl AsRef<Path>, trace: &RecoveryTrace) -> Result<()> {
    write_rows(
        path.as_ref(),
        &["iteration", "residual", "relative_change"],
        trace
            .residuals
            .iter()
            .zip(&trace.relative_changes)
            .enumerate()
            .map(|(i, (r, c))| [(i + 1).to_string(), format_f64(*r), format_f64(*c)]),
    )
}

/// Parses `key = value` lines; `#` starts a comment, blank lines are skipped.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("line {}: expected 'key = value', got '{raw}'", lineno + 1)))?;
        let key = k.trim();
        if key.is_empty() {
            return Err(Error::Parse(format!("line {}: empty key", lineno + 1)));
        }
        map.insert(key.to_string(), v.trim().to_string());
    }
    Ok(map)
}

pub fn read_key_values(path: impl AsRef<Path>) -> Result<BTreeMap<String, String>> {
    parse_key_values(&fs::read_to_string(path)?)
}

pub fn write_key_values<K: AsRef<str>, V: AsRef<str>>(path: impl AsRef<Path>, pairs: &[(K, V)]) -> Result<()> {
    let mut text = String::new();
    for (k, v) in pairs {
        text.push_str(k.as_ref());
        text.push_str(" = ");
        text.push_str(v.as_ref());
        text.push('\n');
    }
    fs::write(path, text)?;
    Ok(())
}
