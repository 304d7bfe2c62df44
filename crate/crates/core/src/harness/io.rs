//! On-disk formats.
//!
//! Field files (`FBS1`), all little-endian:
//!
//! | bytes      | content                                  |
//! |------------|------------------------------------------|
//! | 4          | magic `FBS1`                             |
//! | 1          | `d` as `u8`                              |
//! | `8d`       | `T_1..T_d` as `u64`                      |
//! | `8d`       | Hurst truth as `f64`, NaN when unknown   |
//! | `8 prod T` | samples as `f64`, row-major              |

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, FormatError, Result};
use crate::estimator::{EstimatorReport, RegressionSystem};
use crate::field::{checked_volume, Field};

pub const MAGIC: &[u8; 4] = b"FBS1";

pub fn header_len(d: usize) -> usize {
    4 + 1 + 16 * d
}

pub fn encode_field(field: &Field) -> Result<Vec<u8>> {
    let d = field.ndim();
    let d8 = u8::try_from(d).map_err(|_| Error::InvalidInput(format!("{d} axes do not fit the header")))?;
    let mut buf = Vec::with_capacity(header_len(d) + 8 * field.data().len());
    buf.extend_from_slice(MAGIC);
    buf.push(d8);
    for &t in field.dims() {
        buf.extend_from_slice(&(t as u64).to_le_bytes());
    }
    for i in 0..d {
        let h = field.hurst_truth().map_or(f64::NAN, |h| h[i]);
        buf.extend_from_slice(&h.to_le_bytes());
    }
    for &v in field.data() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    Ok(buf)
}

fn take<'a>(bytes: &'a [u8], pos: &mut usize, n: usize, expected_total: u64) -> std::result::Result<&'a [u8], FormatError> {
    let end = pos.checked_add(n).filter(|&e| e <= bytes.len()).ok_or(FormatError::Truncated {
        expected: expected_total,
        found: bytes.len() as u64,
    })?;
    let s = &bytes[*pos..end];
    *pos = end;
    Ok(s)
}

pub fn decode_field(bytes: &[u8]) -> Result<Field> {
    let found = bytes.len() as u64;
    if bytes.len() < 5 {
        if bytes.len() >= 4 && &bytes[..4] != MAGIC {
            return Err(FormatError::BadMagic(bytes[..4].try_into().unwrap()).into());
        }
        return Err(FormatError::Truncated { expected: 5, found }.into());
    }
    if &bytes[..4] != MAGIC {
        return Err(FormatError::BadMagic(bytes[..4].try_into().unwrap()).into());
    }
    let d = bytes[4] as usize;
    let header = header_len(d) as u64;
    let mut pos = 5;
    let mut dims = Vec::with_capacity(d);
    for _ in 0..d {
        let raw = u64::from_le_bytes(take(bytes, &mut pos, 8, header)?.try_into().unwrap());
        dims.push(usize::try_from(raw).map_err(|_| FormatError::DimensionOverflow)?);
    }
    let mut hurst = Vec::with_capacity(d);
    for _ in 0..d {
        hurst.push(f64::from_le_bytes(take(bytes, &mut pos, 8, header)?.try_into().unwrap()));
    }
    let volume = checked_volume(&dims).ok_or(FormatError::DimensionOverflow)?;
    let payload = volume.checked_mul(8).ok_or(FormatError::DimensionOverflow)?;
    let expected = header
        .checked_add(payload as u64)
        .ok_or(FormatError::DimensionOverflow)?;
    if found < expected {
        return Err(FormatError::Truncated { expected, found }.into());
    }
    if found > expected {
        return Err(FormatError::TrailingBytes(found - expected).into());
    }
    let data = bytes[pos..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let truth = if hurst.iter().all(|h| h.is_nan()) { None } else { Some(hurst) };
    Ok(Field::new(dims, data)?.with_hurst_truth(truth))
}

pub fn save_field(field: &Field, path: &Path) -> Result<()> {
    let bytes = encode_field(field)?;
    let mut f = BufWriter::new(File::create(path)?);
    f.write_all(&bytes)?;
    f.flush()?;
    Ok(())
}

pub fn load_field(path: &Path) -> Result<Field> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    decode_field(&bytes)
}

/// Log-scale diagram as CSV: `j_1..j_d, log2_S, fitted, residual, n_J`.
pub fn write_logscale(system: &RegressionSystem, report: &EstimatorReport, mut out: impl Write) -> Result<()> {
    let d = system.ndim();
    let alpha = report.alpha();
    if alpha.len() != d + 1 {
        return Err(Error::DimensionMismatch("report and system dimensions differ".into()));
    }
    let header: Vec<String> = (1..=d)
        .map(|i| format!("j_{i}"))
        .chain(["log2_S", "fitted", "residual", "n_J"].map(String::from))
        .collect();
    writeln!(out, "{}", header.join(","))?;
    let counts = system.counts();
    for (l, octave) in system.octaves().iter().enumerate() {
        let row = system.design().row(l);
        let fitted: f64 = row.iter().zip(&alpha).map(|(a, b)| a * b).sum();
        let obs = system.logvars()[l];
        let mut cells: Vec<String> = octave.as_slice().iter().map(u32::to_string).collect();
        cells.push(format!("{obs:.17e}"));
        cells.push(format!("{fitted:.17e}"));
        cells.push(format!("{:.17e}", obs - fitted));
        cells.push(counts[l].to_string());
        writeln!(out, "{}", cells.join(","))?;
    }
    Ok(())
}

pub fn logscale_export(system: &RegressionSystem, report: &EstimatorReport, path: &Path) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    write_logscale(system, report, &mut f)?;
    f.flush()?;
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct ReportJson {
    pub method: String,
    pub hurst: Vec<f64>,
    pub intercept: f64,
    pub covariance: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
    pub out_of_range: bool,
    pub octaves: Vec<Vec<u32>>,
    pub log2_s: Vec<f64>,
}

impl ReportJson {
    pub fn new(system: &RegressionSystem, report: &EstimatorReport) -> Self {
        Self {
            method: report.method.as_str().to_string(),
            hurst: report.hurst.clone(),
            intercept: report.intercept,
            covariance: matrix_rows(&report.covariance),
            residuals: report.residuals.clone(),
            out_of_range: report.out_of_range,
            octaves: system.octaves().iter().map(|o| o.as_slice().to_vec()).collect(),
            log2_s: system.logvars().as_slice().to_vec(),
        }
    }
}

pub fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub fn write_matrix_csv(m: &DMatrix<f64>, mut out: impl Write) -> Result<()> {
    for row in m.row_iter() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.17e}")).collect();
        writeln!(out, "{}", cells.join(","))?;
    }
    Ok(())
}
