//! JSON and CSV exchange formats.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{CMatrix, CVector, C64};

/// A complex matrix as nested `[re, im]` rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MatrixJson(pub Vec<Vec<[f64; 2]>>);

impl From<&CMatrix> for MatrixJson {
    fn from(m: &CMatrix) -> Self {
        MatrixJson((0..m.nrows()).map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect()).collect())
    }
}

impl MatrixJson {
    pub fn to_matrix(&self, rows: usize, cols: usize) -> Result<CMatrix> {
        let bad = || Error::InvalidInput(format!("expected a {rows}x{cols} matrix"));
        if self.0.len() != rows && !(rows == 0 || cols == 0) {
            return Err(bad());
        }
        let mut out = CMatrix::zeros(rows, cols);
        for (i, row) in self.0.iter().enumerate() {
            if i >= rows || row.len() != cols {
                if cols == 0 && row.is_empty() {
                    continue;
                }
                return Err(bad());
            }
            for (j, z) in row.iter().enumerate() {
                out[(i, j)] = C64::new(z[0], z[1]);
            }
        }
        Ok(out)
    }
}

/// A complex vector as a list of `[re, im]` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VectorJson(pub Vec<[f64; 2]>);

impl From<&CVector> for VectorJson {
    fn from(v: &CVector) -> Self {
        VectorJson(v.iter().map(|z| [z.re, z.im]).collect())
    }
}

impl From<&VectorJson> for CVector {
    fn from(v: &VectorJson) -> Self {
        CVector::from_iterator(v.0.len(), v.0.iter().map(|z| C64::new(z[0], z[1])))
    }
}

/// Formats a float for CSV output with a fixed, locale-free representation.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.12e}")
    } else if x.is_nan() {
        "nan".to_string()
    } else if x > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

/// Renders rows of floats as CSV with the given header.
pub fn csv_table(header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|&x| fmt_f64(x)).collect();
        let _ = writeln!(out, "{}", cells.join(","));
    }
    out
}

/// Parses a numeric CSV with a header line into (header, rows).
pub fn parse_csv(text: &str) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| Error::InvalidInput("empty CSV".into()))?
        .split(',')
        .map(|s| s.trim().to_string())
        .collect();
    let mut rows = Vec::new();
    for (ln, line) in lines.enumerate() {
        let row: std::result::Result<Vec<f64>, _> = line.split(',').map(|s| s.trim().parse::<f64>()).collect();
        let row = row.map_err(|e| Error::InvalidInput(format!("CSV line {}: {e}", ln + 2)))?;
        if row.len() != header.len() {
            return Err(Error::InvalidInput(format!("CSV line {} has {} fields", ln + 2, row.len())));
        }
        rows.push(row);
    }
    Ok((header, rows))
}
