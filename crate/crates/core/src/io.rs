//! Matrix file formats consumed by the CLI.
//!
//! Two forms are accepted: dense CSV with one row per line and entries that
//! are either plain reals (`1.5`) or complex in `re+imj` notation
//! (`1.5+2j`, `-0.25-1.5j`, `2j`), and a JSON object
//! `{"dim": l, "entries": [[re, im], ...]}` in row-major order. JSON parsing
//! goes through serde_json's f64 path, so numbers round-trip bit-exactly.

use crate::matrix::SquareMatrix;
use crate::{Error, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

#[derive(Debug, Serialize, Deserialize)]
struct MatrixJson {
    dim: usize,
    entries: Vec<[f64; 2]>,
}

pub fn matrix_from_json(text: &str) -> Result<SquareMatrix> {
    let parsed: MatrixJson =
        serde_json::from_str(text).map_err(|e| Error::Input(format!("bad matrix JSON: {e}")))?;
    SquareMatrix::new(
        parsed.dim,
        parsed
            .entries
            .iter()
            .map(|&[re, im]| Complex64::new(re, im))
            .collect(),
    )
}

pub fn matrix_to_json(m: &SquareMatrix) -> String {
    let doc = MatrixJson {
        dim: m.dim(),
        entries: m.entries().iter().map(|z| [z.re, z.im]).collect(),
    };
    serde_json::to_string(&doc).expect("matrix serializes")
}

/// Parse one complex scalar: `re`, `re+imj`, `re-imj`, `imj`, `j`, `-j`.
/// Whitespace around the token is tolerated.
pub fn parse_complex(token: &str) -> Result<Complex64> {
    let s = token.trim();
    if s.is_empty() {
        return Err(Error::Input("empty matrix entry".into()));
    }
    if let Some(body) = s.strip_suffix(['j', 'i']) {
        // split at the sign that separates re from im, skipping a leading
        // sign and exponent signs
        let bytes = body.as_bytes();
        let mut split = None;
        for k in (1..bytes.len()).rev() {
            let c = bytes[k] as char;
            if (c == '+' || c == '-') && !matches!(bytes[k - 1] as char, 'e' | 'E') {
                split = Some(k);
                break;
            }
        }
        match split {
            Some(k) => {
                let re: f64 = body[..k]
                    .parse()
                    .map_err(|_| Error::Input(format!("bad real part in `{s}`")))?;
                let im_str = &body[k..];
                let im: f64 = if im_str == "+" {
                    1.0
                } else if im_str == "-" {
                    -1.0
                } else {
                    im_str
                        .parse()
                        .map_err(|_| Error::Input(format!("bad imaginary part in `{s}`")))?
                };
                Ok(Complex64::new(re, im))
            }
            None => {
                let im: f64 = if body.is_empty() {
                    1.0
                } else if body == "-" {
                    -1.0
                } else {
                    body.parse()
                        .map_err(|_| Error::Input(format!("bad imaginary part in `{s}`")))?
                };
                Ok(Complex64::new(0.0, im))
            }
        }
    } else {
        let re: f64 = s
            .parse()
            .map_err(|_| Error::Input(format!("bad matrix entry `{s}`")))?;
        Ok(Complex64::new(re, 0.0))
    }
}

pub fn matrix_from_csv(text: &str) -> Result<SquareMatrix> {
    let mut rows: Vec<Vec<Complex64>> = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(parse_complex)
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Input("empty CSV matrix".into()));
    }
    let dim = rows.len();
    if rows.iter().any(|r| r.len() != dim) {
        return Err(Error::Input(format!(
            "CSV matrix is not square: {} rows but ragged columns",
            dim
        )));
    }
    SquareMatrix::from_rows(&rows)
}

/// Dispatch on extension: `.json` or anything else as CSV.
pub fn matrix_from_path(path: &std::path::Path) -> Result<SquareMatrix> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Input(format!("cannot read {}: {e}", path.display())))?;
    if path.extension().map(|e| e == "json").unwrap_or(false) {
        matrix_from_json(&text)
    } else {
        matrix_from_csv(&text)
    }
}
