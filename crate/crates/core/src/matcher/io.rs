//! Difference-matrix and match-result files.
//!
//! `SDMX` binary layout, all little-endian: magic `SDMX`, u32 rows, u32 cols,
//! then rows·cols float32 values in row-major order.

use std::fmt::Write as _;
use std::path::Path;

use super::{DifferenceMatrix, MatchResult};
use crate::error::{Error, Result};
use crate::Scalar;

pub const MAGIC: &[u8; 4] = b"SDMX";

pub fn encode_matrix<T: Scalar>(m: &DifferenceMatrix<T>) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + 4 * m.values().len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(m.rows() as u32).to_le_bytes());
    out.extend_from_slice(&(m.cols() as u32).to_le_bytes());
    for v in m.values() {
        out.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
    }
    out
}

pub fn decode_matrix<T: Scalar>(bytes: &[u8], path: &Path) -> Result<DifferenceMatrix<T>> {
    if bytes.len() < 12 || &bytes[..4] != MAGIC {
        return Err(Error::malformed(path, "missing SDMX header"));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap()) as usize;
    let (rows, cols) = (word(4), word(8));
    let body = &bytes[12..];
    if rows.checked_mul(cols).and_then(|n| n.checked_mul(4)) != Some(body.len()) {
        return Err(Error::malformed(path, format!("{rows}x{cols} matrix does not match {} payload bytes", body.len())));
    }
    let values = body
        .chunks_exact(4)
        .map(|c| T::lit(f32::from_le_bytes(c.try_into().unwrap()) as f64))
        .collect();
    DifferenceMatrix::from_vec(rows, cols, values)
}

pub fn write_matrix<T: Scalar>(path: impl AsRef<Path>, m: &DifferenceMatrix<T>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_matrix(m)).map_err(|e| Error::io(path, e))
}

pub fn read_matrix<T: Scalar>(path: impl AsRef<Path>) -> Result<DifferenceMatrix<T>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_matrix(&bytes, path)
}

/// One CSV row per reference frame, one column per test frame.
pub fn matrix_csv<T: Scalar>(m: &DifferenceMatrix<T>) -> String {
    let mut out = String::new();
    for s in 0..m.rows() {
        let row: Vec<String> = (0..m.cols()).map(|t| m.get(s, t).to_string()).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn matches_csv<T: Scalar>(matches: &[MatchResult<T>]) -> String {
    let mut out = String::from("T,s_star,V_star,score,accepted\n");
    for m in matches {
        writeln!(out, "{},{},{},{},{}", m.test_index, m.best_ref_index, m.best_velocity, m.score, m.accepted).unwrap();
    }
    out
}

pub fn parse_matches_csv<T: Scalar>(text: &str, path: &Path) -> Result<Vec<MatchResult<T>>> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("T,s_star,V_star,score,accepted") {
        return Err(Error::malformed(path, "missing match CSV header"));
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            let bad = || Error::malformed(path, format!("line {}: {line:?}", i + 2));
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != 5 {
                return Err(bad());
            }
            let score: f64 = f[3].parse().map_err(|_| bad())?;
            Ok(MatchResult {
                test_index: f[0].parse().map_err(|_| bad())?,
                best_ref_index: f[1].parse().map_err(|_| bad())?,
                best_velocity: f[2].parse().map_err(|_| bad())?,
                score: T::lit(score),
                accepted: f[4].parse().map_err(|_| bad())?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sdmx_round_trip() {
        let m = DifferenceMatrix::from_fn(3, 4, |s, t| (s * 4 + t) as f64 * 0.5);
        let bytes = encode_matrix(&m);
        assert_eq!(bytes.len(), 12 + 48);
        let back: DifferenceMatrix<f64> = decode_matrix(&bytes, Path::new("m")).unwrap();
        assert_eq!(back, m);
        assert!(decode_matrix::<f64>(&bytes[..20], Path::new("m")).is_err());
        assert!(decode_matrix::<f64>(b"XXXX\0\0\0\0\0\0\0\0", Path::new("m")).is_err());
    }

    #[test]
    fn match_csv_round_trip() {
        let rows = vec![
            MatchResult { test_index: 10, best_ref_index: 3, best_velocity: 0.9, score: -1.25, accepted: true },
            MatchResult { test_index: 11, best_ref_index: 0, best_velocity: 0.8, score: f64::INFINITY, accepted: false },
        ];
        let text = matches_csv(&rows);
        assert_eq!(parse_matches_csv::<f64>(&text, Path::new("m")).unwrap(), rows);
        assert_eq!(matrix_csv(&DifferenceMatrix::from_fn(2, 2, |s, t| (s + t) as f64)), "0,1\n1,2\n");
    }
}
