//! Stable text emission for report files.
//!
//! Every number that lands in a TSV goes through [`fmt_g6`] so that reruns
//! produce byte-identical files. JSON reports are serialized with serde and
//! a trailing newline.

use crate::error::Result;
use sha2::{Digest, Sha256};
use std::path::Path;

/// Formats a float with six significant digits, positional notation for
/// moderate magnitudes and scientific notation otherwise. Trailing zeros
/// are trimmed, so `2.0` prints as `2` and `0.5` as `0.5`.
pub fn fmt_g6(v: f64) -> String {
    if v.is_nan() {
        return "NaN".to_string();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    if v == 0.0 {
        return "0".to_string();
    }
    let sci = format!("{:.5e}", v);
    let (mant, exp) = sci.split_once('e').expect("exponent in {:.5e} output");
    let exp: i32 = exp.parse().expect("numeric exponent");
    if (-4..6).contains(&exp) {
        positional(mant, exp)
    } else {
        format!("{}e{}", trim_zeros(mant), exp)
    }
}

/// Rebuilds a positional decimal from a `d.ddddd` mantissa and an exponent.
/// Pure string manipulation, no float re-rounding.
fn positional(mant: &str, exp: i32) -> String {
    let (sign, mant) = match mant.strip_prefix('-') {
        Some(rest) => ("-", rest),
        None => ("", mant),
    };
    let digits: String = mant.chars().filter(|c| *c != '.').collect();
    let digits = digits.as_str();
    let point = exp + 1; // digits before the decimal point
    let body = if point <= 0 {
        format!("0.{}{}", "0".repeat(-point as usize), digits)
    } else if (point as usize) >= digits.len() {
        format!("{}{}", digits, "0".repeat(point as usize - digits.len()))
    } else {
        format!("{}.{}", &digits[..point as usize], &digits[point as usize..])
    };
    format!("{}{}", sign, trim_zeros(&body))
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

/// Tab separated table with a mandatory header line and a trailing newline.
#[derive(Debug, Clone)]
pub struct TsvTable {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl TsvTable {
    pub fn new<S: Into<String>>(header: Vec<S>) -> Self {
        TsvTable {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push<S: Into<String>>(&mut self, row: Vec<S>) {
        let row: Vec<String> = row.into_iter().map(Into::into).collect();
        assert_eq!(row.len(), self.header.len(), "tsv row width mismatch");
        self.rows.push(row);
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.header.join("\t"));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join("\t"));
            out.push('\n');
        }
        out
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    let digest = h.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{:02x}", b));
    }
    out
}

/// Serializes `value` as pretty JSON with a trailing newline.
pub fn to_json_bytes<T: serde::Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(crate::error::Error::from)?;
    bytes.push(b'\n');
    Ok(bytes)
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, to_json_bytes(value)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g6_basic() {
        assert_eq!(fmt_g6(0.0), "0");
        assert_eq!(fmt_g6(-0.0), "0");
        assert_eq!(fmt_g6(2.0), "2");
        assert_eq!(fmt_g6(-1.959964), "-1.95996");
        assert_eq!(fmt_g6(0.5), "0.5");
        assert_eq!(fmt_g6(1234567.0), "1.23457e6");
        assert_eq!(fmt_g6(123456.0), "123456");
        assert_eq!(fmt_g6(0.000123456), "0.000123456");
        assert_eq!(fmt_g6(0.0000123456), "1.23456e-5");
        assert_eq!(fmt_g6(1.23456789e-17), "1.23457e-17");
        assert_eq!(fmt_g6(-2.9090909), "-2.90909");
        assert_eq!(fmt_g6(9.9999999), "10");
        assert_eq!(fmt_g6(f64::INFINITY), "inf");
        assert_eq!(fmt_g6(f64::NEG_INFINITY), "-inf");
        assert_eq!(fmt_g6(f64::NAN), "NaN");
    }

    #[test]
    fn g6_roundtrip_is_close() {
        // parsing the printed form recovers the value to 6 significant digits
        for &v in &[3.14159265, -0.002718281828, 6.02214076e23, 1.0 / 3.0] {
            let printed = fmt_g6(v);
            let back: f64 = printed.parse().unwrap();
            assert!(((back - v) / v).abs() < 1e-5, "{} -> {}", v, printed);
        }
    }

    #[test]
    fn tsv_shape() {
        let mut t = TsvTable::new(vec!["a", "b"]);
        t.push(vec!["1", "2"]);
        assert_eq!(t.to_tsv(), "a\tb\n1\t2\n");
    }

    #[test]
    fn sha256_known_value() {
        // echo -n "" | sha256sum
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }
}
