//! Real-number formatting and the CSV files exchanged by the CLI.
//!
//! Reals are written with 17 significant digits, which round-trips every
//! `f64`. Hex-float (`0x1.8p-1`) is available for bit-exact pipelines and is
//! accepted by every reader.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use crate::driver::Point2;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RealFormat {
    #[default]
    Decimal17,
    HexFloat,
}

impl RealFormat {
    pub fn format(&self, x: f64) -> String {
        match self {
            RealFormat::Decimal17 => format_decimal(x),
            RealFormat::HexFloat => format_hex(x),
        }
    }
}

/// Scientific notation with 17 significant digits.
pub fn format_decimal(x: f64) -> String {
    format!("{x:.16e}")
}

/// C99 `%a`-style hexadecimal float.
pub fn format_hex(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    let sign = if x.is_sign_negative() { "-" } else { "" };
    if x.is_infinite() {
        return format!("{sign}inf");
    }
    let bits = x.to_bits();
    let exp = ((bits >> 52) & 0x7ff) as i64;
    let mant = bits & ((1u64 << 52) - 1);
    if exp == 0 && mant == 0 {
        return format!("{sign}0x0p+0");
    }
    let (lead, e) = if exp == 0 { (0, -1022) } else { (1, exp - 1023) };
    let mut digits = format!("{mant:013x}");
    while digits.ends_with('0') {
        digits.pop();
    }
    let mut s = format!("{sign}0x{lead}");
    if !digits.is_empty() {
        let _ = write!(s, ".{digits}");
    }
    let _ = write!(s, "p{e:+}");
    s
}

fn parse_hex(s: &str) -> Option<f64> {
    let (neg, body) = match s.strip_prefix('-') {
        Some(b) => (true, b),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let body = body.strip_prefix("0x").or_else(|| body.strip_prefix("0X"))?;
    let (mantissa, exp) = body.split_once(['p', 'P'])?;
    let exp: i32 = exp.parse().ok()?;
    let (int, frac) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    if int.is_empty() && frac.is_empty() {
        return None;
    }
    let mut value = 0.0f64;
    for c in int.chars() {
        value = value * 16.0 + c.to_digit(16)? as f64;
    }
    let mut scale = 1.0 / 16.0;
    for c in frac.chars() {
        value += c.to_digit(16)? as f64 * scale;
        scale /= 16.0;
    }
    // Mantissas written by format_hex have at most 53 bits, so this is exact.
    let v = value * 2f64.powi(exp);
    Some(if neg { -v } else { v })
}

/// Parses decimal or hex-float notation.
pub fn parse_real(s: &str) -> Result<f64> {
    let t = s.trim();
    if t.contains("0x") || t.contains("0X") {
        parse_hex(t).ok_or_else(|| Error::Parse(format!("bad hex float `{t}`")))
    } else {
        t.parse().map_err(|_| Error::Parse(format!("bad number `{t}`")))
    }
}

/// Writes `j,x1,x2` rows (1-based `j`) under a header line.
pub fn write_points<W: Write>(mut w: W, points: &[Point2], fmt: RealFormat) -> std::io::Result<()> {
    writeln!(w, "j,x1,x2")?;
    for (j, p) in points.iter().enumerate() {
        writeln!(w, "{},{},{}", j + 1, fmt.format(p.x1), fmt.format(p.x2))?;
    }
    Ok(())
}

/// Reads a `j,x1,x2` file; the header and the `j` column are optional.
pub fn read_points<R: BufRead>(r: R) -> Result<Vec<Point2>> {
    let mut out = Vec::new();
    for (lineno, line) in r.lines().enumerate() {
        let line = line.map_err(|e| Error::Parse(e.to_string()))?;
        let line = line.trim();
        if line.is_empty() || (lineno == 0 && line.starts_with(|c: char| c.is_ascii_alphabetic())) {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        let (a, b) = match cols.as_slice() {
            [_, a, b] | [a, b] => (a, b),
            _ => return Err(Error::Parse(format!("line {}: expected j,x1,x2", lineno + 1))),
        };
        out.push(Point2::new(parse_real(a)?, parse_real(b)?));
    }
    Ok(out)
}

/// Writes one sample per line under a `y` header.
pub fn write_samples<W: Write>(mut w: W, samples: &[f64], fmt: RealFormat) -> std::io::Result<()> {
    writeln!(w, "y")?;
    for &y in samples {
        writeln!(w, "{}", fmt.format(y))?;
    }
    Ok(())
}

/// Reads one real per line; a leading non-numeric header is skipped.
pub fn read_samples<R: BufRead>(r: R) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (lineno, line) in r.lines().enumerate() {
        let line = line.map_err(|e| Error::Parse(e.to_string()))?;
        let line = line.trim();
        if line.is_empty() || (lineno == 0 && line.starts_with(|c: char| c.is_ascii_alphabetic())) {
            continue;
        }
        let last = line.rsplit(',').next().unwrap_or(line);
        out.push(parse_real(last)?);
    }
    Ok(out)
}
