//! Plain-text series format.
//!
//! ```text
//! kind=taylor order=4
//! 0 0.0000000000000000e0 0.0000000000000000e0
//! 1 1.0000000000000000e0 0.0000000000000000e0
//! ...
//! ```
//!
//! The header may carry extra `key=value` flags (group elements add `group=1`).
//! Coefficients are written with 17 significant digits, which round-trips
//! every finite double exactly.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_complex::Complex64;

use super::series::{ScaledSeries, SeriesKind};
use crate::error::{Error, Result};

pub fn write_series(x: &ScaledSeries, extra: &[(&str, &str)]) -> String {
    let kind = match x.kind() {
        SeriesKind::Taylor => "taylor",
        SeriesKind::Fourier => "fourier",
    };
    let mut out = format!("kind={kind} order={}", x.order());
    for (k, v) in extra {
        let _ = write!(out, " {k}={v}");
    }
    out.push('\n');
    for (m, c) in x.indices().zip(x.coeffs()) {
        let _ = writeln!(out, "{m} {:.16e} {:.16e}", c.re, c.im);
    }
    out
}

/// Parses a series; returns it with every header flag (including `kind` and `order`).
pub fn read_series(text: &str) -> Result<(ScaledSeries, BTreeMap<String, String>)> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    let (hline, header) = lines.next().ok_or_else(|| parse_err(1, "empty input"))?;
    let mut flags = BTreeMap::new();
    for tok in header.split_whitespace() {
        let (k, v) = tok
            .split_once('=')
            .ok_or_else(|| parse_err(hline, format!("header token `{tok}` is not key=value")))?;
        flags.insert(k.to_string(), v.to_string());
    }
    let kind = match flags.get("kind").map(String::as_str) {
        Some("taylor") => SeriesKind::Taylor,
        Some("fourier") => SeriesKind::Fourier,
        other => return Err(parse_err(hline, format!("unknown kind {other:?}"))),
    };
    let order: usize = flags
        .get("order")
        .ok_or_else(|| parse_err(hline, "missing order"))?
        .parse()
        .map_err(|e| parse_err(hline, format!("bad order: {e}")))?;
    let mut x = ScaledSeries::zeros(kind, order);
    let mut seen = vec![false; x.coeffs().len()];
    for (line, body) in lines {
        let fields: Vec<&str> = body.split_whitespace().collect();
        let [idx, re, im] = fields[..] else {
            return Err(parse_err(line, "expected `index re im`"));
        };
        let idx: isize = idx.parse().map_err(|e| parse_err(line, format!("bad index: {e}")))?;
        let re: f64 = re.parse().map_err(|e| parse_err(line, format!("bad real part: {e}")))?;
        let im: f64 = im.parse().map_err(|e| parse_err(line, format!("bad imaginary part: {e}")))?;
        let pos = x
            .indices()
            .position(|m| m == idx)
            .ok_or_else(|| parse_err(line, format!("index {idx} outside order {order}")))?;
        if seen[pos] {
            return Err(parse_err(line, format!("duplicate index {idx}")));
        }
        seen[pos] = true;
        x.set(idx, Complex64::new(re, im));
    }
    Ok((x, flags))
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_and_layout() {
        let x = ScaledSeries::taylor_real(2, &[0.0, 1.0, -0.5]);
        let text = write_series(&x, &[("group", "1")]);
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("kind=taylor order=2 group=1"));
        assert_eq!(lines.next(), Some("0 0.0000000000000000e0 0.0000000000000000e0"));
        assert_eq!(lines.nth(1), Some("2 -5.0000000000000000e-1 0.0000000000000000e0"));
        let (back, flags) = read_series(&text).unwrap();
        assert_eq!(back, x);
        assert_eq!(flags.get("group").map(String::as_str), Some("1"));
    }

    #[test]
    fn rejects_malformed_input() {
        assert!(read_series("").is_err());
        assert!(read_series("kind=laurent order=2").is_err());
        assert!(read_series("kind=taylor order=2\n3 1 0").is_err());
        assert!(read_series("kind=taylor order=2\n1 1 0\n1 2 0").is_err());
        assert!(read_series("kind=taylor order=2\n1 x 0").is_err());
        let err = read_series("kind=fourier order=1\n-1 1.0").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(
            fourier in any::<bool>(),
            parts in prop::collection::vec((any::<f64>(), any::<f64>()), 1..20),
        ) {
            prop_assume!(parts.iter().all(|(a, b)| a.is_finite() && b.is_finite()));
            let mut parts = parts;
            if fourier && parts.len() % 2 == 0 {
                parts.pop();
            }
            prop_assume!(!parts.is_empty());
            let coeffs: Vec<Complex64> = parts.iter().map(|&(a, b)| Complex64::new(a, b)).collect();
            let x = if fourier { ScaledSeries::fourier(coeffs) } else { ScaledSeries::taylor(coeffs) };
            let (back, _) = read_series(&write_series(&x, &[])).unwrap();
            for (a, b) in back.coeffs().iter().zip(x.coeffs()) {
                prop_assert_eq!(a.re.to_bits(), b.re.to_bits());
                prop_assert_eq!(a.im.to_bits(), b.im.to_bits());
            }
        }
    }
}
