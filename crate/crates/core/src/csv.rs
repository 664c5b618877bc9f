//! CSV files for waveforms, coefficients and loss curves.
//!
//! Floats are written with 17 significant digits (`{:.16e}`), which
//! round-trips every `f64` exactly.

use std::fmt::Write as _;

use crate::error::{Error, Result};

pub const WAVEFORM_HEADER: &str = "t,value";
pub const COEFFICIENT_HEADER: &str = "x,omega,a,b";
pub const LOSS_HEADER: &str = "step,loss";

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// One row of a coefficient CSV.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoefficientRow {
    pub x: usize,
    pub omega: usize,
    pub a: f64,
    pub b: f64,
}

pub fn write_waveform(points: impl IntoIterator<Item = (f64, f64)>) -> String {
    let mut s = format!("{WAVEFORM_HEADER}\n");
    for (t, v) in points {
        let _ = writeln!(s, "{},{}", fmt_f64(t), fmt_f64(v));
    }
    s
}

pub fn write_coefficients(rows: impl IntoIterator<Item = CoefficientRow>) -> String {
    let mut s = format!("{COEFFICIENT_HEADER}\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{},{}", r.x, r.omega, fmt_f64(r.a), fmt_f64(r.b));
    }
    s
}

pub fn write_losses(losses: &[f64]) -> String {
    let mut s = format!("{LOSS_HEADER}\n");
    for (i, l) in losses.iter().enumerate() {
        let _ = writeln!(s, "{},{}", i, fmt_f64(*l));
    }
    s
}

fn records<'a>(text: &'a str, header: &str, width: usize) -> Result<impl Iterator<Item = (usize, Vec<&'a str>)>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == header => {}
        Some((_, h)) => return Err(Error::Config(format!("expected CSV header `{header}`, got `{h}`"))),
        None => return Err(Error::Config(format!("empty CSV, expected header `{header}`"))),
    }
    let rows: Vec<_> = lines
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| (i + 1, l.split(',').map(str::trim).collect::<Vec<_>>()))
        .collect();
    if let Some((line, fields)) = rows.iter().find(|(_, f)| f.len() != width) {
        return Err(Error::Config(format!(
            "CSV line {line}: expected {width} fields, got {}",
            fields.len()
        )));
    }
    Ok(rows.into_iter())
}

fn field<T: std::str::FromStr>(line: usize, s: &str) -> Result<T> {
    s.parse()
        .map_err(|_| Error::Config(format!("CSV line {line}: cannot parse `{s}`")))
}

pub fn parse_waveform(text: &str) -> Result<Vec<(f64, f64)>> {
    records(text, WAVEFORM_HEADER, 2)?
        .map(|(line, f)| Ok((field(line, f[0])?, field(line, f[1])?)))
        .collect()
}

pub fn parse_coefficients(text: &str) -> Result<Vec<CoefficientRow>> {
    records(text, COEFFICIENT_HEADER, 4)?
        .map(|(line, f)| {
            Ok(CoefficientRow {
                x: field(line, f[0])?,
                omega: field(line, f[1])?,
                a: field(line, f[2])?,
                b: field(line, f[3])?,
            })
        })
        .collect()
}

pub fn parse_losses(text: &str) -> Result<Vec<(usize, f64)>> {
    records(text, LOSS_HEADER, 2)?
        .map(|(line, f)| Ok((field(line, f[0])?, field(line, f[1])?)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn seventeen_significant_digits() {
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_f64(-std::f64::consts::PI), "-3.1415926535897931e0");
    }

    #[test]
    fn headers_and_layout() {
        let s = write_coefficients([CoefficientRow {
            x: 7,
            omega: 3,
            a: 1.0,
            b: -0.5,
        }]);
        assert_eq!(s, "x,omega,a,b\n7,3,1.0000000000000000e0,-5.0000000000000000e-1\n");
        assert_eq!(write_losses(&[0.25]), "step,loss\n0,2.5000000000000000e-1\n");
    }

    #[test]
    fn wrong_header_or_width() {
        assert!(parse_waveform("time,value\n0,1\n").is_err());
        assert!(parse_waveform("t,value\n0,1,2\n").is_err());
        assert!(parse_losses("").is_err());
        assert!(parse_coefficients("x,omega,a,b\n1,2,x,4\n").is_err());
    }

    proptest! {
        #[test]
        fn waveform_round_trip_is_exact(points in prop::collection::vec((any::<f64>(), any::<f64>()), 0..40)) {
            let points: Vec<(f64, f64)> = points.into_iter().filter(|(a, b)| a.is_finite() && b.is_finite()).collect();
            let back = parse_waveform(&write_waveform(points.iter().copied())).unwrap();
            prop_assert_eq!(back.len(), points.len());
            for ((t0, v0), (t1, v1)) in points.iter().zip(&back) {
                prop_assert_eq!(t0.to_bits(), t1.to_bits());
                prop_assert_eq!(v0.to_bits(), v1.to_bits());
            }
        }

        #[test]
        fn coefficient_round_trip_is_exact(rows in prop::collection::vec((0usize..64, 0usize..128, -1e3f64..1e3, -1e3f64..1e3), 0..40)) {
            let rows: Vec<_> = rows.into_iter().map(|(x, omega, a, b)| CoefficientRow { x, omega, a, b }).collect();
            prop_assert_eq!(parse_coefficients(&write_coefficients(rows.iter().copied())).unwrap(), rows);
        }
    }
}
