//! CSV and JSON writers for probe tables. CSV floats carry 17 significant digits.

use std::io::Write;

use flowcalc_core::chrono::OrderEstimate;
use serde::Serialize;

use crate::error::CliResult;

/// `{:.16e}`: 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// One row of a probe table; `bound` is empty when no witness was supplied.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProbeRow {
    pub t: f64,
    pub norm: f64,
    pub bound: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeSummary {
    pub residual: String,
    pub slope: Option<f64>,
    pub r_squared: Option<f64>,
    pub excluded: Vec<usize>,
    pub rows: Vec<ProbeRow>,
}

impl ProbeSummary {
    pub fn new(residual: &str, rows: Vec<ProbeRow>, estimate: Option<&OrderEstimate>) -> Self {
        ProbeSummary {
            residual: residual.to_owned(),
            slope: estimate.map(|e| e.fitted_slope),
            r_squared: estimate.map(|e| e.r_squared),
            excluded: estimate.map(|e| e.excluded.clone()).unwrap_or_default(),
            rows,
        }
    }
}

pub fn write_probe_csv<W: Write>(rows: &[ProbeRow], out: W) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "norm", "bound"])?;
    for r in rows {
        w.write_record([fmt_f64(r.t), fmt_f64(r.norm), r.bound.map(fmt_f64).unwrap_or_default()])?;
    }
    w.flush()?;
    Ok(())
}

/// Generic table: a header and rows of floats, optionally led by a text column.
pub fn write_table_csv<W: Write>(header: &[String], rows: &[(Option<String>, Vec<f64>)], out: W) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for (label, values) in rows {
        let mut rec: Vec<String> = label.iter().cloned().collect();
        rec.extend(values.iter().map(|&v| fmt_f64(v)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<W: Write, T: Serialize>(value: &T, mut out: W) -> CliResult<()> {
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_significant_digits() {
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_f64(0.1).parse::<f64>().unwrap(), 0.1);
        assert_eq!(fmt_f64(-2.0), "-2.0000000000000000e0");
    }

    #[test]
    fn probe_csv_layout() {
        let mut buf = Vec::new();
        write_probe_csv(&[ProbeRow { t: 0.5, norm: 0.25, bound: None }, ProbeRow { t: 0.25, norm: 0.0625, bound: Some(1.0) }], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,norm,bound");
        assert_eq!(lines[1], "5.0000000000000000e-1,2.5000000000000000e-1,");
        assert!(lines[2].ends_with(",1.0000000000000000e0"));
    }
}
