//! Report rows and their CSV form.

use std::io::Write;

use crate::error::Result;

/// CSV header.
pub const HEADER: [&str; 7] = ["experiment", "input_id", "lhs", "rhs", "ratio", "tolerance", "pass"];

/// One checked quantity.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub experiment: String,
    pub input_id: String,
    pub lhs: f64,
    pub rhs: f64,
    /// `lhs / rhs` when `rhs > 0`, else NaN.
    pub ratio: f64,
    pub tolerance: f64,
    pub pass: bool,
}

fn ratio(lhs: f64, rhs: f64) -> f64 {
    if rhs > 0.0 {
        lhs / rhs
    } else {
        f64::NAN
    }
}

impl ReportRow {
    pub fn new(experiment: &str, input_id: &str, lhs: f64, rhs: f64, tolerance: f64, pass: bool) -> Self {
        Self {
            experiment: experiment.to_string(),
            input_id: input_id.to_string(),
            lhs,
            rhs,
            ratio: ratio(lhs, rhs),
            tolerance,
            pass,
        }
    }

    /// Passes when `lhs / rhs` is finite and positive.
    pub fn finite(experiment: &str, input_id: &str, lhs: f64, rhs: f64) -> Self {
        let r = ratio(lhs, rhs);
        Self::new(experiment, input_id, lhs, rhs, f64::INFINITY, r.is_finite() && r > 0.0)
    }

    /// Passes when `|lhs / rhs - 1| <= tolerance`.
    pub fn relative(experiment: &str, input_id: &str, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        let r = ratio(lhs, rhs);
        Self::new(experiment, input_id, lhs, rhs, tolerance, (r - 1.0).abs() <= tolerance)
    }

    /// Passes when `|lhs - rhs| <= tolerance`.
    pub fn absolute(experiment: &str, input_id: &str, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        Self::new(experiment, input_id, lhs, rhs, tolerance, (lhs - rhs).abs() <= tolerance)
    }

    /// Passes when `lhs <= rhs + tolerance`.
    pub fn at_most(experiment: &str, input_id: &str, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        Self::new(experiment, input_id, lhs, rhs, tolerance, lhs <= rhs + tolerance)
    }
}

/// Writes rows with the [`HEADER`]; floats use the shortest round-trip form.
pub fn write_csv<W: Write>(rows: &[ReportRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER)?;
    for r in rows {
        w.write_record([
            r.experiment.clone(),
            r.input_id.clone(),
            r.lhs.to_string(),
            r.rhs.to_string(),
            r.ratio.to_string(),
            r.tolerance.to_string(),
            r.pass.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn to_csv_string(rows: &[ReportRow]) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}

/// Whether every row passes.
pub fn all_pass(rows: &[ReportRow]) -> bool {
    rows.iter().all(|r| r.pass)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn row_semantics() {
        let r = ReportRow::relative("e", "i", 1.1, 1.0, 0.2);
        assert!(r.pass && (r.ratio - 1.1).abs() < 1e-15);
        assert!(!ReportRow::relative("e", "i", 1.3, 1.0, 0.2).pass);
        assert!(ReportRow::absolute("e", "i", -1.95, -2.0, 0.1).pass);
        assert!(ReportRow::absolute("e", "i", -1.95, -2.0, 0.1).ratio.is_nan());
        assert!(!ReportRow::finite("e", "i", f64::INFINITY, 1.0).pass);
        assert!(!ReportRow::finite("e", "i", 1.0, 0.0).pass);
        assert!(ReportRow::at_most("e", "i", 2.0, 2.0, 0.0).pass);
    }

    #[test]
    fn csv_layout() {
        let rows = vec![ReportRow::finite("theorem-1.1", "single, w=1", 0.1, 3.0)];
        let s = to_csv_string(&rows).unwrap();
        let mut lines = s.lines();
        assert_eq!(lines.next().unwrap(), "experiment,input_id,lhs,rhs,ratio,tolerance,pass");
        let line = lines.next().unwrap();
        assert!(line.starts_with("theorem-1.1,\"single, w=1\",0.1,3,0.03333333333333333,inf,true"), "{line}");
    }
}
