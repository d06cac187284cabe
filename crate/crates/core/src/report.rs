//! Metrics tables and their CSV / JSON encodings.
//!
//! Floats are written with six significant digits; CSV cells for absent
//! values (static runs have no time, failed cells have no RMSE) are empty.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CSV_COLUMNS: [&str; 11] = [
    "method",
    "sigma_m",
    "v_mean_mps",
    "eta",
    "time_s",
    "rmse_m",
    "rmse_db",
    "crlb_sqrt_m",
    "median_m",
    "p90_m",
    "failure_rate",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub method: String,
    pub sigma_m: f64,
    pub v_mean_mps: Option<f64>,
    pub eta: Option<f64>,
    pub time_s: Option<f64>,
    pub rmse_m: Option<f64>,
    pub rmse_db: Option<f64>,
    pub crlb_sqrt_m: Option<f64>,
    pub median_m: Option<f64>,
    pub p90_m: Option<f64>,
    pub failure_rate: f64,
    /// Empirical CDF as `(error_m, fraction)` steps; JSON only.
    #[serde(default)]
    pub cdf: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricsReport {
    pub rows: Vec<ReportRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::InvalidInput(format!("unknown format `{other}` (expected csv or json)"))),
        }
    }
}

/// `v` with six significant digits, trailing zeros trimmed (like `%.6g`).
pub fn fmt_sig(v: f64) -> String {
    if !v.is_finite() {
        return String::new();
    }
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{v:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..6).contains(&exp) {
        let m = trim_zeros(mantissa);
        return format!("{m}e{exp}");
    }
    let decimals = (5 - exp).max(0) as usize;
    trim_zeros(&format!("{v:.decimals$}")).to_owned()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Round-trip `v` through its six-digit text form.
pub fn round_sig(v: f64) -> f64 {
    if v.is_finite() {
        fmt_sig(v).parse().expect("formatted float parses")
    } else {
        v
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_sig).unwrap_or_default()
}

pub fn emit_csv(report: &MetricsReport) -> String {
    let mut out = CSV_COLUMNS.join(",");
    out.push('\n');
    for r in &report.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.method,
            fmt_sig(r.sigma_m),
            opt(r.v_mean_mps),
            opt(r.eta),
            opt(r.time_s),
            opt(r.rmse_m),
            opt(r.rmse_db),
            opt(r.crlb_sqrt_m),
            opt(r.median_m),
            opt(r.p90_m),
            fmt_sig(r.failure_rate),
        );
    }
    out
}

fn rounded(report: &MetricsReport) -> MetricsReport {
    let o = |v: Option<f64>| v.filter(|x| x.is_finite()).map(round_sig);
    MetricsReport {
        rows: report
            .rows
            .iter()
            .map(|r| ReportRow {
                method: r.method.clone(),
                sigma_m: round_sig(r.sigma_m),
                v_mean_mps: o(r.v_mean_mps),
                eta: o(r.eta),
                time_s: o(r.time_s),
                rmse_m: o(r.rmse_m),
                rmse_db: o(r.rmse_db),
                crlb_sqrt_m: o(r.crlb_sqrt_m),
                median_m: o(r.median_m),
                p90_m: o(r.p90_m),
                failure_rate: round_sig(r.failure_rate),
                cdf: r.cdf.iter().map(|&(e, f)| (round_sig(e), round_sig(f))).collect(),
            })
            .collect(),
    }
}

pub fn emit_json(report: &MetricsReport) -> String {
    let mut s = serde_json::to_string_pretty(&rounded(report)).expect("report serialises");
    s.push('\n');
    s
}

pub fn emit(report: &MetricsReport, format: Format) -> String {
    match format {
        Format::Csv => emit_csv(report),
        Format::Json => emit_json(report),
    }
}

pub fn write_report(report: &MetricsReport, format: Format, path: &std::path::Path) -> Result<()> {
    std::fs::write(path, emit(report, format)).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

pub fn parse_csv(text: &str) -> Result<MetricsReport> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::InvalidInput("empty CSV".into()))?;
    if header != CSV_COLUMNS.join(",") {
        return Err(Error::InvalidInput(format!("unexpected CSV header `{header}`")));
    }
    let num = |s: &str, col: &str| -> Result<Option<f64>> {
        if s.is_empty() {
            Ok(None)
        } else {
            s.parse().map(Some).map_err(|_| Error::InvalidInput(format!("column {col}: bad number `{s}`")))
        }
    };
    let mut rows = Vec::new();
    for line in lines.filter(|l| !l.is_empty()) {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != CSV_COLUMNS.len() {
            return Err(Error::InvalidInput(format!("expected {} cells, got {}", CSV_COLUMNS.len(), f.len())));
        }
        let required = |i: usize| -> Result<f64> {
            num(f[i], CSV_COLUMNS[i])?.ok_or_else(|| Error::InvalidInput(format!("column {} is empty", CSV_COLUMNS[i])))
        };
        rows.push(ReportRow {
            method: f[0].to_owned(),
            sigma_m: required(1)?,
            v_mean_mps: num(f[2], CSV_COLUMNS[2])?,
            eta: num(f[3], CSV_COLUMNS[3])?,
            time_s: num(f[4], CSV_COLUMNS[4])?,
            rmse_m: num(f[5], CSV_COLUMNS[5])?,
            rmse_db: num(f[6], CSV_COLUMNS[6])?,
            crlb_sqrt_m: num(f[7], CSV_COLUMNS[7])?,
            median_m: num(f[8], CSV_COLUMNS[8])?,
            p90_m: num(f[9], CSV_COLUMNS[9])?,
            failure_rate: required(10)?,
            cdf: Vec::new(),
        });
    }
    Ok(MetricsReport { rows })
}

pub fn parse_json(text: &str) -> Result<MetricsReport> {
    serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("report JSON: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_significant_digits() {
        assert_eq!(fmt_sig(19.503456789), "19.5035");
        assert_eq!(fmt_sig(0.1), "0.1");
        assert_eq!(fmt_sig(1234567.0), "1.23457e6");
        assert_eq!(fmt_sig(999999.7), "1e6");
        assert_eq!(fmt_sig(-0.000012345678), "-1.23457e-5");
        assert_eq!(fmt_sig(3.0), "3");
        assert_eq!(fmt_sig(0.0), "0");
    }

    #[test]
    fn empty_report_is_header_only() {
        assert_eq!(emit_csv(&MetricsReport::default()), format!("{}\n", CSV_COLUMNS.join(",")));
    }

    #[test]
    fn csv_round_trip() {
        let row = ReportRow {
            method: "two-step".into(),
            sigma_m: 5.0,
            v_mean_mps: None,
            eta: Some(0.1),
            time_s: None,
            rmse_m: Some(19.87654321),
            rmse_db: Some(12.98311),
            crlb_sqrt_m: Some(19.5),
            median_m: None,
            p90_m: Some(30.0),
            failure_rate: 0.002,
            cdf: vec![(1.0, 0.5), (2.0, 1.0)],
        };
        let report = MetricsReport { rows: vec![row] };
        let back = parse_csv(&emit_csv(&report)).unwrap();
        let mut expect = rounded(&report);
        expect.rows[0].cdf.clear();
        assert_eq!(back, expect);
        assert_eq!(parse_json(&emit_json(&report)).unwrap(), rounded(&report));
    }
}
