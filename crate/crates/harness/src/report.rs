//! Run reports and CSV artifacts.
//!
//! `report.csv` and the `series_*.csv` files are deterministic functions of
//! `(config, seed)`; wall time appears only in `summary.txt`, which is the
//! one non-deterministic artifact.

use std::fs;
use std::io::Write;
use std::path::Path;

use subdiff_core::error::{Error, Result};

/// One verification row: the estimate, its oracle, the uncertainty, and the
/// tolerance that decided `pass`. No silent defaults: `tol` is always the
/// concrete number the comparison used, and `criterion` says how.
#[derive(Debug, Clone)]
pub struct CheckRow {
    pub name: String,
    pub estimate: f64,
    pub oracle: f64,
    pub se: f64,
    pub tol: f64,
    pub criterion: String,
    pub pass: bool,
}

impl CheckRow {
    /// |estimate - oracle| <= tol, with tol spelled out by the caller.
    pub fn abs_gap(name: impl Into<String>, estimate: f64, oracle: f64, se: f64, tol: f64) -> Self {
        CheckRow {
            name: name.into(),
            estimate,
            oracle,
            se,
            tol,
            criterion: "abs(estimate - oracle) <= tol".into(),
            pass: (estimate - oracle).abs() <= tol,
        }
    }

    /// estimate <= tol (one-sided magnitude checks).
    pub fn bound(name: impl Into<String>, estimate: f64, tol: f64) -> Self {
        CheckRow {
            name: name.into(),
            estimate,
            oracle: 0.0,
            se: 0.0,
            tol,
            criterion: "estimate <= tol".into(),
            pass: estimate <= tol,
        }
    }

    /// lo <= estimate <= hi encoded with oracle = midpoint, tol = half-width.
    pub fn band(name: impl Into<String>, estimate: f64, lo: f64, hi: f64) -> Self {
        CheckRow {
            name: name.into(),
            estimate,
            oracle: 0.5 * (lo + hi),
            se: 0.0,
            tol: 0.5 * (hi - lo),
            criterion: "abs(estimate - oracle) <= tol (band)".into(),
            pass: estimate >= lo && estimate <= hi,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub experiment: String,
    pub config_echo: String,
    pub seed: u64,
    pub checks: Vec<CheckRow>,
    pub wall_secs: f64,
}

impl RunReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// Deterministic per-check CSV (no wall time).
pub fn write_report_csv(report: &RunReport, path: &Path) -> Result<()> {
    let mut out = String::new();
    out.push_str("check,estimate,oracle,se,tol,criterion,pass\n");
    for c in &report.checks {
        out.push_str(&format!(
            "{},{:?},{:?},{:?},{:?},{},{}\n",
            c.name, c.estimate, c.oracle, c.se, c.tol, c.criterion, c.pass
        ));
    }
    write_file(path, &out)
}

/// Plain-text summary with the config echo and wall time.
pub fn write_summary(report: &RunReport, path: &Path) -> Result<()> {
    let mut out = String::new();
    out.push_str(&format!("experiment: {}\n", report.experiment));
    out.push_str(&format!("config: {}\n", report.config_echo));
    out.push_str(&format!("seed: {}\n", report.seed));
    out.push_str(&format!("wall_seconds: {:.3}\n", report.wall_secs));
    out.push_str(&format!(
        "result: {}\n\n",
        if report.all_pass() { "PASS" } else { "FAIL" }
    ));
    for c in &report.checks {
        out.push_str(&format!(
            "[{}] {}: estimate {:.6e} oracle {:.6e} se {:.3e} tol {:.3e} ({})\n",
            if c.pass { "pass" } else { "FAIL" },
            c.name,
            c.estimate,
            c.oracle,
            c.se,
            c.tol,
            c.criterion
        ));
    }
    write_file(path, &out)
}

/// Numeric series in CSV form; `{:?}` formatting keeps full round-trip
/// precision so byte comparison across runs is meaningful.
pub fn write_series(path: &Path, header: &str, rows: &[Vec<f64>]) -> Result<()> {
    let mut out = String::with_capacity(rows.len() * 32 + header.len() + 1);
    out.push_str(header);
    out.push('\n');
    for row in rows {
        let mut first = true;
        for v in row {
            if !first {
                out.push(',');
            }
            out.push_str(&format!("{v:?}"));
            first = false;
        }
        out.push('\n');
    }
    write_file(path, &out)
}

fn write_file(path: &Path, content: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)
            .map_err(|e| Error::parameter(format!("cannot create {}: {e}", parent.display())))?;
    }
    let mut f = fs::File::create(path)
        .map_err(|e| Error::parameter(format!("cannot create {}: {e}", path.display())))?;
    f.write_all(content.as_bytes())
        .map_err(|e| Error::parameter(format!("cannot write {}: {e}", path.display())))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_series_is_header_only() {
        let dir = std::env::temp_dir().join("subdiff-report-test");
        let path = dir.join("series_empty.csv");
        write_series(&path, "a,b,c", &[]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "a,b,c\n");
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn band_check_boundaries() {
        assert!(CheckRow::band("x", 1.4, 1.4, 2.6).pass);
        assert!(CheckRow::band("x", 2.6, 1.4, 2.6).pass);
        assert!(!CheckRow::band("x", 2.7, 1.4, 2.6).pass);
    }
}
