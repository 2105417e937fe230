//! Artifacts: plain CSV tables and a JSON summary per run.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};
use tubeqer::qer::QERReport;

use crate::config::Resolved;

/// One pass/fail assertion of an experiment, tagged with the acceptance
/// criterion it certifies.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub criterion: String,
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    pub fn new(criterion: &str, name: &str, pass: bool, detail: String) -> Self {
        Self { criterion: criterion.into(), name: name.into(), pass, detail }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Self { name: name.into(), header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, cells: Vec<String>) {
        debug_assert_eq!(cells.len(), self.header.len());
        self.rows.push(cells);
    }

    pub fn write<W: Write>(&self, w: W) -> io::Result<()> {
        let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
        out.write_record(&self.header)?;
        for r in &self.rows {
            out.write_record(r)?;
        }
        out.flush()
    }
}

/// Full-precision scientific notation.
pub fn num(v: f64) -> String {
    format!("{v:.17e}")
}

pub fn int(v: usize) -> String {
    v.to_string()
}

#[derive(Clone, Debug)]
pub struct Outcome {
    pub checks: Vec<Check>,
    pub tables: Vec<Table>,
    /// Kind-specific data for the JSON summary.
    pub data: Value,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn summary(&self, cfg: &Resolved) -> Value {
        json!({
            "kind": cfg.kind.name(),
            "config": cfg,
            "passed": self.passed(),
            "checks": self.checks,
            "data": self.data,
        })
    }

    /// Write `<table>.csv` files and `summary.json` into `dir`.
    pub fn write(&self, cfg: &Resolved, dir: &Path) -> io::Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        for t in &self.tables {
            let p = dir.join(format!("{}.csv", t.name));
            t.write(fs::File::create(&p)?)?;
            written.push(p);
        }
        let p = dir.join("summary.json");
        let mut f = fs::File::create(&p)?;
        serde_json::to_writer_pretty(&mut f, &self.summary(cfg))?;
        f.write_all(b"\n")?;
        written.push(p);
        Ok(written)
    }
}

/// The QER sweep table: one row per `h`, fit slopes repeated on every row.
pub fn qer_table(name: &str, report: &QERReport) -> Table {
    let mut t = Table::new(
        name,
        &[
            "h",
            "members",
            "term1_log",
            "term2_log",
            "scaled_lhs",
            "rhs",
            "rhs_liouville",
            "gap",
            "norm",
            "norm_min",
            "norm_max",
            "weighted_norm",
            "gap_slope",
            "norm_slope",
            "norm_slope_lo",
            "norm_slope_hi",
        ],
    );
    let n = report.surface.dim as f64;
    let slope = |f: &Option<tubeqer::fit::LinearFit>| f.as_ref().map(|f| f.slope).unwrap_or(f64::NAN);
    let (lo, hi) = report.fits.norm.as_ref().map(|f| f.slope_ci).unwrap_or((f64::NAN, f64::NAN));
    for r in &report.rows {
        // Unscaled logs: the functional carries h^{n/2} e^{1/h}.
        let shift = 1.0 / r.h + 0.5 * n * r.h.ln();
        t.push(vec![
            num(r.h),
            int(r.members),
            num(r.term1.norm().ln() + shift),
            num(r.term2.abs().ln() + shift),
            num(r.scaled_lhs.re),
            num(r.rhs_defect.unwrap_or(r.rhs_liouville)),
            num(r.rhs_liouville),
            num(r.gap),
            num(r.norm_mean),
            num(r.norm_min),
            num(r.norm_max),
            num(r.log_weighted_norm),
            num(slope(&report.fits.gap)),
            num(slope(&report.fits.norm)),
            num(lo),
            num(hi),
        ]);
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use tubeqer::hypersurface::HypersurfaceSpec;
    use tubeqer::qer::QerFits;

    #[test]
    fn empty_report_is_header_only() {
        let rep = QERReport {
            surface: HypersurfaceSpec::vertical(2, &[1, 0], 0.0).unwrap(),
            rows: Vec::new(),
            fits: QerFits { gap: None, norm: None, lower_bound_witness: f64::INFINITY, notes: Vec::new() },
        };
        let mut buf = Vec::new();
        qer_table("qer", &rep).write(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s.lines().count(), 1);
        assert!(s.starts_with("h,members,term1_log,term2_log,scaled_lhs,rhs,"));
        assert!(s.ends_with('\n') && !s.contains('\r'));
    }

    #[test]
    fn numbers_round_trip() {
        for v in [0.1, -3.0e-200, 1.0 / 3.0, 12345.678] {
            assert_eq!(num(v).parse::<f64>().unwrap(), v);
        }
    }
}
