//! Check records and their serialization. CSV output is byte-stable: fixed
//! column order, `{:.16e}` numbers, LF endings, rows sorted by check then mode.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::config::{CheckId, Format};
use crate::error::Result;
use crate::linalg::C64;

pub const CSV_HEADER: &str = "scenario,check,mode,param1,param2,value_re,value_im,residual";

/// Mode label of a record: a Fourier index, the whole scenario, or an observed order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeKey {
    Mode(i32),
    All,
    Order,
}

impl std::fmt::Display for ModeKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ModeKey::Mode(m) => write!(f, "{m}"),
            ModeKey::All => f.write_str("all"),
            ModeKey::Order => f.write_str("order"),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Record {
    pub check: CheckId,
    pub mode: ModeKey,
    pub param1: f64,
    pub param2: f64,
    pub value_re: f64,
    pub value_im: f64,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Record {
    /// `pass = residual <= tolerance`, with NaN failing.
    pub fn new(check: CheckId, mode: ModeKey, params: (f64, f64), value: C64, residual: f64, tolerance: f64) -> Self {
        Self {
            check,
            mode,
            param1: params.0,
            param2: params.1,
            value_re: value.re,
            value_im: value.im,
            residual,
            tolerance,
            pass: residual <= tolerance,
        }
    }

    /// Observed order between two levels; `residual` is the shortfall below `target`.
    /// Both residuals under `floor` count as converged.
    pub fn order(check: CheckId, levels: (f64, f64), spacing: (f64, f64), res: (f64, f64), target: f64, floor: f64) -> Self {
        let order = (res.0 / res.1).ln() / (spacing.0 / spacing.1).ln();
        let shortfall = if res.0.max(res.1) < floor { 0.0 } else { (target - order).max(0.0) };
        let shortfall = if shortfall.is_nan() { f64::INFINITY } else { shortfall };
        Record::new(check, ModeKey::Order, levels, C64::from(order), shortfall, 0.0)
    }
}

pub fn sort_records(records: &mut [Record]) {
    records.sort_by(|a, b| {
        a.check
            .cmp(&b.check)
            .then(a.mode.cmp(&b.mode))
            .then(a.param1.total_cmp(&b.param1))
            .then(a.param2.total_cmp(&b.param2))
    });
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn to_csv(scenario: &str, records: &[Record]) -> String {
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{scenario},{},{},{},{},{},{},{}",
            r.check.name(),
            r.mode,
            num(r.param1),
            num(r.param2),
            num(r.value_re),
            num(r.value_im),
            num(r.residual)
        );
    }
    out
}

/// A sampled field value for plotting: `param1`, `param2` are its two coordinates.
#[derive(Debug, Clone, Copy)]
pub struct Sample {
    pub mode: i32,
    pub param1: f64,
    pub param2: f64,
    pub value: C64,
}

/// Samples in the record schema under the label `name`, residual column zero.
pub fn samples_csv(scenario: &str, name: &str, samples: &[Sample]) -> String {
    let mut out = String::with_capacity(64 * (samples.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for p in samples {
        let _ = writeln!(
            out,
            "{scenario},{name},{},{},{},{},{},{}",
            p.mode,
            num(p.param1),
            num(p.param2),
            num(p.value.re),
            num(p.value.im),
            num(0.0)
        );
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckSummary {
    pub check: CheckId,
    pub records: usize,
    pub failures: usize,
    pub worst_residual: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub scenario: String,
    pub config_hash: String,
    pub checks: Vec<CheckSummary>,
    pub records: Vec<Record>,
    pub pass: bool,
    pub seconds: f64,
}

impl RunReport {
    pub fn failures(&self) -> impl Iterator<Item = &Record> {
        self.records.iter().filter(|r| !r.pass)
    }

    /// `report.json` plus one file per check in the requested format.
    pub fn write(&self, dir: &Path, format: Format) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for summary in &self.checks {
            let rows: Vec<Record> = self.records.iter().filter(|r| r.check == summary.check).cloned().collect();
            let name = summary.check.name();
            match format {
                Format::Csv => std::fs::write(dir.join(format!("{name}.csv")), to_csv(&self.scenario, &rows))?,
                Format::Json => std::fs::write(dir.join(format!("{name}.json")), json(&rows))?,
            }
        }
        std::fs::write(dir.join("report.json"), json(self))?;
        Ok(())
    }
}

pub fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("records serialize");
    s.push('\n');
    s
}
