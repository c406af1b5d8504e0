//! Residual checks evaluated at seeded sample points, and the reports they
//! are collected into.

use serde::Serialize;

use crate::calculus::{Chart, DomainError, Evaluator};

/// Every tolerance and sampling knob in one place; echoed into each report.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct Config {
    pub samples: usize,
    pub tol: f64,
    /// Identity and change-law checks.
    pub law_tol: f64,
    /// Checks that hold up to rounding only (frames, transitions).
    pub strict_tol: f64,
    /// Spectra compared across screens.
    pub eig_tol: f64,
    /// Overrides the chart seed when set.
    pub seed: Option<u64>,
    pub fd_fallback: bool,
    pub node_budget: usize,
    pub fd_step: f64,
    pub fd_tol: f64,
    pub rank_tol: f64,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            samples: 20,
            tol: 1e-7,
            law_tol: 1e-8,
            strict_tol: 1e-9,
            eig_tol: 1e-7,
            seed: None,
            fd_fallback: true,
            node_budget: 2_000_000,
            fd_step: 1e-5,
            fd_tol: 1e-5,
            rank_tol: 1e-9,
        }
    }
}

impl Config {
    pub fn points(&self, chart: &Chart) -> Vec<Vec<f64>> {
        chart.sample_points_seeded(self.samples, self.seed.unwrap_or(chart.seed()))
    }
}

#[derive(Clone, Copy, Debug, Serialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    /// Not applicable to this input; not a failure.
    Skipped,
    /// Reported quantity with no pass/fail claim.
    Info,
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct CheckRecord {
    pub name: String,
    /// The mathematical statement being checked, or "plumbing".
    pub anchor: String,
    pub samples: usize,
    pub max_residual: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub status: Status,
    pub notes: Vec<String>,
}

impl CheckRecord {
    pub fn new(name: impl Into<String>, anchor: impl Into<String>, tolerance: f64) -> Self {
        CheckRecord {
            name: name.into(),
            anchor: anchor.into(),
            samples: 0,
            max_residual: 0.0,
            tolerance,
            pass: false,
            status: Status::Fail,
            notes: Vec::new(),
        }
    }

    pub fn with_result(mut self, samples: usize, max_residual: f64) -> Self {
        self.samples = samples;
        // normalizes −0.0
        self.max_residual = max_residual + 0.0;
        let ok = samples > 0 && max_residual.is_finite() && max_residual < self.tolerance;
        self.pass = ok;
        self.status = if ok { Status::Pass } else { Status::Fail };
        self
    }

    pub fn skipped(name: impl Into<String>, anchor: impl Into<String>, note: impl Into<String>) -> Self {
        let mut r = CheckRecord::new(name, anchor, 0.0);
        r.pass = true;
        r.status = Status::Skipped;
        r.notes.push(note.into());
        r
    }

    pub fn failed(name: impl Into<String>, anchor: impl Into<String>, note: impl Into<String>) -> Self {
        let mut r = CheckRecord::new(name, anchor, 0.0);
        r.max_residual = f64::INFINITY;
        r.notes.push(note.into());
        r
    }

    /// Report a quantity without judging it.
    pub fn info(mut self) -> Self {
        self.pass = true;
        self.status = Status::Info;
        self
    }

    /// Mark as an expected failure: passes when the residual is at least the tolerance.
    pub fn expect_failure(mut self) -> Self {
        let ok = self.samples > 0 && !(self.max_residual < self.tolerance);
        self.pass = ok;
        self.status = if ok { Status::Pass } else { Status::Fail };
        self
    }

    pub fn note(mut self, s: impl Into<String>) -> Self {
        self.notes.push(s.into());
        self
    }

    pub fn failing(&self) -> bool {
        self.status == Status::Fail
    }

    pub fn text_line(&self) -> String {
        let status = match self.status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skipped => "SKIP",
            Status::Info => "INFO",
        };
        let mut s = format!(
            "[{status}] {} ({}) samples={} max_residual={:.3e} tol={:.1e}",
            self.name, self.anchor, self.samples, self.max_residual, self.tolerance
        );
        for n in &self.notes {
            s.push_str("\n       ");
            s.push_str(n);
        }
        s
    }
}

/// Evaluate `residual` at every sample point and keep the maximum.
/// A domain violation aborts that sample only and is noted on the record.
pub fn sample_check(
    name: &str,
    anchor: &str,
    chart: &Chart,
    cfg: &Config,
    tol: f64,
    mut residual: impl FnMut(&mut Evaluator, &[f64]) -> Result<f64, DomainError>,
) -> CheckRecord {
    let mut used = 0;
    let mut worst: f64 = 0.0;
    let mut violations = Vec::new();
    for (k, p) in cfg.points(chart).iter().enumerate() {
        let mut ev = chart.evaluator(p);
        match residual(&mut ev, p) {
            Ok(r) => {
                used += 1;
                if r.is_nan() {
                    worst = f64::NAN;
                } else if !worst.is_nan() {
                    worst = worst.max(r);
                }
            }
            Err(e) => violations.push(format!("sample {k}: {e}")),
        }
    }
    let mut rec = CheckRecord::new(name, anchor, tol).with_result(used, worst);
    if !violations.is_empty() {
        rec.notes.push(format!(
            "{} sample(s) aborted by domain violations",
            violations.len()
        ));
        rec.notes.extend(violations.into_iter().take(3));
    }
    rec
}

/// Largest absolute entry; NaN propagates.
pub fn max_abs(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut m: f64 = 0.0;
    for v in values {
        if v.is_nan() {
            return f64::NAN;
        }
        m = m.max(v.abs());
    }
    m
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub geometry: Option<String>,
    pub config: Config,
    pub records: Vec<CheckRecord>,
    /// Command-specific payload (for example a normalization result).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub result: Option<serde_json::Value>,
}

impl Report {
    pub fn new(command: &str, geometry: Option<&str>, config: &Config) -> Self {
        Report {
            tool: "lightlike".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            geometry: geometry.map(str::to_string),
            config: config.clone(),
            records: Vec::new(),
            result: None,
        }
    }

    pub fn push(&mut self, r: CheckRecord) {
        self.records.push(r);
    }

    pub fn extend(&mut self, rs: impl IntoIterator<Item = CheckRecord>) {
        self.records.extend(rs);
    }

    pub fn all_pass(&self) -> bool {
        self.records.iter().all(|r| !r.failing())
    }

    pub fn failures(&self) -> Vec<&CheckRecord> {
        self.records.iter().filter(|r| r.failing()).collect()
    }

    pub fn find(&self, name: &str) -> Option<&CheckRecord> {
        self.records.iter().find(|r| r.name == name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization")
    }

    pub fn to_text(&self) -> String {
        let mut s = format!(
            "{} {} :: {}{}\nconfig: samples={} tol={:e} seed={} fd_fallback={} node_budget={}\n",
            self.tool,
            self.version,
            self.command,
            self.geometry
                .as_deref()
                .map(|g| format!(" [{g}]"))
                .unwrap_or_default(),
            self.config.samples,
            self.config.tol,
            self.config
                .seed
                .map(|s| s.to_string())
                .unwrap_or_else(|| "chart".into()),
            self.config.fd_fallback,
            self.config.node_budget,
        );
        for r in &self.records {
            s.push_str(&r.text_line());
            s.push('\n');
        }
        let fails = self.failures().len();
        s.push_str(&format!(
            "{} record(s), {} failing\n",
            self.records.len(),
            fails
        ));
        s
    }
}
