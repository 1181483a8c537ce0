use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::config::{ScenarioConfig, Suite};
use crate::CliError;

/// Where a suite is furthest from (or beyond) its threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Location {
    pub quantity: String,
    pub t: f64,
    /// Node position, when the check is pointwise.
    pub y: Option<f64>,
    /// `value − threshold`; positive means violated.
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub t: f64,
    pub diagnostic: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub passed: bool,
    pub metrics: BTreeMap<String, f64>,
    pub worst: Option<Location>,
    pub notes: Vec<String>,
    pub series: Vec<SeriesPoint>,
}

impl SuiteReport {
    pub fn new(suite: Suite) -> Self {
        SuiteReport {
            suite,
            passed: true,
            metrics: BTreeMap::new(),
            worst: None,
            notes: Vec::new(),
            series: Vec::new(),
        }
    }

    pub fn failed(suite: Suite, note: impl Into<String>) -> Self {
        let mut r = SuiteReport::new(suite);
        r.passed = false;
        r.notes.push(note.into());
        r
    }

    pub fn metric(&mut self, name: &str, value: f64) {
        self.metrics.insert(name.to_string(), value);
    }

    pub fn push(&mut self, t: f64, diagnostic: &str, value: f64) {
        self.series.push(SeriesPoint {
            t,
            diagnostic: diagnostic.to_string(),
            value,
        });
    }

    /// Keeps the location with the largest margin.
    pub fn consider(&mut self, loc: Location) {
        if self.worst.as_ref().is_none_or(|w| loc.margin > w.margin) {
            self.worst = Some(loc);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowSummary {
    pub checkpoints: usize,
    pub steps: usize,
    pub dt_min: Option<f64>,
    pub dt_max: Option<f64>,
    pub holonomy: f64,
    pub holonomy_bitwise_constant: bool,
}

/// Wall-clock figures. Kept out of the JSON so that reports of identical
/// runs compare equal byte for byte.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Timing {
    pub flow_seconds: f64,
    pub total_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub config: ScenarioConfig,
    pub seed: u64,
    pub tolerance_scale: f64,
    pub passed: bool,
    pub flow: Option<FlowSummary>,
    pub suites: Vec<SuiteReport>,
    pub files: Vec<String>,
    #[serde(skip)]
    pub timing: Timing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
    Human,
}

impl FromStr for Format {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            "human" => Ok(Format::Human),
            other => Err(CliError::Usage(format!(
                "unknown format `{other}` (expected json, csv or human)"
            ))),
        }
    }
}

fn num(x: f64) -> String {
    format!("{x:e}")
}

/// Short form for the table: plain notation near unit scale.
fn short(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || (1e-3..1e6).contains(&a) {
        format!("{}", (x * 1e6).round() / 1e6)
    } else {
        format!("{x:.6e}")
    }
}

pub fn emit_report(report: &RunReport, format: Format) -> Vec<u8> {
    match format {
        Format::Json => {
            let mut out = serde_json::to_vec_pretty(report).expect("reports always serialize");
            out.push(b'\n');
            out
        }
        Format::Csv => {
            let mut out = String::from("suite,t,diagnostic,value\n");
            for s in &report.suites {
                for (k, v) in &s.metrics {
                    let _ = writeln!(out, "{},,{},{}", s.suite, k, num(*v));
                }
                for p in &s.series {
                    let _ = writeln!(out, "{},{},{},{}", s.suite, num(p.t), p.diagnostic, num(p.value));
                }
            }
            out.into_bytes()
        }
        Format::Human => human(report).into_bytes(),
    }
}

fn human(report: &RunReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "scenario {}  ({})", report.config.name, if report.passed { "PASS" } else { "FAIL" });
    if let Some(f) = &report.flow {
        let _ = writeln!(
            out,
            "flow: {} checkpoints, {} steps, dt in [{}, {}], holonomy {} ({})",
            f.checkpoints,
            f.steps,
            f.dt_min.map(short).unwrap_or_else(|| "-".into()),
            f.dt_max.map(short).unwrap_or_else(|| "-".into()),
            f.holonomy,
            if f.holonomy_bitwise_constant { "constant" } else { "DRIFTED" },
        );
    }
    let _ = writeln!(
        out,
        "wall clock: flow {:.3} s, total {:.3} s",
        report.timing.flow_seconds, report.timing.total_seconds
    );
    let _ = writeln!(out, "{:<16} {:<6} {:<24} {:>12} {:>12} {:>12}", "suite", "status", "worst", "t", "y", "margin");
    for s in &report.suites {
        let (q, t, y, m) = match &s.worst {
            Some(w) => (
                w.quantity.as_str(),
                short(w.t),
                w.y.map(short).unwrap_or_else(|| "-".into()),
                short(w.margin),
            ),
            None => ("-", "-".into(), "-".into(), "-".into()),
        };
        let _ = writeln!(
            out,
            "{:<16} {:<6} {:<24} {:>12} {:>12} {:>12}",
            s.suite.name(),
            if s.passed { "pass" } else { "FAIL" },
            q,
            t,
            y,
            m
        );
        for (k, v) in &s.metrics {
            let _ = writeln!(out, "    {k:<28} {}", short(*v));
        }
        for n in &s.notes {
            let _ = writeln!(out, "    note: {n}");
        }
    }
    out
}
