//! Suite results, JSON/CSV output and the console summary.

use std::io::Write;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;

/// How a measured value is judged.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Criterion {
    /// `value <= tolerance`.
    AtMost { tolerance: f64 },
    /// `|value − target| <= tolerance`.
    Near { target: f64, tolerance: f64 },
    /// Reported only.
    Info,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub criterion: Criterion,
    pub pass: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, tolerance: f64) -> Check {
        Check {
            name: name.into(),
            value,
            criterion: Criterion::AtMost { tolerance },
            pass: value <= tolerance,
        }
    }

    pub fn near(name: impl Into<String>, value: f64, target: f64, tolerance: f64) -> Check {
        Check {
            name: name.into(),
            value,
            criterion: Criterion::Near { target, tolerance },
            pass: (value - target).abs() <= tolerance,
        }
    }

    pub fn info(name: impl Into<String>, value: f64) -> Check {
        Check {
            name: name.into(),
            value,
            criterion: Criterion::Info,
            pass: true,
        }
    }
}

/// Residual statistics on one grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub n: usize,
    pub max_abs: f64,
    pub l2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub name: String,
    pub checks: Vec<Check>,
    pub rows: Vec<GridRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slope: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub errors: Vec<String>,
    pub pass: bool,
    #[serde(skip)]
    pub wall_time: Duration,
}

impl SuiteReport {
    pub fn new(name: &str) -> SuiteReport {
        SuiteReport {
            name: name.to_string(),
            checks: Vec::new(),
            rows: Vec::new(),
            slope: None,
            errors: Vec::new(),
            pass: true,
            wall_time: Duration::ZERO,
        }
    }

    pub fn push(&mut self, check: Check) {
        self.pass &= check.pass;
        self.checks.push(check);
    }

    /// Record an error that prevented part of the suite from running.
    pub fn fail(&mut self, name: &str, err: impl std::fmt::Display) {
        self.pass = false;
        self.errors.push(format!("{name}: {err}"));
    }

    /// Single summary row from the thresholded checks when the suite has no grid study.
    pub fn summarize(&mut self, n: usize) {
        if !self.rows.is_empty() {
            return;
        }
        let values: Vec<f64> = self
            .checks
            .iter()
            .filter(|c| matches!(c.criterion, Criterion::AtMost { .. }))
            .map(|c| c.value)
            .collect();
        let max_abs = values.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        let l2 = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        self.rows.push(GridRow { n, max_abs, l2 });
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub config: ScenarioConfig,
    pub suites: Vec<SuiteReport>,
    pub pass: bool,
}

impl Report {
    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("report serializes");
        text.push('\n');
        text
    }

    /// One row per grid size per suite: `suite, N, max_abs, l2, slope, pass`.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["suite", "N", "max_abs", "l2", "slope", "pass"])?;
        for suite in &self.suites {
            for row in &suite.rows {
                w.write_record([
                    suite.name.clone(),
                    row.n.to_string(),
                    format!("{:e}", row.max_abs),
                    format!("{:e}", row.l2),
                    suite.slope.map(|s| format!("{s:.4}")).unwrap_or_default(),
                    suite.pass.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn print_console<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for suite in &self.suites {
            writeln!(
                out,
                "[{}] {} ({:.2?})",
                if suite.pass { "PASS" } else { "FAIL" },
                suite.name,
                suite.wall_time
            )?;
            for c in &suite.checks {
                let verdict = match (c.criterion, c.pass) {
                    (Criterion::Info, true) => "info",
                    (_, true) => "ok",
                    (_, false) => "FAIL",
                };
                let bound = match c.criterion {
                    Criterion::AtMost { tolerance } => format!("<= {tolerance:e}"),
                    Criterion::Near { target, tolerance } => format!("= {target} ± {tolerance}"),
                    Criterion::Info => String::new(),
                };
                writeln!(out, "    {verdict:>4}  {:<48} {:>12.4e} {bound}", c.name, c.value)?;
            }
            for e in &suite.errors {
                writeln!(out, "    FAIL  {e}")?;
            }
            if let Some(slope) = suite.slope {
                let ns: Vec<String> = suite.rows.iter().map(|r| r.n.to_string()).collect();
                writeln!(out, "          slope {slope:.3} over N = {}", ns.join(", "))?;
            }
        }
        writeln!(out, "{}", if self.pass { "all suites passed" } else { "some suites failed" })
    }
}

/// Least-squares slope of `−log err` against `log N`.
pub fn convergence_slope(ns: &[usize], errs: &[f64]) -> f64 {
    let xs: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = errs.iter().map(|e| -e.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}
