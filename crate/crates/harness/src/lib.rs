//! Config-driven experiments over `caputo-core`.
//!
//! Each run reads an [`ExperimentConfig`], writes CSV artifacts, a gnuplot
//! script and `report.json` into its output directory, and records every
//! asserted property as a [`report::Check`]. A report embeds its config, so
//! [`replay`] can rerun it and compare the key numbers.

pub mod config;
pub mod error;
mod experiments;
pub mod report;

pub use config::ExperimentConfig;
pub use error::{HarnessError, Result};
pub use report::Report;

use report::{Output, REPORT_FILE};
use std::path::{Path, PathBuf};

/// Environment variable naming the directory that relative `output_dir`s resolve against.
pub const OUTPUT_ROOT_VAR: &str = "CAPUTO_LAB_OUTPUT";

pub fn output_root() -> PathBuf {
    std::env::var_os(OUTPUT_ROOT_VAR).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("."))
}

/// Where a config writes, given an output root.
pub fn output_dir(config: &ExperimentConfig, root: &Path) -> PathBuf {
    let dir = Path::new(&config.output_dir);
    if dir.is_absolute() {
        dir.to_path_buf()
    } else {
        root.join(dir)
    }
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io { path: path.display().to_string(), source })?;
    ExperimentConfig::from_json(&text)
}

pub fn validate(config: &ExperimentConfig) -> Result<()> {
    experiments::validate(config)
}

/// Validates and runs into the directory named by the config under [`output_root`].
pub fn run(config: &ExperimentConfig) -> Result<Report> {
    run_in(config, &output_dir(config, &output_root()))
}

/// Validates and runs, writing everything into `dir`.
pub fn run_in(config: &ExperimentConfig, dir: &Path) -> Result<Report> {
    validate(config)?;
    let mut out = Output::default();
    experiments::run(config, &mut out)?;
    out.write(dir, config)
}

/// One key number or check that moved between a report and its rerun.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayDiff {
    pub name: String,
    pub recorded: Option<f64>,
    pub replayed: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ReplayOutcome {
    pub report: Report,
    pub diffs: Vec<ReplayDiff>,
}

impl ReplayOutcome {
    pub fn agrees(&self) -> bool {
        self.diffs.is_empty()
    }
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    a == b || (a - b).abs() <= tol * a.abs().max(b.abs())
}

/// Compares two reports: key numbers within the recorded relative tolerance,
/// check verdicts exactly.
pub fn compare(recorded: &Report, replayed: &Report) -> Vec<ReplayDiff> {
    let tol = recorded.replay_tolerance;
    let mut diffs = Vec::new();
    let names = recorded.key_numbers.keys().chain(replayed.key_numbers.keys().filter(|k| !recorded.key_numbers.contains_key(*k)));
    for name in names {
        let a = recorded.key_numbers.get(name).copied();
        let b = replayed.key_numbers.get(name).copied();
        let same = matches!((a, b), (Some(x), Some(y)) if close(x, y, tol));
        if !same {
            diffs.push(ReplayDiff { name: name.clone(), recorded: a, replayed: b });
        }
    }
    let verdict = |c: &report::Check| if c.passed { 1.0 } else { 0.0 };
    for c in &recorded.checks {
        let other = replayed.checks.iter().find(|d| d.name == c.name);
        if other.map(verdict) != Some(verdict(c)) {
            diffs.push(ReplayDiff { name: format!("check {}", c.name), recorded: Some(verdict(c)), replayed: other.map(verdict) });
        }
    }
    diffs
}

/// Reruns the config embedded in a report into `<report dir>/replay` and compares.
pub fn replay(report_path: &Path) -> Result<ReplayOutcome> {
    let recorded = Report::load(report_path)?;
    let dir = report_path.parent().unwrap_or(Path::new(".")).join("replay");
    let report = run_in(&recorded.config, &dir)?;
    let diffs = compare(&recorded, &report);
    Ok(ReplayOutcome { report, diffs })
}

/// Path of the report a run into `dir` writes.
pub fn report_path(dir: &Path) -> PathBuf {
    dir.join(REPORT_FILE)
}
