use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

pub const REPORT_FILE: &str = "report.json";
pub const PLOT_FILE: &str = "plot.gp";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    Lt,
    Le,
    Gt,
    Ge,
    /// Boolean property; `value` is 1 when it holds.
    Holds,
}

impl Relation {
    fn eval(self, v: f64, threshold: f64) -> bool {
        match self {
            Relation::Lt => v < threshold,
            Relation::Le => v <= threshold,
            Relation::Gt => v > threshold,
            Relation::Ge => v >= threshold,
            Relation::Holds => v == 1.0,
        }
    }
}

/// One asserted property. `value` is absent when the computation produced a
/// non-finite number, which always fails.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: Option<f64>,
    pub relation: Relation,
    pub threshold: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub experiment: String,
    pub versions: BTreeMap<String, String>,
    pub config: ExperimentConfig,
    pub passed: bool,
    pub checks: Vec<Check>,
    /// Scalars compared on replay.
    pub key_numbers: BTreeMap<String, f64>,
    /// Relative tolerance for key numbers on replay.
    pub replay_tolerance: f64,
    pub results: serde_json::Value,
    pub artifacts: Vec<String>,
    pub notes: Vec<String>,
}

impl Report {
    pub fn load(path: &Path) -> Result<Report> {
        let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io { path: path.display().to_string(), source })?;
        serde_json::from_str(&text).map_err(|e| HarnessError::Report(format!("{}: {e}", path.display())))
    }

    pub fn failed_checks(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

pub fn versions() -> BTreeMap<String, String> {
    BTreeMap::from([
        ("caputo-core".to_string(), caputo_core::VERSION.to_string()),
        ("caputo-harness".to_string(), env!("CARGO_PKG_VERSION").to_string()),
    ])
}

/// A line plot of CSV columns (1-based, gnuplot convention).
#[derive(Debug, Clone)]
pub struct Plot {
    pub title: String,
    pub file: String,
    pub x: usize,
    pub ys: Vec<usize>,
    pub logx: bool,
    pub logy: bool,
    /// Plot `abs(y)`, for signed traces on a log axis.
    pub abs: bool,
}

/// Everything an experiment produces before it is written to disk.
#[derive(Debug, Default)]
pub struct Output {
    pub files: Vec<(String, String)>,
    pub checks: Vec<Check>,
    pub key_numbers: BTreeMap<String, f64>,
    pub results: serde_json::Map<String, serde_json::Value>,
    pub notes: Vec<String>,
    pub plots: Vec<Plot>,
}

impl Output {
    pub fn file(&mut self, name: impl Into<String>, content: String) {
        self.files.push((name.into(), content));
    }

    pub fn check(&mut self, name: impl Into<String>, value: f64, relation: Relation, threshold: f64) -> bool {
        let finite = value.is_finite();
        let passed = finite && relation.eval(value, threshold);
        self.checks.push(Check { name: name.into(), value: finite.then_some(value), relation, threshold, passed });
        passed
    }

    pub fn holds(&mut self, name: impl Into<String>, ok: bool) -> bool {
        self.check(name, if ok { 1.0 } else { 0.0 }, Relation::Holds, 1.0)
    }

    pub fn key(&mut self, name: impl Into<String>, value: f64) {
        let name = name.into();
        if value.is_finite() {
            self.key_numbers.insert(name, value);
        } else {
            self.notes.push(format!("key number {name} is not finite"));
        }
    }

    pub fn result<T: Serialize>(&mut self, name: &str, value: &T) {
        let v = serde_json::to_value(value).unwrap_or_else(|e| serde_json::Value::String(format!("unserializable: {e}")));
        self.results.insert(name.to_string(), v);
    }

    pub fn note(&mut self, note: impl Into<String>) {
        self.notes.push(note.into());
    }

    pub fn plot(&mut self, plot: Plot) {
        self.plots.push(plot);
    }

    fn plot_script(&self, experiment: &str) -> String {
        let mut s = format!("# {experiment}: gnuplot -c {PLOT_FILE} from this directory\n");
        s.push_str("set datafile separator ','\nset key autotitle columnhead\nset terminal pngcairo size 900,600\n");
        for (i, p) in self.plots.iter().enumerate() {
            writeln!(s, "\nset output 'plot_{i}.png'\nset title '{}'", p.title.replace('\'', "")).unwrap();
            s.push_str(if p.logx { "set logscale x\n" } else { "unset logscale x\n" });
            s.push_str(if p.logy { "set logscale y\n" } else { "unset logscale y\n" });
            let series: Vec<String> = p
                .ys
                .iter()
                .map(|&y| {
                    let col = if p.abs { format!("(abs(${y}))") } else { y.to_string() };
                    format!("'{}' using {}:{} with lines", p.file, p.x, col)
                })
                .collect();
            writeln!(s, "plot {}", series.join(", \\\n     ")).unwrap();
        }
        s
    }

    /// Writes the artifacts, the plot script and `report.json` into `dir`.
    pub fn write(self, dir: &Path, config: &ExperimentConfig) -> Result<Report> {
        let io = |path: &Path| {
            let path = path.display().to_string();
            move |source| HarnessError::Io { path, source }
        };
        std::fs::create_dir_all(dir).map_err(io(dir))?;
        let experiment = config.experiment.name().to_string();
        let mut artifacts = Vec::new();
        for (name, content) in &self.files {
            let p = dir.join(name);
            std::fs::write(&p, content).map_err(io(&p))?;
            artifacts.push(name.clone());
        }
        let p = dir.join(PLOT_FILE);
        std::fs::write(&p, self.plot_script(&experiment)).map_err(io(&p))?;
        artifacts.push(PLOT_FILE.to_string());
        let report = Report {
            experiment,
            versions: versions(),
            config: config.clone(),
            passed: self.checks.iter().all(|c| c.passed),
            checks: self.checks,
            key_numbers: self.key_numbers,
            replay_tolerance: 1e-9,
            results: serde_json::Value::Object(self.results),
            artifacts,
            notes: self.notes,
        };
        let p = dir.join(REPORT_FILE);
        let text = serde_json::to_string_pretty(&report).map_err(|e| HarnessError::Report(e.to_string()))?;
        std::fs::write(&p, text + "\n").map_err(io(&p))?;
        Ok(report)
    }
}

/// CSV with a header and `{:e}` numbers (shortest round-trip form).
pub fn csv(header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nonfinite_checks_fail() {
        let mut o = Output::default();
        assert!(!o.check("nan", f64::NAN, Relation::Lt, 1.0));
        assert!(o.check("ok", 0.5, Relation::Lt, 1.0));
        assert_eq!(o.checks[0].value, None);
    }

    #[test]
    fn csv_roundtrips_numbers() {
        let s = csv(&["a", "b"], [vec![0.1, -2.5e-300]]);
        let row: Vec<f64> = s.lines().nth(1).unwrap().split(',').map(|c| c.parse().unwrap()).collect();
        assert_eq!(row, vec![0.1, -2.5e-300]);
    }
}
