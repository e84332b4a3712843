mod alpha;
mod crosscheck;
mod dtn;
mod kernel;
mod obstacle;
mod rigidity;
mod sources;
mod spectral;

use crate::config::{Experiment, ExperimentConfig};
use crate::error::{HarnessError, Result};
use crate::report::Output;
use caputo_core::domain::{assemble, build_domain, CoefficientField, CoefficientSpec, DiscreteOperator, DomainSpec};
use caputo_core::input::{build_schedule, ExcitationSchedule, ScheduleSpec};
use caputo_core::inverse::{add_noise, NoiseSpec};
use caputo_core::spectral::{default_modes, eigensolve_shared, SpectralDecomposition, TimeTrace};
use std::sync::Arc;

pub fn run(config: &ExperimentConfig, out: &mut Output) -> Result<()> {
    match &config.experiment {
        Experiment::KernelValidation(p) => kernel::run(p, out),
        Experiment::SolverCrosscheck(p) => crosscheck::run(config, p, out),
        Experiment::AlphaRecovery(p) => alpha::run(config, p, out),
        Experiment::SpectralRecovery(p) => spectral::run(config, p, out),
        Experiment::SourceRecovery(p) => sources::run(config, p, out),
        Experiment::ObstacleScan(p) => obstacle::run(config, p, out),
        Experiment::DtnCompare(p) => dtn::run(config, p, out),
        Experiment::WindowRigidity(p) => rigidity::run(config, p, out),
    }
}

/// Checks everything that can be checked without running the numerics.
pub fn validate(config: &ExperimentConfig) -> Result<()> {
    let op = operator(&config.domain(), &config.coefficients)?;
    schedule(&config.schedule(), &op)?;
    if let Some(n) = &config.noise {
        if !(n.level >= 0.0 && n.level.is_finite()) {
            return Err(HarnessError::config("noise.level", "must be finite and nonnegative"));
        }
    }
    if config.solver.modes == Some(0) {
        return Err(HarnessError::config("solver.modes", "must be positive"));
    }
    if config.solver.steps == Some(0) {
        return Err(HarnessError::config("solver.steps", "must be positive"));
    }
    if config.output_dir.is_empty() {
        return Err(HarnessError::config("output_dir", "must not be empty"));
    }
    match &config.experiment {
        Experiment::KernelValidation(p) => {
            alphas("experiment.alphas", &p.alphas)?;
            alphas("experiment.bound_alphas", &p.bound_alphas)?;
            if !(p.fit_range.0 > 0.0 && p.fit_range.1 > p.fit_range.0) || p.fit_points < 2 || p.refine_points < 2 {
                return Err(HarnessError::config("experiment.fit_range", "needs 0 < lo < hi and at least two points per grid"));
            }
        }
        Experiment::SolverCrosscheck(p) => {
            alphas("experiment.alphas", &p.alphas)?;
            p.residual_grid.validate("experiment.residual_grid")?;
            if !(p.horizon_factor >= 1.0) {
                return Err(HarnessError::config("experiment.horizon_factor", "the stepper must cover (0, tau2]"));
            }
        }
        Experiment::AlphaRecovery(p) => {
            alphas("experiment.alphas", &p.alphas)?;
            p.times.validate("experiment.times")?;
            for (i, c) in p.hopf_cases.iter().enumerate() {
                if c.cells.is_empty() || c.cells.len() > 2 {
                    return Err(HarnessError::config(format!("experiment.hopf_cases[{i}].cells"), "one or two cell counts"));
                }
            }
        }
        Experiment::SpectralRecovery(p) => {
            alphas("experiment.alpha", &[p.alpha])?;
            p.times.validate("experiment.times")?;
            if !(p.p_range.0 > 0.0 && p.p_range.1 > p.p_range.0) {
                return Err(HarnessError::config("experiment.p_range", "needs 0 < lo < hi"));
            }
        }
        Experiment::SourceRecovery(p) => {
            alphas("experiment.alpha", &[p.alpha])?;
            p.sigma.validate().map_err(|e| HarnessError::config("experiment.sigma", e.to_string()))?;
            if !(p.early_start > 0.0 && p.tau0 > p.early_start && p.end > p.tau0) {
                return Err(HarnessError::config("experiment.tau0", "needs 0 < early_start < tau0 < end"));
            }
            if p.n_modes == 0 || p.u0_modes.len() > p.n_modes || p.f_modes.len() > p.n_modes {
                return Err(HarnessError::config("experiment.n_modes", "must cover the synthetic coefficients"));
            }
        }
        Experiment::ObstacleScan(p) => {
            alphas("experiment.alpha", &[p.alpha])?;
            if config.domain().cells.len() != 2 {
                return Err(HarnessError::config("domain.cells", "obstacle scans need a two-dimensional grid"));
            }
            if p.candidates.n == 0 || !(p.p > 0.0) {
                return Err(HarnessError::config("experiment.candidates.n", "needs at least one candidate and p > 0"));
            }
        }
        Experiment::DtnCompare(p) => {
            alphas("experiment.alpha", &[p.alpha])?;
            if p.p_grid.iter().any(|&v| !(v > 0.0)) {
                return Err(HarnessError::config("experiment.p_grid", "values must be positive"));
            }
        }
        Experiment::WindowRigidity(p) => {
            alphas("experiment.alphas", &p.alphas)?;
            p.sigma.validate().map_err(|e| HarnessError::config("experiment.sigma", e.to_string()))?;
            if !(p.window.1 > p.window.0) || p.samples < 2 {
                return Err(HarnessError::config("experiment.window", "needs an ordered window and at least two samples"));
            }
        }
    }
    Ok(())
}

fn alphas(path: &str, values: &[f64]) -> Result<()> {
    match values.iter().find(|&&a| !(a > 0.0 && a < 2.0)) {
        Some(a) => Err(HarnessError::config(path, format!("order {a} is outside (0, 2)"))),
        None => Ok(()),
    }
}

pub(crate) fn operator(domain: &DomainSpec, coeff: &CoefficientSpec) -> Result<Arc<DiscreteOperator>> {
    let d = build_domain(domain).map_err(|e| HarnessError::config("domain", e.to_string()))?;
    let c = CoefficientField::sample(&d, coeff).map_err(|e| HarnessError::config("coefficients", e.to_string()))?;
    Ok(Arc::new(assemble(&d, &c)?))
}

pub(crate) fn schedule(spec: &ScheduleSpec, op: &DiscreteOperator) -> Result<ExcitationSchedule> {
    build_schedule(spec, &op.domain).map_err(|e| HarnessError::config("schedule", e.to_string()))
}

/// All interior modes in one dimension, the dimension default otherwise.
pub(crate) fn decomposition(config: &ExperimentConfig, op: &Arc<DiscreteOperator>) -> Result<SpectralDecomposition> {
    let n = op.n();
    let m = config.solver.modes.unwrap_or(if op.domain.dim == 1 { n } else { default_modes(op.domain.dim) }).min(n);
    Ok(eigensolve_shared(op.clone(), m)?)
}

/// Applies the configured measurement noise, if any.
pub(crate) fn measured(config: &ExperimentConfig, trace: TimeTrace) -> Result<TimeTrace> {
    match config.noise {
        Some(n) if n.level > 0.0 => Ok(add_noise(&trace, &NoiseSpec { level: n.level, seed: config.seed })?),
        _ => Ok(trace),
    }
}

pub(crate) fn rel_l2(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (ra, rb) in a.iter().zip(b) {
        for (x, y) in ra.iter().zip(rb) {
            num += (x - y) * (x - y);
            den += y * y;
        }
    }
    (num / den).sqrt()
}

/// Stable label for a real parameter in file and key names.
pub(crate) fn tag(v: f64) -> String {
    format!("{v}").replace('.', "p").replace('-', "m")
}

/// Wide trace CSV: `t` then one column per observation node.
pub(crate) fn trace_csv(trace: &TimeTrace) -> String {
    let mut header = vec!["t".to_string()];
    header.extend(trace.observation_nodes.iter().map(|n| format!("node_{n}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    crate::report::csv(&header, trace.times.iter().zip(&trace.values).map(|(t, v)| [vec![*t], v.clone()].concat()))
}
