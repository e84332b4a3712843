//! Experiment configuration. One JSON document per run:
//!
//! ```json
//! {
//!   "experiment": { "kind": "alpha-recovery", "alphas": [0.5] },
//!   "domain": { "cells": [256], "gamma_in": ["left"], "gamma_out": ["right"] },
//!   "schedule": { "tau1": 2.0, "tau2": 4.0, "components": 1 },
//!   "output_dir": "alpha",
//!   "seed": 7
//! }
//! ```
//!
//! `domain`, `coefficients`, `schedule` and `solver` may be omitted; each
//! experiment supplies its own defaults.

use crate::error::HarnessError;
use caputo_core::domain::{CoefficientSpec, DomainSpec, FieldSpec, ObstacleSpec, Side};
use caputo_core::input::{ScheduleSpec, SourceProfile};
use caputo_core::inverse::PoleFitOptions;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<DomainSpec>,
    #[serde(default)]
    pub coefficients: CoefficientSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<ScheduleSpec>,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseLevel>,
    pub output_dir: String,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    /// Retained eigenpairs; all interior modes when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modes: Option<usize>,
    /// L1 steps for experiments that run the stepper.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
}

/// Additive Gaussian noise on measured traces, `σ = level · peak`, seeded by
/// the config seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseLevel {
    pub level: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Experiment {
    KernelValidation(KernelValidation),
    SolverCrosscheck(SolverCrosscheck),
    AlphaRecovery(AlphaRecovery),
    SpectralRecovery(SpectralRecovery),
    SourceRecovery(SourceRecovery),
    ObstacleScan(ObstacleScanParams),
    DtnCompare(DtnCompare),
    WindowRigidity(WindowRigidity),
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::KernelValidation(_) => "kernel-validation",
            Experiment::SolverCrosscheck(_) => "solver-crosscheck",
            Experiment::AlphaRecovery(_) => "alpha-recovery",
            Experiment::SpectralRecovery(_) => "spectral-recovery",
            Experiment::SourceRecovery(_) => "source-recovery",
            Experiment::ObstacleScan(_) => "obstacle-scan",
            Experiment::DtnCompare(_) => "dtn-compare",
            Experiment::WindowRigidity(_) => "window-rigidity",
        }
    }

    pub fn default_domain(&self) -> DomainSpec {
        match self {
            Experiment::SpectralRecovery(_) => DomainSpec { gamma_out: vec![Side::Left, Side::Right], ..DomainSpec::interval(256) },
            Experiment::ObstacleScan(_) => DomainSpec::square(64, None),
            Experiment::DtnCompare(_) => DomainSpec::square(32, None),
            _ => DomainSpec::interval(256),
        }
    }

    pub fn default_schedule(&self) -> ScheduleSpec {
        match self {
            Experiment::SolverCrosscheck(_) => ScheduleSpec::new(0.1, 0.5, 3),
            Experiment::AlphaRecovery(_) => ScheduleSpec::new(2.0, 4.0, 1),
            Experiment::SpectralRecovery(_) => ScheduleSpec::new(0.01, 0.02, 1),
            Experiment::ObstacleScan(_) => ScheduleSpec::new(0.5, 1.0, 1),
            Experiment::DtnCompare(_) => ScheduleSpec::new(0.5, 1.0, 3),
            _ => ScheduleSpec::new(0.5, 1.0, 1),
        }
    }
}

impl ExperimentConfig {
    pub fn domain(&self) -> DomainSpec {
        self.domain.clone().unwrap_or_else(|| self.experiment.default_domain())
    }

    pub fn schedule(&self) -> ScheduleSpec {
        self.schedule.clone().unwrap_or_else(|| self.experiment.default_schedule())
    }

    /// Parses JSON, reporting the path of the offending field.
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            // the tagged enum buffers its content and loses the inner path
            if path == "experiment" {
                if let Some(inner) = serde_json::from_str::<serde_json::Value>(text).ok().and_then(|v| experiment_error(v.get("experiment")?)) {
                    return inner;
                }
            }
            HarnessError::config(if path == "." { "<root>".into() } else { path }, e.into_inner().to_string())
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

/// Parameter time grid: `uniform` points on `[0, split]` followed by
/// `geometric` points from `split` to `end`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGrid {
    pub split: f64,
    pub uniform: usize,
    pub end: f64,
    pub geometric: usize,
}

impl TimeGrid {
    pub fn times(&self) -> Vec<f64> {
        let mut t: Vec<f64> = (0..=self.uniform).map(|i| self.split * i as f64 / self.uniform as f64).collect();
        let r = self.end / self.split;
        t.extend((1..=self.geometric).map(|i| self.split * r.powf(i as f64 / self.geometric as f64)));
        t
    }

    pub fn validate(&self, path: &str) -> Result<(), HarnessError> {
        if !(self.split > 0.0 && self.end > self.split && self.end.is_finite()) || self.uniform == 0 {
            return Err(HarnessError::config(path, "time grid needs 0 < split < end and uniform > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelValidation {
    pub alphas: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub z: Vec<f64>,
    pub tolerance: f64,
    /// Orders and eigenvalues for the large-time bound `C t^{−1−α} λ^{−2}`.
    pub bound_alphas: Vec<f64>,
    pub bound_lambdas: Vec<f64>,
    /// Fit range of `C` and its sample count.
    pub fit_range: (f64, f64),
    pub fit_points: usize,
    /// Check points per `(α, λ)` on the refined grid.
    pub refine_points: usize,
}

impl Default for KernelValidation {
    fn default() -> Self {
        KernelValidation {
            alphas: vec![0.3, 0.5, 0.8, 1.2, 1.5],
            lambdas: vec![1.0, 10.0, 100.0],
            z: vec![0.1, 1.0, 5.0],
            tolerance: 1e-6,
            bound_alphas: vec![0.3, 0.5, 0.8, 1.5],
            bound_lambdas: vec![1.0, 10.0],
            fit_range: (100.0, 1e4),
            fit_points: 20,
            refine_points: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverCrosscheck {
    pub alphas: Vec<f64>,
    /// Stepper horizon as a multiple of `τ₂`.
    pub horizon_factor: f64,
    pub tolerance: f64,
    pub run_crosscheck: bool,
    /// Resolvent residual of both solutions for the bump input.
    pub residual_p: Vec<f64>,
    pub residual_horizon: f64,
    pub residual_tolerance: f64,
    pub residual_grid: TimeGrid,
    /// Telescoping of partial staircase sums.
    pub telescoping_samples: usize,
    pub telescoping_tolerance: f64,
}

impl Default for SolverCrosscheck {
    fn default() -> Self {
        SolverCrosscheck {
            alphas: vec![0.5, 0.8, 1.0],
            horizon_factor: 2.0,
            tolerance: 0.01,
            run_crosscheck: true,
            residual_p: vec![1.0, 2.0, 4.0],
            residual_horizon: 40.0,
            residual_tolerance: 1e-3,
            residual_grid: TimeGrid { split: 0.4, uniform: 100, end: 40.0, geometric: 75 },
            telescoping_samples: 50,
            telescoping_tolerance: 1e-9,
        }
    }
}

/// One elliptic sign check: grid cells and absorption `q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HopfCase {
    pub cells: Vec<usize>,
    pub q: f64,
    /// Taper of `χ` at the ends of `Γ_in`.
    #[serde(default)]
    pub chi_taper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlphaRecovery {
    pub alphas: Vec<f64>,
    pub times: TimeGrid,
    pub tolerance: f64,
    pub amplitude_tolerance: f64,
    pub hopf_cases: Vec<HopfCase>,
}

impl Default for AlphaRecovery {
    fn default() -> Self {
        AlphaRecovery {
            alphas: vec![0.3, 0.5, 0.8, 1.0, 1.2, 1.5],
            times: TimeGrid { split: 8.0, uniform: 400, end: 800.0, geometric: 400 },
            tolerance: 0.02,
            amplitude_tolerance: 0.1,
            hopf_cases: vec![
                HopfCase { cells: vec![256], q: 0.0, chi_taper: 0.0 },
                HopfCase { cells: vec![256], q: 5.0, chi_taper: 0.0 },
                HopfCase { cells: vec![64, 64], q: 0.0, chi_taper: 0.0 },
                HopfCase { cells: vec![64, 64], q: 5.0, chi_taper: 0.0 },
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectralRecovery {
    pub alpha: f64,
    pub times: TimeGrid,
    pub p_range: (f64, f64),
    pub p_points: usize,
    pub fit: PoleFitOptions,
    pub tolerance: f64,
    pub cross_ratio_tolerance: f64,
}

impl Default for SpectralRecovery {
    fn default() -> Self {
        SpectralRecovery {
            alpha: 0.8,
            times: TimeGrid { split: 0.03, uniform: 2000, end: 300.0, geometric: 1500 },
            p_range: (0.5, 752.0),
            p_points: 40,
            fit: PoleFitOptions::default(),
            tolerance: 0.01,
            cross_ratio_tolerance: 0.02,
        }
    }
}

/// Which family is unknown.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitKind {
    TimeSplit,
    KnownSource,
    KnownInitial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SourceRecovery {
    pub alpha: f64,
    /// `⟨u₀, φ_k⟩_ρ` of the synthetic truth.
    pub u0_modes: Vec<f64>,
    /// `∫ f φ_k` of the synthetic truth.
    pub f_modes: Vec<f64>,
    pub sigma: SourceProfile,
    pub tau0: f64,
    pub n_modes: usize,
    pub splits: Vec<SplitKind>,
    /// Early samples: geometric from `early_start` to `tau0`.
    pub early_start: f64,
    pub early_points: usize,
    /// Late samples: uniform over the source support, then uniform to `end`.
    pub support_points: usize,
    pub end: f64,
    pub tail_points: usize,
    pub split_tolerance: f64,
    pub single_tolerance: f64,
}

impl Default for SourceRecovery {
    fn default() -> Self {
        SourceRecovery {
            alpha: 0.5,
            u0_modes: vec![1.0, -0.6, 0.4, 0.3, -0.2],
            f_modes: vec![20.0, 10.0, -8.0, 5.0, 4.0],
            sigma: SourceProfile::Bump { lo: 0.5, hi: 1.0 },
            tau0: 0.5,
            n_modes: 5,
            splits: vec![SplitKind::TimeSplit, SplitKind::KnownSource, SplitKind::KnownInitial],
            early_start: 1e-7,
            early_points: 301,
            support_points: 300,
            end: 5.0,
            tail_points: 100,
            split_tolerance: 0.05,
            single_tolerance: 0.03,
        }
    }
}

/// Square candidates centered on an `n × n` grid over `[lo, hi]²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CandidateGrid {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
    pub side: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObstacleScanParams {
    pub alpha: f64,
    pub p: f64,
    pub truth: ObstacleSpec,
    pub candidates: CandidateGrid,
    pub include_empty: bool,
    pub floor: f64,
    /// Disjoint candidates must exceed `separation ×` the truth objective.
    pub separation: f64,
}

impl Default for ObstacleScanParams {
    fn default() -> Self {
        ObstacleScanParams {
            alpha: 0.5,
            p: 1.0,
            truth: ObstacleSpec::square([0.5, 0.5], 0.2),
            candidates: CandidateGrid { lo: 0.3, hi: 0.7, n: 5, side: 0.2 },
            include_empty: true,
            floor: 1e-10,
            separation: 1e3,
        }
    }
}

/// Expected outcome of one DtN comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DtnExpectation {
    /// Discrepancy at most `equal_tolerance` at every `p`.
    Equal,
    /// Discrepancy above `distinct_threshold` at the first `p`.
    Distinct,
    /// Recorded only.
    Record,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DtnVariant {
    pub name: String,
    pub coefficients: CoefficientSpec,
    pub expect: DtnExpectation,
    /// Defaults to the experiment grid, or to multiples of `p₁` when drift is present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_grid: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DtnCompare {
    pub alpha: f64,
    pub p_grid: Vec<f64>,
    /// Multiples of `p₁` used for drift variants without their own grid.
    pub drift_multiples: Vec<f64>,
    pub variants: Vec<DtnVariant>,
    pub equal_tolerance: f64,
    pub distinct_threshold: f64,
}

impl Default for DtnCompare {
    fn default() -> Self {
        let base = CoefficientSpec::default();
        DtnCompare {
            alpha: 0.5,
            p_grid: vec![1.0, 2.0, 4.0, 10.0],
            drift_multiples: vec![1.5, 4.0, 10.0, 40.0, 100.0],
            variants: vec![
                DtnVariant { name: "copy".into(), coefficients: base.clone(), expect: DtnExpectation::Equal, p_grid: None },
                DtnVariant {
                    name: "density-bump".into(),
                    coefficients: CoefficientSpec {
                        rho: FieldSpec::Bump { base: 1.0, amplitude: 0.5, center: vec![0.5, 0.5], radius: 0.2 },
                        ..base.clone()
                    },
                    expect: DtnExpectation::Distinct,
                    p_grid: None,
                },
                DtnVariant {
                    name: "gradient-drift".into(),
                    coefficients: CoefficientSpec { drift: caputo_core::domain::DriftSpec::GradientSine { amplitude: 0.5 }, ..base },
                    expect: DtnExpectation::Record,
                    p_grid: None,
                },
            ],
            equal_tolerance: 1e-12,
            distinct_threshold: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowRigidity {
    pub alphas: Vec<f64>,
    pub sigma: SourceProfile,
    pub f_a: Vec<f64>,
    pub f_b: Vec<f64>,
    pub window: (f64, f64),
    pub samples: usize,
    pub tol_rel: f64,
}

impl Default for WindowRigidity {
    fn default() -> Self {
        WindowRigidity {
            alphas: vec![0.5, 1.0],
            sigma: SourceProfile::Bump { lo: 0.05, hi: 0.45 },
            f_a: vec![1.0, 0.5],
            f_b: vec![0.6, 0.5, 0.4],
            window: (2.0, 3.0),
            samples: 3000,
            tol_rel: 1e-6,
        }
    }
}

fn probe<T: serde::de::DeserializeOwned>(v: serde_json::Value) -> Option<HarnessError> {
    serde_path_to_error::deserialize::<_, T>(v)
        .err()
        .map(|e| HarnessError::config(format!("experiment.{}", e.path()).trim_end_matches('.'), e.into_inner().to_string()))
}

/// Re-reads the experiment parameters on their own to recover the field path.
fn experiment_error(v: &serde_json::Value) -> Option<HarnessError> {
    let mut fields = v.as_object()?.clone();
    let kind = fields.remove("kind")?;
    let v = serde_json::Value::Object(fields);
    match kind.as_str()? {
        "kernel-validation" => probe::<KernelValidation>(v),
        "solver-crosscheck" => probe::<SolverCrosscheck>(v),
        "alpha-recovery" => probe::<AlphaRecovery>(v),
        "spectral-recovery" => probe::<SpectralRecovery>(v),
        "source-recovery" => probe::<SourceRecovery>(v),
        "obstacle-scan" => probe::<ObstacleScanParams>(v),
        "dtn-compare" => probe::<DtnCompare>(v),
        "window-rigidity" => probe::<WindowRigidity>(v),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_takes_defaults() {
        let c = ExperimentConfig::from_json(r#"{"experiment": {"kind": "alpha-recovery"}, "output_dir": "a"}"#).unwrap();
        assert_eq!(c.schedule().tau2, 4.0);
        assert_eq!(c.domain().cells, vec![256]);
        match &c.experiment {
            Experiment::AlphaRecovery(p) => assert_eq!(p.alphas.len(), 6),
            _ => panic!(),
        }
    }

    #[test]
    fn roundtrip() {
        let c = ExperimentConfig::from_json(r#"{"experiment": {"kind": "dtn-compare"}, "output_dir": "d", "seed": 3}"#).unwrap();
        assert_eq!(ExperimentConfig::from_json(&c.to_json()).unwrap(), c);
    }

    #[test]
    fn errors_name_the_field() {
        let e = ExperimentConfig::from_json(r#"{"experiment": {"kind": "window-rigidity", "window": [1.0]}, "output_dir": "w"}"#).unwrap_err();
        assert!(e.to_string().contains("experiment.window"), "{e}");
    }
}
