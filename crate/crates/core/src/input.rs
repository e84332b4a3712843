//! The staircase Dirichlet excitation `Φ(t,x) = Σ d_k ψ_k(t) χ(x) η_k(x)` and
//! the time profiles of internal sources.

use crate::domain::GridDomain;
use crate::quad::gauss_kronrod;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt::Write as _;

/// `∫_{-1}^{1} exp(-1/(1-y²)) dy`
const BUMP_MASS: f64 = 0.443_993_816_168_079_44;

/// A scalar time profile with a compact transition window.
pub trait Profile: Send + Sync {
    fn value(&self, t: f64) -> f64;
    fn derivative(&self, t: f64) -> f64;
    /// Interval outside of which the derivative vanishes.
    fn support(&self) -> (f64, f64);
    /// `∫_0^∞ e^{-pt} value(t) dt`
    fn laplace(&self, p: f64) -> f64;
}

fn bump(y: f64) -> f64 {
    if y.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - y * y)).exp()
    }
}

fn bump_prime(y: f64) -> f64 {
    if y.abs() >= 1.0 {
        0.0
    } else {
        let s = 1.0 - y * y;
        -2.0 * y / (s * s) * bump(y)
    }
}

fn edge(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        (-1.0 / x).exp()
    }
}

fn edge_prime(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        edge(x) / (x * x)
    }
}

/// `S(x) = f(x)/(f(x)+f(1-x))`, `f(x) = e^{-1/x}`: 0 for x ≤ 0, 1 for x ≥ 1, S(1/2) = 1/2.
pub fn smooth_unit_step(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let (a, b) = (edge(x), edge(1.0 - x));
    a / (a + b)
}

fn smooth_unit_step_prime(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        return 0.0;
    }
    let (a, b) = (edge(x), edge(1.0 - x));
    let (da, db) = (edge_prime(x), edge_prime(1.0 - x));
    (da * b + a * db) / ((a + b) * (a + b))
}

/// One smooth component `ψ_k`: a unit-mass bump when the plateau is zero,
/// otherwise a smooth step from 0 to the plateau.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepProfile {
    pub lo: f64,
    pub hi: f64,
    pub plateau: f64,
}

impl StepProfile {
    pub fn is_bump(&self) -> bool {
        self.plateau == 0.0
    }

    fn y(&self, t: f64) -> f64 {
        (2.0 * t - self.lo - self.hi) / (self.hi - self.lo)
    }

    /// Mass of the bump (1 by construction) or `∫ψ` over the transition for steps.
    pub fn bump_mass(&self) -> f64 {
        if self.is_bump() {
            1.0
        } else {
            0.0
        }
    }

    /// Numerical `max_{j≤3} sup|ψ^{(j)}|`.
    pub fn w3_norm(&self) -> f64 {
        let n = 4000;
        let w = self.hi - self.lo;
        let d = 1e-4 * w;
        let mut best = self.plateau.abs();
        for i in 1..n {
            let t = self.lo + w * i as f64 / n as f64;
            let (fm, f0, fp) = (self.derivative(t - d), self.derivative(t), self.derivative(t + d));
            best = best
                .max(self.value(t).abs())
                .max(f0.abs())
                .max(((fp - fm) / (2.0 * d)).abs())
                .max(((fp - 2.0 * f0 + fm) / (d * d)).abs());
        }
        best
    }
}

impl Profile for StepProfile {
    fn value(&self, t: f64) -> f64 {
        if self.is_bump() {
            bump(self.y(t)) * 2.0 / ((self.hi - self.lo) * BUMP_MASS)
        } else {
            self.plateau * smooth_unit_step((t - self.lo) / (self.hi - self.lo))
        }
    }

    fn derivative(&self, t: f64) -> f64 {
        let w = self.hi - self.lo;
        if self.is_bump() {
            bump_prime(self.y(t)) * 4.0 / (w * w * BUMP_MASS)
        } else {
            self.plateau * smooth_unit_step_prime((t - self.lo) / w) / w
        }
    }

    fn support(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    fn laplace(&self, p: f64) -> f64 {
        let body = gauss_kronrod(|t: f64| self.value(t) * (-p * t).exp(), self.lo, self.hi, 1e-16, 1e-14, 200).value;
        if self.is_bump() {
            body
        } else {
            body + self.plateau * (-p * self.hi).exp() / p
        }
    }
}

/// Time profile `σ` of an internal source.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SourceProfile {
    #[default]
    Zero,
    /// Unit-mass mollifier bump on `[lo, hi]`.
    Bump { lo: f64, hi: f64 },
}

impl SourceProfile {
    fn as_step(&self) -> Option<StepProfile> {
        match *self {
            SourceProfile::Zero => None,
            SourceProfile::Bump { lo, hi } => Some(StepProfile { lo, hi, plateau: 0.0 }),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let SourceProfile::Bump { lo, hi } = *self {
            if !(lo >= 0.0 && hi > lo) {
                return Err(Error::Parameter(format!("source window must satisfy 0 <= lo < hi, got [{lo}, {hi}]")));
            }
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, SourceProfile::Zero)
    }
}

impl Profile for SourceProfile {
    fn value(&self, t: f64) -> f64 {
        self.as_step().map_or(0.0, |s| s.value(t))
    }
    fn derivative(&self, t: f64) -> f64 {
        self.as_step().map_or(0.0, |s| s.derivative(t))
    }
    fn support(&self) -> (f64, f64) {
        self.as_step().map_or((0.0, 0.0), |s| s.support())
    }
    fn laplace(&self, p: f64) -> f64 {
        self.as_step().map_or(0.0, |s| s.laplace(p))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleSpec {
    pub tau1: f64,
    pub tau2: f64,
    /// Number of retained components `K`.
    pub components: usize,
    /// Plateaus `c_1..c_K`; defaults to `c_1 = 0`, `c_k = 1`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plateaus: Option<Vec<f64>>,
    /// Fraction of `Γ_in` at each end over which `χ` tapers to zero.
    #[serde(default)]
    pub chi_taper: f64,
}

impl ScheduleSpec {
    pub fn new(tau1: f64, tau2: f64, components: usize) -> Self {
        ScheduleSpec { tau1, tau2, components, plateaus: None, chi_taper: 0.0 }
    }
}

/// The constructed excitation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcitationSchedule {
    pub tau1: f64,
    pub tau2: f64,
    /// `t_0 = τ₁, …, t_{2K}`
    pub step_times: Vec<f64>,
    pub profiles: Vec<StepProfile>,
    pub weights: Vec<f64>,
    /// `W^{3,∞}` estimates used for the weights.
    pub w3_norms: Vec<f64>,
    pub gamma_in: Vec<usize>,
    /// Cutoff `χ` on `Γ_in`.
    pub chi: Vec<f64>,
    /// Profiles `η_k` on `Γ_in`, unit norm in the discrete boundary norm.
    pub eta: Vec<Vec<f64>>,
}

/// Builds the staircase schedule on the input boundary of `domain`.
pub fn build_schedule(spec: &ScheduleSpec, domain: &GridDomain) -> Result<ExcitationSchedule> {
    if !(spec.tau1 > 0.0 && spec.tau2 > spec.tau1 && spec.tau2.is_finite()) {
        return Err(Error::Parameter(format!(
            "schedule needs 0 < tau1 < tau2, got tau1 = {}, tau2 = {}",
            spec.tau1, spec.tau2
        )));
    }
    if spec.components == 0 {
        return Err(Error::Parameter("schedule needs at least one component".into()));
    }
    if domain.gamma_in.is_empty() {
        return Err(Error::Parameter("input boundary Γ_in is empty".into()));
    }
    if !(0.0..0.5).contains(&spec.chi_taper) {
        return Err(Error::Parameter(format!("chi_taper must lie in [0, 0.5), got {}", spec.chi_taper)));
    }
    let k_max = spec.components;
    let plateaus = match &spec.plateaus {
        Some(c) => {
            if c.len() != k_max {
                return Err(Error::Parameter(format!("expected {k_max} plateaus, got {}", c.len())));
            }
            if c[0] != 0.0 {
                return Err(Error::Parameter("the first plateau c_1 must be 0".into()));
            }
            if c.iter().any(|&v| !(v >= 0.0)) {
                return Err(Error::Parameter("plateaus must be nonnegative".into()));
            }
            c.clone()
        }
        None => (0..k_max).map(|k| if k == 0 { 0.0 } else { 1.0 }).collect(),
    };
    let step_times: Vec<f64> =
        (0..=2 * k_max).map(|k| spec.tau2 - (spec.tau2 - spec.tau1) * 0.5f64.powi(k as i32)).collect();
    let profiles: Vec<StepProfile> = (1..=k_max)
        .map(|k| StepProfile { lo: step_times[2 * k - 2], hi: step_times[2 * k - 1], plateau: plateaus[k - 1] })
        .collect();
    let w3_norms: Vec<f64> = profiles.iter().map(StepProfile::w3_norm).collect();
    let weights = w3_norms.iter().enumerate().map(|(i, w)| 0.5f64.powi(i as i32 + 1) / (1.0 + w)).collect();

    let m = domain.gamma_in.len();
    let s: Vec<f64> = if m == 1 { vec![0.5] } else { (0..m).map(|i| i as f64 / (m - 1) as f64).collect() };
    let chi: Vec<f64> = s
        .iter()
        .map(|&x| {
            if spec.chi_taper == 0.0 {
                1.0
            } else {
                let r = spec.chi_taper;
                smooth_unit_step(x / r) * smooth_unit_step((1.0 - x) / r)
            }
        })
        .collect();
    let weight = domain.boundary_weight();
    let normalize = |v: Vec<f64>| -> Result<Vec<f64>> {
        let n = (weight * v.iter().map(|x| x * x).sum::<f64>()).sqrt();
        if n == 0.0 {
            return Err(Error::Parameter("boundary profile vanishes on Γ_in".into()));
        }
        Ok(v.into_iter().map(|x| x / n).collect())
    };
    let mut eta = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        let raw: Vec<f64> = if m == 1 {
            vec![1.0]
        } else if k == 1 {
            s.iter().map(|&x| bump(2.0 * x - 1.0)).collect()
        } else {
            s.iter().map(|&x| ((k - 1) as f64 * PI * x).cos()).collect()
        };
        eta.push(normalize(raw)?);
    }
    let sched = ExcitationSchedule {
        tau1: spec.tau1,
        tau2: spec.tau2,
        step_times,
        profiles,
        weights,
        w3_norms,
        gamma_in: domain.gamma_in.clone(),
        chi,
        eta,
    };
    sched.check()?;
    Ok(sched)
}

impl ExcitationSchedule {
    pub fn components(&self) -> usize {
        self.profiles.len()
    }

    fn check(&self) -> Result<()> {
        let first: Vec<f64> = self.boundary_profile(1)?;
        let pos = first.iter().any(|&v| v > 0.0);
        let neg = first.iter().any(|&v| v < 0.0);
        if pos == neg {
            return Err(Error::Property("χη₁ must be of constant sign and not identically zero".into()));
        }
        Ok(())
    }

    fn index(&self, k: usize) -> Result<usize> {
        if k == 0 || k > self.components() {
            return Err(Error::Index(format!("component {k} outside 1..={}", self.components())));
        }
        Ok(k - 1)
    }

    pub fn profile(&self, k: usize) -> Result<&StepProfile> {
        Ok(&self.profiles[self.index(k)?])
    }

    /// `ψ_k(t)`
    pub fn smooth_step(&self, k: usize, t: f64) -> Result<f64> {
        Ok(self.profile(k)?.value(t))
    }

    pub fn weight(&self, k: usize) -> Result<f64> {
        Ok(self.weights[self.index(k)?])
    }

    /// `χη_k` on `Γ_in`.
    pub fn boundary_profile(&self, k: usize) -> Result<Vec<f64>> {
        let e = &self.eta[self.index(k)?];
        Ok(e.iter().zip(&self.chi).map(|(a, b)| a * b).collect())
    }

    /// `Φ(t, ·)` on `Γ_in`.
    pub fn boundary_data(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.gamma_in.len()];
        for k in 1..=self.components() {
            let amp = self.weights[k - 1] * self.profiles[k - 1].value(t);
            if amp != 0.0 {
                for (o, v) in out.iter_mut().zip(self.boundary_profile(k).expect("valid index")) {
                    *o += amp * v;
                }
            }
        }
        out
    }

    /// Time window `(0, t_{2k})` on which only components `≤ k` have been switched on.
    pub fn window_of(&self, k: usize) -> Result<(f64, f64)> {
        if k > self.components() {
            return Err(Error::Index(format!("window {k} outside 0..={}", self.components())));
        }
        Ok((0.0, self.step_times[2 * k]))
    }

    /// `∫ψ₁`
    pub fn bump_mass(&self) -> f64 {
        self.profiles[0].bump_mass()
    }

    /// Samples `ψ_k` on a uniform grid as CSV (`t,psi_1,…,psi_K`).
    pub fn to_csv(&self, t_end: f64, samples: usize) -> String {
        let mut s = String::from("t");
        for k in 1..=self.components() {
            let _ = write!(s, ",psi_{k}");
        }
        s.push('\n');
        for i in 0..=samples {
            let t = t_end * i as f64 / samples as f64;
            let _ = write!(s, "{t}");
            for p in &self.profiles {
                let _ = write!(s, ",{}", p.value(t));
            }
            s.push('\n');
        }
        s
    }
}
