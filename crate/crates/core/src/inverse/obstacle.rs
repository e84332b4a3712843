use crate::domain::{assemble, build_domain, CoefficientField, CoefficientSpec, DiscreteOperator, DomainSpec, ObstacleSpec};
use crate::input::{build_schedule, ExcitationSchedule, ScheduleSpec};
use crate::laplace::{admissible_p, resolvent_flux, schedule_transform};
use crate::linalg::conjugate_gradient;
use crate::mlf::check_alpha;
use crate::spectral::Components;
use crate::{Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanEntry {
    pub obstacle: Option<ObstacleSpec>,
    /// `‖flux − truth‖² / ‖truth‖²`, absent for skipped candidates.
    pub objective: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObstacleScan {
    pub entries: Vec<ScanEntry>,
    /// Index of the smallest objective.
    pub best: usize,
    pub p: f64,
}

impl ObstacleScan {
    pub fn best_entry(&self) -> &ScanEntry {
        &self.entries[self.best]
    }

    /// `lo_x,lo_y,hi_x,hi_y,objective,note`; empty fields for the empty obstacle.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("lo_x,lo_y,hi_x,hi_y,objective,note\n");
        for e in &self.entries {
            match &e.obstacle {
                Some(o) => write!(s, "{},{},{},{}", o.lo[0], o.lo[1], o.hi[0], o.hi[1]).unwrap(),
                None => s.push_str(",,,"),
            }
            let obj = e.objective.map(|v| format!("{v:.12e}")).unwrap_or_default();
            writeln!(s, ",{obj},{}", e.note.clone().unwrap_or_default().replace(',', ";")).unwrap();
        }
        s
    }
}

fn candidate_operator(base: &DomainSpec, coeff: &CoefficientSpec, obstacle: &Option<ObstacleSpec>) -> Result<DiscreteOperator> {
    let spec = DomainSpec { obstacle: obstacle.clone(), ..base.clone() };
    let domain = build_domain(&spec)?;
    let field = CoefficientField::sample(&domain, coeff)?;
    assemble(&domain, &field)
}

fn excitation(op: &DiscreteOperator, schedule: &ScheduleSpec, p: f64) -> Result<(ExcitationSchedule, Vec<f64>)> {
    let sched = build_schedule(schedule, &op.domain)?;
    let g = schedule_transform(op, &sched, Components::One(1), p)?;
    Ok((sched, g))
}

/// Reference flux `a∂_ν V₁(p)` on `Γ_out` for a given obstacle, computed with
/// conjugate gradients so it shares no factorization with the scan.
pub fn obstacle_flux_reference(
    base: &DomainSpec,
    coeff: &CoefficientSpec,
    obstacle: &Option<ObstacleSpec>,
    alpha: f64,
    schedule: &ScheduleSpec,
    p: f64,
) -> Result<Vec<f64>> {
    check_alpha(alpha)?;
    let op = candidate_operator(base, coeff, obstacle)?;
    if op.has_drift() {
        return Err(Error::Unsupported("the conjugate-gradient reference needs a symmetric operator".into()));
    }
    let (_, g) = excitation(&op, schedule, p)?;
    let mut rhs = vec![0.0; op.n()];
    op.boundary_coupling.matvec_add(&g, -1.0, &mut rhs);
    let cg = conjugate_gradient(&op.shifted(p.powf(alpha)), &rhs, 1e-14, 20 * op.n())?;
    op.boundary_flux(&cg.x, &g, &op.domain.gamma_out)
}

/// Scores each candidate obstacle by the relative `p`-domain flux mismatch on
/// `Γ_out` against `truth`. Candidates that fail domain validation are kept in
/// the landscape with a note.
pub fn obstacle_scan(
    base: &DomainSpec,
    coeff: &CoefficientSpec,
    alpha: f64,
    schedule: &ScheduleSpec,
    candidates: &[Option<ObstacleSpec>],
    truth: &[f64],
    p: f64,
) -> Result<ObstacleScan> {
    check_alpha(alpha)?;
    if base.cells.len() != 2 {
        return Err(Error::Unsupported("obstacle scans need a two-dimensional domain".into()));
    }
    let scale: f64 = truth.iter().map(|v| v * v).sum();
    if scale == 0.0 {
        return Err(Error::Precondition("truth flux is identically zero".into()));
    }
    let entries: Vec<ScanEntry> = candidates
        .par_iter()
        .map(|cand| {
            let scored = candidate_operator(base, coeff, cand).and_then(|op| {
                let (_, g) = excitation(&op, schedule, p)?;
                let flux = resolvent_flux(&op, alpha, p, &g, None)?;
                if flux.len() != truth.len() {
                    return Err(Error::Parameter(format!("Γ_out has {} nodes, truth has {}", flux.len(), truth.len())));
                }
                Ok(flux.iter().zip(truth).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / scale)
            });
            match scored {
                Ok(v) => ScanEntry { obstacle: cand.clone(), objective: Some(v), note: None },
                Err(Error::Construction(msg)) => ScanEntry { obstacle: cand.clone(), objective: None, note: Some(format!("skipped: {msg}")) },
                Err(e) => ScanEntry { obstacle: cand.clone(), objective: None, note: Some(format!("failed: {e}")) },
            }
        })
        .collect();
    let best = entries
        .iter()
        .enumerate()
        .filter_map(|(i, e)| e.objective.map(|v| (i, v)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(i, _)| i)
        .ok_or_else(|| Error::Precondition("no valid obstacle candidate".into()))?;
    Ok(ObstacleScan { entries, best, p })
}

/// Square obstacles of side `side` centered on an `n × n` grid spanning `[lo, hi]²`.
pub fn square_candidates(lo: f64, hi: f64, n: usize, side: f64) -> Vec<Option<ObstacleSpec>> {
    let c = |i: usize| if n == 1 { 0.5 * (lo + hi) } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 };
    (0..n).flat_map(|j| (0..n).map(move |i| Some(ObstacleSpec::square([c(i), c(j)], side)))).collect()
}

/// Largest flux discrepancy over the probes at one `p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DtnPoint {
    pub p: f64,
    pub max_discrepancy: f64,
    /// Boundary-weighted `ℓ²` discrepancy per probe.
    pub per_probe: Vec<f64>,
}

/// Compares the partial Dirichlet-to-Neumann maps of two operators on a common grid:
/// for each `p` and probe `h` (outer-boundary vector), `‖𝒩_A(p)h − 𝒩_B(p)h‖` on `Γ_out`.
pub fn dtn_compare(op_a: &DiscreteOperator, op_b: &DiscreteOperator, alpha: f64, p_grid: &[f64], probes: &[Vec<f64>]) -> Result<Vec<DtnPoint>> {
    check_alpha(alpha)?;
    if op_a.n_boundary() != op_b.n_boundary() || op_a.domain.gamma_out != op_b.domain.gamma_out {
        return Err(Error::Parameter("operators must share the outer boundary and Γ_out".into()));
    }
    let p1 = admissible_p(op_a, alpha).max(admissible_p(op_b, alpha));
    if let Some(&p) = p_grid.iter().find(|&&p| p <= p1 && (op_a.has_drift() || op_b.has_drift())) {
        return Err(Error::Precondition(format!("p = {p} is not above p1 = {p1:.6}")));
    }
    let w = op_a.domain.boundary_weight();
    p_grid
        .par_iter()
        .map(|&p| {
            let per_probe = probes
                .iter()
                .map(|h| {
                    let fa = resolvent_flux(op_a, alpha, p, h, None)?;
                    let fb = resolvent_flux(op_b, alpha, p, h, None)?;
                    Ok((w * fa.iter().zip(&fb).map(|(a, b)| (a - b).powi(2)).sum::<f64>()).sqrt())
                })
                .collect::<Result<Vec<f64>>>()?;
            let max_discrepancy = per_probe.iter().copied().fold(0.0, f64::max);
            Ok(DtnPoint { p, max_discrepancy, per_probe })
        })
        .collect()
}

/// Probe family `χη_k`, `k = 1..=K`, as outer-boundary vectors.
pub fn schedule_probes(op: &DiscreteOperator, schedule: &ExcitationSchedule) -> Result<Vec<Vec<f64>>> {
    (1..=schedule.components()).map(|k| op.boundary_vector(&schedule.gamma_in, &schedule.boundary_profile(k)?)).collect()
}
