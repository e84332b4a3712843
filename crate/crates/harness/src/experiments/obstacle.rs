use crate::config::{ExperimentConfig, ObstacleScanParams};
use crate::error::Result;
use crate::report::{Output, Relation};
use caputo_core::domain::ObstacleSpec;
use caputo_core::inverse::{obstacle_flux_reference, obstacle_scan, square_candidates};

fn disjoint(a: &ObstacleSpec, b: &ObstacleSpec) -> bool {
    (0..2).any(|i| a.hi[i] <= b.lo[i] || b.hi[i] <= a.lo[i])
}

pub fn run(config: &ExperimentConfig, p: &ObstacleScanParams, out: &mut Output) -> Result<()> {
    let base = config.domain();
    let sched = config.schedule();
    let truth = Some(p.truth.clone());
    let flux = obstacle_flux_reference(&base, &config.coefficients, &truth, p.alpha, &sched, p.p)?;
    let g = &p.candidates;
    let mut cands = square_candidates(g.lo, g.hi, g.n, g.side);
    if p.include_empty {
        cands.push(None);
    }
    let scan = obstacle_scan(&base, &config.coefficients, p.alpha, &sched, &cands, &flux, p.p)?;
    out.file("landscape.csv", scan.to_csv());
    for e in scan.entries.iter().filter_map(|e| e.note.as_ref()) {
        out.note(e.clone());
    }

    let same = |o: &Option<ObstacleSpec>| match o {
        Some(o) => (0..2).all(|i| (o.lo[i] - p.truth.lo[i]).abs() < 1e-12 && (o.hi[i] - p.truth.hi[i]).abs() < 1e-12),
        None => false,
    };
    let at_truth = scan.entries.iter().find(|e| same(&e.obstacle)).and_then(|e| e.objective);
    let floor = at_truth.unwrap_or(f64::NAN);
    out.key("truth_objective", floor);
    out.check("truth_objective", floor, Relation::Lt, p.floor);
    out.holds("argmin_is_truth", same(&scan.best_entry().obstacle));

    let scale = p.separation * floor.max(f64::MIN_POSITIVE);
    let far = scan
        .entries
        .iter()
        .filter(|e| matches!(&e.obstacle, Some(o) if disjoint(o, &p.truth)))
        .filter_map(|e| e.objective)
        .fold(f64::INFINITY, f64::min);
    if far.is_finite() {
        out.key("min_disjoint_objective", far);
        out.check("min_disjoint_objective", far, Relation::Ge, scale);
    } else {
        out.note("no valid candidate is disjoint from the truth");
    }
    if let Some(empty) = scan.entries.iter().find(|e| e.obstacle.is_none()).and_then(|e| e.objective) {
        out.key("empty_objective", empty);
        out.check("empty_objective", empty, Relation::Ge, scale);
    }
    out.result("scan", &scan);
    Ok(())
}
