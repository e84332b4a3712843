use super::{operator, schedule};
use crate::config::{DtnCompare, DtnExpectation, ExperimentConfig};
use crate::error::Result;
use crate::report::{csv, Output, Plot, Relation};
use caputo_core::inverse::{dtn_compare, schedule_probes};
use caputo_core::laplace::admissible_p;

pub fn run(config: &ExperimentConfig, p: &DtnCompare, out: &mut Output) -> Result<()> {
    let domain = config.domain();
    let base = operator(&domain, &config.coefficients)?;
    let sched = schedule(&config.schedule(), &base)?;
    let probes = schedule_probes(&base, &sched)?;
    for v in &p.variants {
        let other = operator(&domain, &v.coefficients)?;
        let p1 = admissible_p(&base, p.alpha).max(admissible_p(&other, p.alpha));
        let grid = match &v.p_grid {
            Some(g) => g.clone(),
            None if p1 > 0.0 => p.drift_multiples.iter().map(|m| m * p1).collect(),
            None => p.p_grid.clone(),
        };
        if p1 > 0.0 {
            out.key(format!("{}_p1", v.name), p1);
        }
        let points = dtn_compare(&base, &other, p.alpha, &grid, &probes)?;
        let worst = points.iter().map(|d| d.max_discrepancy).fold(0.0, f64::max);
        let least = points.iter().map(|d| d.max_discrepancy).fold(f64::INFINITY, f64::min);
        out.key(format!("{}_max_discrepancy", v.name), worst);
        out.key(format!("{}_min_discrepancy", v.name), least);
        match v.expect {
            DtnExpectation::Equal => {
                out.check(format!("{}_max_discrepancy", v.name), worst, Relation::Le, p.equal_tolerance);
            }
            DtnExpectation::Distinct => {
                out.check(format!("{}_min_discrepancy", v.name), least, Relation::Gt, p.distinct_threshold);
            }
            DtnExpectation::Record => {}
        }
        let file = format!("dtn_{}.csv", v.name);
        let rows = points.iter().map(|d| [vec![d.p, d.max_discrepancy], d.per_probe.clone()].concat());
        let mut header = vec!["p".to_string(), "max_discrepancy".to_string()];
        header.extend((1..=probes.len()).map(|k| format!("probe_{k}")));
        out.file(file.clone(), csv(&header.iter().map(String::as_str).collect::<Vec<_>>(), rows));
        out.plot(Plot { title: format!("DtN discrepancy, {}", v.name), file, x: 1, ys: vec![2], logx: true, logy: true, abs: true });
        out.result(&v.name, &points);
    }
    Ok(())
}
