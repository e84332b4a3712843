use super::{decomposition, measured, operator, schedule, tag, trace_csv};
use crate::config::{AlphaRecovery, ExperimentConfig, HopfCase};
use crate::error::Result;
use crate::report::{csv, Output, Plot, Relation};
use caputo_core::domain::{CoefficientSpec, DomainSpec, FieldSpec};
use caputo_core::inverse::{hopf_check, leading_coefficient, predicted_amplitude, recover_alpha_adaptive, DecayBranch};
use caputo_core::spectral::{forward_dirichlet, Components};

pub fn run(config: &ExperimentConfig, p: &AlphaRecovery, out: &mut Output) -> Result<()> {
    if !p.alphas.is_empty() {
        fits(config, p, out)?;
    }
    for case in &p.hopf_cases {
        hopf(config, case, out)?;
    }
    Ok(())
}

fn fits(config: &ExperimentConfig, p: &AlphaRecovery, out: &mut Output) -> Result<()> {
    let op = operator(&config.domain(), &config.coefficients)?;
    let dec = decomposition(config, &op)?;
    let spec = config.schedule();
    let sched = schedule(&spec, &op)?;
    let prof = *sched.profile(1)?;
    // fitting in t − (centroid of ψ₁) removes the leading finite-support bias
    let origin = 0.5 * (prof.lo + prof.hi);
    let times = p.times.times();
    let predicted = predicted_amplitude(&op, &sched)?[0];
    out.key("predicted_amplitude", predicted);

    let mut rows = Vec::new();
    let mut slopes = Vec::new();
    for &alpha in &p.alphas {
        let name = format!("alpha_{}", tag(alpha));
        let trace = measured(config, forward_dirichlet(&dec, &sched, Components::One(1), alpha, &times)?)?;
        out.file(format!("trace_{name}.csv"), trace_csv(&trace));
        out.plot(Plot { title: format!("flux, alpha {alpha}"), file: format!("trace_{name}.csv"), x: 1, ys: vec![2], logx: true, logy: true, abs: true });
        let est = match recover_alpha_adaptive(&trace, spec.tau2, origin, prof.hi) {
            Ok(e) => e,
            Err(e) => {
                out.note(format!("{name}: {e}"));
                out.check(format!("{name}_recovered"), f64::NAN, Relation::Holds, 1.0);
                continue;
            }
        };
        let exponential = est.branch == DecayBranch::Exponential;
        out.key(format!("{name}_hat"), est.alpha_hat);
        if alpha == 1.0 {
            out.holds(format!("{name}_exponential_branch"), exponential);
        } else {
            out.holds(format!("{name}_power_law_branch"), !exponential);
            out.check(format!("{name}_abs_error"), (est.alpha_hat - alpha).abs(), Relation::Lt, p.tolerance);
            let ratio = est.amplitude / predicted;
            out.key(format!("{name}_amplitude_ratio"), ratio);
            out.check(format!("{name}_amplitude_rel_error"), (ratio - 1.0).abs(), Relation::Lt, p.amplitude_tolerance);
            out.key(format!("{name}_leading_coefficient"), leading_coefficient(alpha, predicted)?);
            slopes.push((alpha, est.slope));
        }
        rows.push(vec![
            alpha,
            est.alpha_hat,
            est.interval.0,
            est.interval.1,
            est.window.0,
            est.window.1,
            if exponential { 1.0 } else { 0.0 },
            est.slope,
            est.amplitude,
            predicted,
        ]);
        out.result(&name, &est);
    }
    out.file(
        "alpha_fits.csv",
        csv(&["alpha", "alpha_hat", "ci_lo", "ci_hi", "window_lo", "window_hi", "exponential", "slope", "amplitude", "predicted_amplitude"], rows),
    );
    if slopes.len() >= 2 {
        slopes.sort_by(|a, b| a.0.total_cmp(&b.0));
        out.holds("slope_strictly_decreasing_in_alpha", slopes.windows(2).all(|w| w[1].1 < w[0].1));
    }
    Ok(())
}

fn hopf(config: &ExperimentConfig, case: &HopfCase, out: &mut Output) -> Result<()> {
    let n = case.cells[0];
    let domain = if case.cells.len() == 1 { DomainSpec::interval(n) } else { DomainSpec { cells: case.cells.clone(), ..DomainSpec::square(n, None) } };
    let coeff = CoefficientSpec { q: FieldSpec::constant(case.q), ..config.coefficients.clone() };
    let op = operator(&domain, &coeff)?;
    let sched = schedule(&caputo_core::input::ScheduleSpec { chi_taper: case.chi_taper, ..config.schedule() }, &op)?;
    let label = format!("hopf_{}_q_{}", case.cells.iter().map(|c| c.to_string()).collect::<Vec<_>>().join("x"), tag(case.q));
    match hopf_check(&op, &sched) {
        Ok(r) => {
            out.key(format!("{label}_max_interior_w"), r.max_interior);
            out.key(format!("{label}_min_flux"), r.min_flux);
            out.check(format!("{label}_max_interior_w"), r.max_interior, Relation::Lt, 0.0);
            out.check(format!("{label}_min_flux"), r.min_flux, Relation::Gt, 0.0);
            let rows = r.boundary_nodes.iter().zip(&r.flux).zip(&r.checked).map(|((&b, &f), &c)| {
                let x = op.domain.coords(b);
                vec![b as f64, x[0], x[1], f, if c { 1.0 } else { 0.0 }]
            });
            out.file(format!("{label}.csv"), csv(&["node", "x", "y", "flux", "checked"], rows));
        }
        Err(e) => {
            out.note(format!("{label}: {e}"));
            out.holds(format!("{label}_signs"), false);
        }
    }
    Ok(())
}
