use super::{decomposition, operator, rel_l2, schedule, tag};
use crate::config::{ExperimentConfig, SolverCrosscheck};
use crate::error::Result;
use crate::report::{csv, Output, Plot, Relation};
use caputo_core::input::{ScheduleSpec, SourceProfile};
use caputo_core::laplace::{weak_solution_residual, ResidualInputs};
use caputo_core::spectral::{eigensolve_shared, forward_dirichlet, forward_dirichlet_fields, Components};
use caputo_core::stepper::{step_solve, StepperInputs, SteppingPlan};

const DEFAULT_STEPS: usize = 2048;
/// One-dimensional mode count when the config sets none. The L1 time error
/// dominates the comparison well before the modal truncation shows.
const DEFAULT_MODES_1D: usize = 128;

pub fn run(config: &ExperimentConfig, p: &SolverCrosscheck, out: &mut Output) -> Result<()> {
    let op = operator(&config.domain(), &config.coefficients)?;
    let dec = match config.solver.modes {
        None if op.domain.dim == 1 => eigensolve_shared(op.clone(), DEFAULT_MODES_1D.min(op.n()))?,
        _ => decomposition(config, &op)?,
    };
    let spec = config.schedule();
    let sched = schedule(&spec, &op)?;
    let steps = config.solver.steps.unwrap_or(DEFAULT_STEPS);
    out.key("modes", dec.count() as f64);

    if p.run_crosscheck {
        for &alpha in &p.alphas {
            if alpha > 1.0 {
                out.note(format!("alpha {alpha}: the L1 stepper covers alpha <= 1 only; cross-check skipped"));
                continue;
            }
            let plan = SteppingPlan::graded(alpha, p.horizon_factor * spec.tau2, steps)?;
            let (st, _) = step_solve(&op, &plan, &StepperInputs { schedule: Some(&sched), ..Default::default() })?;
            let idx: Vec<usize> = (1..plan.mesh.len()).filter(|&i| plan.mesh[i] <= spec.tau2).collect();
            let ts: Vec<f64> = idx.iter().map(|&i| plan.mesh[i]).collect();
            let sp = forward_dirichlet(&dec, &sched, Components::All, alpha, &ts)?;
            let stepper: Vec<Vec<f64>> = idx.iter().map(|&i| st.values[i].clone()).collect();
            let err = rel_l2(&stepper, &sp.values);
            let name = format!("crosscheck_alpha_{}", tag(alpha));
            out.key(format!("{name}_rel_l2"), err);
            out.check(format!("{name}_rel_l2"), err, Relation::Le, p.tolerance);
            let rows = ts.iter().zip(&stepper).zip(&sp.values).map(|((t, a), b)| [vec![*t], a.clone(), b.clone()].concat());
            let nodes = sp.observation_nodes.len();
            let mut header = vec!["t".to_string()];
            header.extend((0..nodes).map(|k| format!("stepper_{k}")));
            header.extend((0..nodes).map(|k| format!("spectral_{k}")));
            let header: Vec<&str> = header.iter().map(String::as_str).collect();
            out.file(format!("{name}.csv"), csv(&header, rows));
            out.plot(Plot { title: format!("stepper vs spectral, alpha {alpha}"), file: format!("{name}.csv"), x: 1, ys: vec![2, 2 + nodes], logx: false, logy: false, abs: false });
        }
    }

    if !p.residual_p.is_empty() {
        let bump = schedule(&ScheduleSpec { components: 1, plateaus: None, ..spec.clone() }, &op)?;
        let inputs = ResidualInputs { schedule: Some(&bump), components: None, sigma: SourceProfile::Zero, f: None, u0: None };
        let mut rows = Vec::new();
        for &alpha in &p.alphas {
            if alpha <= 1.0 {
                let plan = SteppingPlan::graded(alpha, p.residual_horizon, steps)?;
                let (_, history) = step_solve(&op, &plan, &StepperInputs { schedule: Some(&bump), ..Default::default() })?;
                let r = weak_solution_residual(&op, alpha, &history, &inputs, &p.residual_p)?;
                record_residual(out, "stepper", alpha, &p.residual_p, &r, p.residual_tolerance, &mut rows);
            }
            let (_, history) = forward_dirichlet_fields(&dec, &bump, Components::All, alpha, &p.residual_grid.times())?;
            let r = weak_solution_residual(&op, alpha, &history, &inputs, &p.residual_p)?;
            record_residual(out, "spectral", alpha, &p.residual_p, &r, p.residual_tolerance, &mut rows);
        }
        out.file("weak_residual.csv", csv(&["spectral", "alpha", "p", "residual"], rows));
    }

    if p.telescoping_samples > 0 {
        let mut rows = Vec::new();
        let mut worst = 0.0f64;
        for &alpha in &p.alphas {
            for k in 1..=sched.components() {
                let (_, hi) = sched.window_of(k)?;
                let ts: Vec<f64> = (1..=p.telescoping_samples).map(|i| hi * i as f64 / p.telescoping_samples as f64).collect();
                let all = forward_dirichlet(&dec, &sched, Components::All, alpha, &ts)?;
                let part = forward_dirichlet(&dec, &sched, Components::UpTo(k), alpha, &ts)?;
                let err = rel_l2(&part.values, &all.values);
                worst = worst.max(err);
                rows.push(vec![alpha, k as f64, hi, err]);
            }
        }
        out.file("telescoping.csv", csv(&["alpha", "component", "window_end", "rel_l2"], rows));
        out.key("telescoping_max_rel_l2", worst);
        out.check("telescoping_max_rel_l2", worst, Relation::Le, p.telescoping_tolerance);
    }
    Ok(())
}

fn record_residual(out: &mut Output, solver: &str, alpha: f64, ps: &[f64], r: &[f64], tol: f64, rows: &mut Vec<Vec<f64>>) {
    let code = if solver == "stepper" { 0.0 } else { 1.0 };
    for (&p, &v) in ps.iter().zip(r) {
        rows.push(vec![code, alpha, p, v]);
        let name = format!("residual_{solver}_alpha_{}_p_{}", tag(alpha), tag(p));
        out.key(name.clone(), v);
        out.check(name, v, Relation::Lt, tol);
    }
}
