use super::{decomposition, measured, operator, schedule, trace_csv};
use crate::config::{ExperimentConfig, SpectralRecovery};
use crate::error::Result;
use crate::report::{csv, Output, Plot, Relation};
use caputo_core::input::Profile;
use caputo_core::inverse::fit_spectral_data;
use caputo_core::laplace::{log_grid, resolvent_flux, schedule_transform, transform};
use caputo_core::spectral::{forward_dirichlet, Components};

pub fn run(config: &ExperimentConfig, p: &SpectralRecovery, out: &mut Output) -> Result<()> {
    let op = operator(&config.domain(), &config.coefficients)?;
    let dec = decomposition(config, &op)?;
    let sched = schedule(&config.schedule(), &op)?;
    let alpha = p.alpha;

    let trace = measured(config, forward_dirichlet(&dec, &sched, Components::All, alpha, &p.times.times())?)?;
    out.file("trace.csv", trace_csv(&trace));
    let ps = log_grid(p.p_range.0, p.p_range.1, p.p_points);
    let samples = transform(&trace, &ps)?;

    // the sampled transform against a direct resolvent solve at the smallest p
    let g = schedule_transform(&op, &sched, Components::All, ps[0])?;
    let direct = resolvent_flux(&op, alpha, ps[0], &g, None)?;
    let idx: Vec<usize> = samples.nodes.iter().map(|n| op.domain.gamma_out.iter().position(|m| m == n).unwrap_or(0)).collect();
    let mismatch = idx.iter().zip(&samples.values[0]).map(|(&i, v)| ((v - direct[i]) / direct[i]).abs()).fold(0.0, f64::max);
    out.key("transform_vs_resolvent_rel", mismatch);

    let d1 = sched.weight(1)?;
    let prof = *sched.profile(1)?;
    let psi: Vec<f64> = ps.iter().map(|&q| d1 * prof.laplace(q)).collect();
    let mut rows: Vec<Vec<f64>> = ps.iter().zip(&samples.values).zip(&psi).map(|((q, v), s)| [vec![*q, *s], v.clone()].concat()).collect();
    let mut header = vec!["p".to_string(), "psi_hat".to_string()];
    header.extend(samples.nodes.iter().map(|n| format!("node_{n}")));
    out.file("laplace_samples.csv", csv(&header.iter().map(String::as_str).collect::<Vec<_>>(), rows.drain(..)));
    out.plot(Plot { title: "Laplace samples".into(), file: "laplace_samples.csv".into(), x: 1, ys: vec![3], logx: true, logy: true, abs: true });

    let fit = fit_spectral_data(&samples, alpha, &psi, &p.fit)?;
    let traces = dec.traces_at(&fit.nodes)?;
    let mut worst = 0.0f64;
    let mut worst_ratio = 0.0f64;
    for k in 0..p.fit.n_modes.min(fit.lambdas.len()) {
        let err = (fit.lambdas[k] / dec.eigenvalues[k] - 1.0).abs();
        out.key(format!("lambda_{}", k + 1), fit.lambdas[k]);
        out.key(format!("lambda_{}_rel_error", k + 1), err);
        worst = worst.max(err);
        if fit.nodes.len() >= 2 {
            let got = fit.residues[k][0] / fit.residues[k][1];
            let want = traces[k][0] / traces[k][1];
            let e = (got / want - 1.0).abs();
            out.key(format!("cross_ratio_{}_rel_error", k + 1), e);
            worst_ratio = worst_ratio.max(e);
        }
        rows.push([vec![(k + 1) as f64, fit.lambdas[k], dec.eigenvalues[k]], fit.residues[k].clone()].concat());
    }
    out.check("lambda_max_rel_error", worst, Relation::Lt, p.tolerance);
    if fit.nodes.len() >= 2 {
        out.check("cross_ratio_max_rel_error", worst_ratio, Relation::Lt, p.cross_ratio_tolerance);
    } else {
        out.note("one observation node: cross ratios are not defined");
    }
    let last = fit.nodes.len() - 1;
    let alternating = (1..p.fit.n_modes.min(fit.lambdas.len())).all(|k| fit.residues[k][last] * fit.residues[k - 1][last] < 0.0);
    out.holds("residue_signs_alternate", alternating);
    out.key("fit_residual", fit.residual);
    out.key("fit_condition", fit.condition);

    let mut header = vec!["mode".to_string(), "lambda_hat".to_string(), "lambda".to_string()];
    header.extend(fit.nodes.iter().map(|n| format!("residue_{n}")));
    out.file("fit.csv", csv(&header.iter().map(String::as_str).collect::<Vec<_>>(), rows));
    out.result("fit", &fit);
    Ok(())
}
