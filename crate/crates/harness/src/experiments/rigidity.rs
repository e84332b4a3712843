use super::{decomposition, measured, operator, tag};
use crate::config::{ExperimentConfig, WindowRigidity};
use crate::error::Result;
use crate::report::{csv, Output, Plot, Relation};
use caputo_core::input::Profile;
use caputo_core::inverse::{caputo_of_samples, window_rigidity_experiment, RigidityOptions};
use caputo_core::spectral::forward_modal;

pub fn run(config: &ExperimentConfig, p: &WindowRigidity, out: &mut Output) -> Result<()> {
    let op = operator(&config.domain(), &config.coefficients)?;
    let dec = decomposition(config, &op)?;
    let n = p.samples - 1;
    let times: Vec<f64> = (0..=n).map(|i| p.window.1 * i as f64 / n as f64).collect();
    let (_, support_end) = p.sigma.support();
    let opts = RigidityOptions { tol_rel: p.tol_rel, lambda1: dec.eigenvalues[0] };
    for &alpha in &p.alphas {
        let name = format!("alpha_{}", tag(alpha));
        let a = measured(config, forward_modal(&dec, &p.sigma, &p.f_a, &[], alpha, &times)?)?;
        let b = measured(config, forward_modal(&dec, &p.sigma, &p.f_b, &[], alpha, &times)?)?;

        let own = window_rigidity_experiment(&a, &a, p.window, alpha, support_end, &opts)?;
        out.holds(format!("{name}_identical_traces_agree"), own.trace_norm == 0.0 && own.caputo_norm == 0.0);

        let v = window_rigidity_experiment(&a, &b, p.window, alpha, support_end, &opts)?;
        out.key(format!("{name}_trace_norm"), v.trace_norm);
        out.key(format!("{name}_caputo_norm"), v.caputo_norm);
        out.key(format!("{name}_peak"), v.peak);
        out.key(format!("{name}_envelope"), v.envelope);
        if alpha < 1.0 {
            let seen = v.trace_norm.max(v.caputo_norm) / v.peak;
            out.check(format!("{name}_distinguished"), seen, Relation::Gt, p.tol_rel);
        } else {
            out.check(format!("{name}_trace_over_envelope"), v.trace_norm / v.envelope, Relation::Le, 1.0);
        }

        let diff = a.axpy(-1.0, &b)?;
        let d = diff.series(0);
        let c = caputo_of_samples(&times, &d, alpha)?;
        let rows = (0..times.len()).map(|i| vec![times[i], a.values[i][0], b.values[i][0], d[i], c[i]]);
        let file = format!("rigidity_{name}.csv");
        out.file(file.clone(), csv(&["t", "trace_a", "trace_b", "difference", "caputo_of_samples"], rows));
        out.plot(Plot { title: format!("trace difference, alpha {alpha}"), file, x: 1, ys: vec![4, 5], logx: false, logy: true, abs: true });
        out.result(&name, &v);
    }
    Ok(())
}
