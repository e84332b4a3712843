use crate::config::KernelValidation;
use crate::error::Result;
use crate::report::{csv, Output, Plot, Relation};
use caputo_core::laplace::{contour_kernel, log_grid, ContourSpec};
use caputo_core::mlf::{relaxation_kernel, KernelQuery};

const ROUNDOFF: f64 = 1e-12;

fn kernel(alpha: f64, lambda: f64, t: f64) -> Result<f64> {
    Ok(relaxation_kernel(&KernelQuery::new(alpha, lambda, t)?)?)
}

pub fn run(p: &KernelValidation, out: &mut Output) -> Result<()> {
    let mut rows = Vec::new();
    let mut worst = 0.0f64;
    for &a in &p.alphas {
        for &l in &p.lambdas {
            for &z in &p.z {
                let ml = kernel(a, l, z)?;
                let c = contour_kernel(&ContourSpec::for_alpha(a), a, l, z)?;
                let err = ((c - ml) / ml).abs();
                worst = worst.max(if err.is_nan() { f64::INFINITY } else { err });
                rows.push(vec![a, l, z, c, ml, err]);
            }
        }
    }
    out.file("kernel_identity.csv", csv(&["alpha", "lambda", "z", "contour", "mittag_leffler", "rel_error"], rows));
    out.key("kernel_identity_max_rel_error", worst);
    out.check("kernel_identity_max_rel_error", worst, Relation::Lt, p.tolerance);

    // |k(t)| ≤ C t^{−1−α} λ^{−2}, C fitted on a coarse grid, checked on a fine one
    let mut rows = Vec::new();
    let mut violations = 0usize;
    let (lo, hi) = p.fit_range;
    for &a in &p.bound_alphas {
        for &l in &p.bound_lambdas {
            let scaled = |t: f64| kernel(a, l, t).map(|k| k.abs() * t.powf(1.0 + a) * l * l);
            let mut c = 0.0f64;
            for t in log_grid(lo, hi, p.fit_points) {
                c = c.max(scaled(t)?);
            }
            let mut margin = 0.0f64;
            for t in log_grid(lo, hi, p.refine_points) {
                let k = kernel(a, l, t)?;
                let bound = c * t.powf(-1.0 - a) / (l * l);
                // the supremum sits on a shared grid point; allow round-off there
                if k.abs() > bound * (1.0 + ROUNDOFF) {
                    violations += 1;
                }
                margin = margin.max(k.abs() / bound);
                rows.push(vec![a, l, t, k, bound]);
            }
            out.key(format!("bound_constant_alpha_{}_lambda_{}", super::tag(a), super::tag(l)), c);
            out.key(format!("bound_margin_alpha_{}_lambda_{}", super::tag(a), super::tag(l)), margin);
        }
    }
    out.file("kernel_bound.csv", csv(&["alpha", "lambda", "t", "kernel", "bound"], rows));
    out.check("kernel_bound_violations", violations as f64, Relation::Le, 0.0);
    out.plot(Plot { title: "contour vs Mittag-Leffler kernel error".into(), file: "kernel_identity.csv".into(), x: 3, ys: vec![6], logx: true, logy: true, abs: false });
    out.plot(Plot { title: "large-time kernel and fitted bound".into(), file: "kernel_bound.csv".into(), x: 3, ys: vec![4, 5], logx: true, logy: true, abs: true });
    Ok(())
}
