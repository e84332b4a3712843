//! L1 time stepping for the Caputo problem with `0 < α ≤ 1`.

use crate::domain::DiscreteOperator;
use crate::input::{ExcitationSchedule, Profile, SourceProfile};
use crate::linalg::{conjugate_gradient, BandedLu};
use crate::mlf::gamma;
use crate::spectral::{interior_data, Components, FieldHistory, TimeTrace};
use crate::{Error, Result};

/// Above this many unknowns the per-step systems go to conjugate gradients.
const DIRECT_LIMIT: usize = 2000;

/// Time mesh plus the L1 convolution weights
/// `b_{n,j} = ((t_n - t_{j-1})^{1-α} - (t_n - t_j)^{1-α}) / (Γ(2-α) τ_j)`,
/// so that `∂^α u(t_n) ≈ Σ_j b_{n,j} (u_j - u_{j-1})`.
#[derive(Debug, Clone)]
pub struct SteppingPlan {
    pub alpha: f64,
    pub horizon: f64,
    /// `t_0 = 0 < t_1 < … < t_N = horizon`
    pub mesh: Vec<f64>,
    /// Row `n-1` holds `b_{n,1..=n}`.
    pub history_weights: Vec<Vec<f64>>,
}

impl SteppingPlan {
    /// `t_n = T (n/N)^{2/α}`, clustering steps at `t = 0`.
    pub fn graded(alpha: f64, horizon: f64, steps: usize) -> Result<Self> {
        Self::with_grading(alpha, horizon, steps, 2.0 / alpha)
    }

    pub fn uniform(alpha: f64, horizon: f64, steps: usize) -> Result<Self> {
        Self::with_grading(alpha, horizon, steps, 1.0)
    }

    pub fn with_grading(alpha: f64, horizon: f64, steps: usize, grading: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::Unsupported(format!("the L1 stepper needs 0 < alpha <= 1, got {alpha}")));
        }
        if !(horizon > 0.0 && horizon.is_finite()) || steps == 0 || !(grading >= 1.0) {
            return Err(Error::Parameter(format!(
                "invalid stepping plan: horizon {horizon}, steps {steps}, grading {grading}"
            )));
        }
        let n = steps as f64;
        let mesh: Vec<f64> = (0..=steps).map(|i| horizon * (i as f64 / n).powf(grading)).collect();
        Self::on_mesh(alpha, mesh)
    }

    pub fn on_mesh(alpha: f64, mesh: Vec<f64>) -> Result<Self> {
        if mesh.len() < 2 || mesh[0] != 0.0 || mesh.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Parameter("mesh must start at 0 and increase strictly".into()));
        }
        let g = gamma(2.0 - alpha);
        let e = 1.0 - alpha;
        let mut history_weights = Vec::with_capacity(mesh.len() - 1);
        for n in 1..mesh.len() {
            let tn = mesh[n];
            let row: Vec<f64> = (1..=n)
                .map(|j| {
                    let tau = mesh[j] - mesh[j - 1];
                    if j == n {
                        return tau.powf(e) / (g * tau);
                    }
                    // x^e - y^e without cancellation for short far cells
                    let y = tn - mesh[j];
                    y.powf(e) * (e * (tau / y).ln_1p()).exp_m1() / (g * tau)
                })
                .collect();
            // weights are cell averages of the kernel (t_n - s)^{-α}/Γ(1-α): positive, growing toward s = t_n
            let ok = row.iter().all(|&b| b >= 0.0 && b.is_finite())
                && row[n - 1] > 0.0
                && (alpha == 1.0 || row.windows(2).all(|w| w[0] <= w[1] * (1.0 + 1e-12)));
            if !ok {
                return Err(Error::Construction(format!("L1 weights lose monotonicity at step {n}")));
            }
            history_weights.push(row);
        }
        Ok(SteppingPlan { alpha, horizon: *mesh.last().expect("nonempty"), mesh, history_weights })
    }

    pub fn steps(&self) -> usize {
        self.mesh.len() - 1
    }
}

/// Data of a forward run; absent entries are zero.
#[derive(Debug, Clone, Default)]
pub struct StepperInputs<'a> {
    pub schedule: Option<&'a ExcitationSchedule>,
    pub components: Option<Components>,
    pub sigma: SourceProfile,
    /// Full nodal source field `f`.
    pub f: Option<Vec<f64>>,
    /// Full nodal initial value `u₀`.
    pub u0: Option<Vec<f64>>,
}

enum Linear {
    Direct(BandedLu),
    Iterative(crate::linalg::Csr),
}

impl Linear {
    fn solve(&self, rhs: &[f64], guess: &[f64]) -> Result<Vec<f64>> {
        match self {
            Linear::Direct(lu) => Ok(lu.solve(rhs)),
            Linear::Iterative(a) => {
                // CG on the correction keeps the warm start
                let r0 = a.matvec(guess);
                let res: Vec<f64> = rhs.iter().zip(&r0).map(|(b, r)| b - r).collect();
                let out = conjugate_gradient(a, &res, 1e-12, 20 * a.rows)?;
                Ok(guess.iter().zip(&out.x).map(|(g, d)| g + d).collect())
            }
        }
    }
}

/// Boundary values of the selected schedule components at time `t`.
fn boundary_values(op: &DiscreteOperator, inputs: &StepperInputs, t: f64) -> Result<Vec<f64>> {
    let Some(s) = inputs.schedule else {
        return Ok(vec![0.0; op.n_boundary()]);
    };
    let which = inputs.components.unwrap_or(Components::All);
    let ks: Vec<usize> = match which {
        Components::All => (1..=s.components()).collect(),
        Components::One(k) => vec![k],
        Components::UpTo(k) => (1..=k).collect(),
    };
    let mut vals = vec![0.0; s.gamma_in.len()];
    for k in ks {
        let amp = s.weight(k)? * s.smooth_step(k, t)?;
        if amp != 0.0 {
            vals.iter_mut().zip(s.boundary_profile(k)?).for_each(|(v, b)| *v += amp * b);
        }
    }
    op.boundary_vector(&s.gamma_in, &vals)
}

/// Runs the implicit L1 scheme and returns the `Γ_out` flux trace at every mesh
/// time together with the interior fields.
pub fn step_solve(op: &DiscreteOperator, plan: &SteppingPlan, inputs: &StepperInputs) -> Result<(TimeTrace, FieldHistory)> {
    inputs.sigma.validate()?;
    let n = op.n();
    let f = match &inputs.f {
        Some(f) => Some(interior_data(op, f, "source f")?),
        None => None,
    };
    let u0 = match &inputs.u0 {
        Some(u) => interior_data(op, u, "initial value u0")?,
        None => vec![0.0; n],
    };
    let nodes = op.domain.gamma_out.clone();
    let flux = op.flux_operator(&nodes)?;
    let g0 = boundary_values(op, inputs, 0.0)?;
    let mut fields = vec![u0.clone()];
    let mut values = vec![flux.apply(&u0, &g0)];
    // increments u_j - u_{j-1}, scaled by ρ, reused by every later step
    let mut incr: Vec<Vec<f64>> = Vec::with_capacity(plan.steps());
    let mut prev = u0;
    let mut cached: Option<(f64, Linear)> = None;
    for step in 1..=plan.steps() {
        let t = plan.mesh[step];
        let w = &plan.history_weights[step - 1];
        let lead = w[step - 1];
        let g = boundary_values(op, inputs, t)?;
        let mut rhs = vec![0.0; n];
        if let Some(f) = &f {
            let s = inputs.sigma.value(t);
            if s != 0.0 {
                rhs.iter_mut().zip(f).for_each(|(r, v)| *r += s * v);
            }
        }
        op.boundary_coupling.matvec_add(&g, -1.0, &mut rhs);
        // memory: -M Σ_{j<n} b_{n,j}(u_j - u_{j-1}) + b_{n,n} M u_{n-1}
        let mut hist = vec![0.0; n];
        for (d, &b) in incr.iter().zip(w) {
            hist.iter_mut().zip(d).for_each(|(h, v)| *h += b * v);
        }
        for i in 0..n {
            rhs[i] += lead * op.mass[i] * prev[i] - hist[i];
        }
        let reuse = matches!(&cached, Some((l, _)) if (l - lead).abs() <= 1e-14 * lead);
        if !reuse {
            let a = op.shifted(lead);
            let lin = if n <= DIRECT_LIMIT { Linear::Direct(BandedLu::factor(&a)?) } else { Linear::Iterative(a) };
            cached = Some((lead, lin));
        }
        let (_, lin) = cached.as_ref().expect("factor cached");
        let u = lin.solve(&rhs, &prev).map_err(|e| Error::Solver(format!("step {step} (t = {t}): {e}")))?;
        if u.iter().any(|v| !v.is_finite()) {
            return Err(Error::Solver(format!("non-finite solution at step {step} (t = {t})")));
        }
        incr.push(u.iter().zip(&prev).zip(&op.mass).map(|((a, b), r)| r * (a - b)).collect());
        values.push(flux.apply(&u, &g));
        fields.push(u.clone());
        prev = u;
    }
    let trace = TimeTrace::new(plan.mesh.clone(), values, nodes)?;
    Ok((trace, FieldHistory { times: plan.mesh.clone(), fields }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{assemble, build_domain, CoefficientField, CoefficientSpec, DomainSpec};
    use crate::mlf::{ml_real, MLParams};
    use crate::spectral::eigensolve;

    fn op_1d(cells: usize) -> DiscreteOperator {
        let d = build_domain(&DomainSpec::interval(cells)).unwrap();
        assemble(&d, &CoefficientField::sample(&d, &CoefficientSpec::default()).unwrap()).unwrap()
    }

    #[test]
    fn weights_reduce_to_backward_euler() {
        let p = SteppingPlan::uniform(1.0, 1.0, 10).unwrap();
        let last = p.history_weights.last().unwrap();
        assert!((last[9] - 10.0).abs() < 1e-12);
        assert!(last[..9].iter().all(|&b| b == 0.0));
        assert!(SteppingPlan::uniform(1.2, 1.0, 10).is_err());
    }

    #[test]
    fn weights_integrate_kernel() {
        // Σ_j b_{n,j} τ_j = ∫_0^{t_n} (t_n-s)^{-α}/Γ(1-α) ds = t_n^{1-α}/Γ(2-α)
        let p = SteppingPlan::graded(0.5, 2.0, 64).unwrap();
        let n = 64;
        let s: f64 = (1..=n).map(|j| p.history_weights[n - 1][j - 1] * (p.mesh[j] - p.mesh[j - 1])).sum();
        assert!((s - 2f64.sqrt() / gamma(1.5)).abs() < 1e-12);
    }

    fn mode_error(steps: usize) -> f64 {
        let op = op_1d(32);
        let dec = eigensolve(&op, 3).unwrap();
        let u0 = op.scatter(&dec.eigenvectors[0], &vec![0.0; op.n_boundary()]);
        let plan = SteppingPlan::graded(0.5, 1.0, steps).unwrap();
        let inputs = StepperInputs { u0: Some(u0), ..Default::default() };
        let (_, hist) = step_solve(&op, &plan, &inputs).unwrap();
        let p = MLParams::new(0.5, 1.0).unwrap();
        hist.times
            .iter()
            .zip(&hist.fields)
            .filter(|(t, _)| **t >= 0.1)
            .map(|(t, u)| {
                let exact = ml_real(&p, -dec.eigenvalues[0] * t.sqrt()).unwrap();
                (dec.project(u)[0] - exact).abs() / exact
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn single_mode_against_mittag_leffler() {
        let e1 = mode_error(256);
        let e2 = mode_error(512);
        assert!(e2 < 0.01);
        assert!(e1 / e2 >= 2f64.powf(1.5) * 0.8, "ratio {}", e1 / e2);
    }

    #[test]
    fn zero_data_stays_zero() {
        let op = op_1d(16);
        let plan = SteppingPlan::uniform(0.7, 1.0, 20).unwrap();
        let (trace, _) = step_solve(&op, &plan, &StepperInputs::default()).unwrap();
        assert!(trace.values.iter().flatten().all(|&v| v == 0.0));
    }
}
