//! Laplace-domain tools: transforms of sampled traces, resolvent solves,
//! contour realization of the relaxation kernel and weak-solution residuals.

use crate::domain::DiscreteOperator;
use crate::input::{ExcitationSchedule, Profile, SourceProfile};
use crate::linalg::{norm, BandedLu};
use crate::mlf::{check_alpha, C64};
use crate::quad::{gauss_kronrod, GL4_NODES, GL4_WEIGHTS};
use crate::spectral::{interior_data, Components, FieldHistory, TimeTrace};
use crate::{Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt::Write as _;

/// Relative size below which the truncated tail `∫_H^∞` is ignored.
pub const TAIL_CERTIFY: f64 = 1e-12;
/// Accepted relative uncertainty of a power-law tail extension.
pub const TAIL_FIT: f64 = 1e-6;

/// Default p-grid: 40 log-spaced points in `[0.25, 64]`.
pub fn default_p_grid() -> Vec<f64> {
    log_grid(0.25, 64.0, 40)
}

pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LaplaceSamples {
    pub p_values: Vec<f64>,
    /// `[p][node]`
    pub values: Vec<Vec<f64>>,
    pub nodes: Vec<usize>,
    /// Bound on the neglected or extrapolated tail, per p (max over nodes).
    pub tail_bounds: Vec<f64>,
    /// Smallest admissible p recorded for the trace.
    pub p0: f64,
}

impl LaplaceSamples {
    /// p-values below the admissibility threshold.
    pub fn flagged(&self) -> Vec<f64> {
        self.p_values.iter().copied().filter(|&p| p <= self.p0 && self.p0 > 0.0).collect()
    }

    pub fn series(&self, node_index: usize) -> Vec<f64> {
        self.values.iter().map(|v| v[node_index]).collect()
    }

    /// CSV `p,node,real,imag` (transforms at real p are real).
    pub fn to_csv(&self) -> String {
        let mut s = String::from("p,node,real,imag\n");
        for (p, row) in self.p_values.iter().zip(&self.values) {
            for (node, v) in self.nodes.iter().zip(row) {
                let _ = writeln!(s, "{p:.17e},{node},{v:.17e},0");
            }
        }
        s
    }
}

fn check_p_grid(p_values: &[f64]) -> Result<()> {
    if p_values.is_empty() || p_values.iter().any(|p| !(*p > 0.0 && p.is_finite())) {
        return Err(Error::Domain("Laplace variables must be positive and finite".into()));
    }
    if p_values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Parameter("p-values must increase strictly".into()));
    }
    Ok(())
}

/// `∫_0^H e^{-pt} v(t) dt` for samples on `times`, using local cubic
/// interpolation integrated with subdivided 4-point Gauss rules. The value is
/// held constant on `[0, t_0]`.
fn body_integral(times: &[f64], v: &[f64], p: f64) -> f64 {
    let n = times.len();
    let mut total = if times[0] > 0.0 { v[0] * (-(-p * times[0]).exp_m1()) / p } else { 0.0 };
    if n == 1 {
        return total;
    }
    for i in 0..n - 1 {
        let (a, b) = (times[i], times[i + 1]);
        // stencil of up to four neighbours around the interval
        let lo = i.saturating_sub(1).min(n.saturating_sub(4));
        let hi = (lo + 4).min(n);
        let xs = &times[lo..hi];
        let ys = &v[lo..hi];
        let interp = |t: f64| -> f64 {
            let mut s = 0.0;
            for j in 0..xs.len() {
                let mut l = 1.0;
                for k in 0..xs.len() {
                    if k != j {
                        l *= (t - xs[k]) / (xs[j] - xs[k]);
                    }
                }
                s += l * ys[j];
            }
            s
        };
        let pieces = ((2.0 * p * (b - a)).ceil() as usize).max(1);
        let w = (b - a) / pieces as f64;
        for q in 0..pieces {
            let c = a + (q as f64 + 0.5) * w;
            for (x, wt) in GL4_NODES.iter().zip(GL4_WEIGHTS) {
                let t = c + 0.5 * w * x;
                total += 0.5 * w * wt * (-p * t).exp() * interp(t);
            }
        }
    }
    total
}

/// Tail beyond the last sample: `(added value, uncertainty)`.
fn tail(times: &[f64], v: &[f64], p: f64, body: f64) -> std::result::Result<(f64, f64), String> {
    let n = times.len();
    let h = times[n - 1];
    let start = times.iter().position(|&t| t >= 0.8 * h).unwrap_or(0).min(n.saturating_sub(8));
    let (tw, vw) = (&times[start..], &v[start..]);
    let vmax = vw.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let direct = (-p * h).exp() * vmax / p;
    if direct <= TAIL_CERTIFY * body.abs() || vmax == 0.0 {
        return Ok((0.0, direct));
    }
    let sign = vw[vw.len() - 1].signum();
    if tw.len() < 3 || tw[0] <= 0.0 || vw.iter().any(|x| x.signum() != sign || *x == 0.0) {
        return Err(format!("tail bound {direct:.3e} not certified and no power-law extension (sign change or zero)"));
    }
    let xs: Vec<f64> = tw.iter().map(|t| t.ln()).collect();
    let ys: Vec<f64> = vw.iter().map(|x| x.abs().ln()).collect();
    let (slope, icpt) = linear_fit(&xs, &ys);
    let misfit = xs.iter().zip(&ys).map(|(x, y)| (y - slope * x - icpt).abs()).fold(0.0, f64::max);
    if slope > 1e-9 {
        return Err(format!("trace grows like t^{slope:.3} at the horizon; tail {direct:.3e} not certified"));
    }
    let c = icpt.exp();
    let r = (40.0 / p).max(h);
    let ext = gauss_kronrod(|t: f64| (-p * t).exp() * c * t.powf(slope), h, h + r, 0.0, 1e-13, 200).value;
    let value = sign * ext;
    let bound = ext * misfit.exp_m1() + (-p * (h + r)).exp() * c * h.powf(slope) / p;
    if bound > TAIL_FIT * (body + value).abs() {
        return Err(format!("power-law tail extension uncertain ({bound:.3e} vs transform {:.3e})", (body + value).abs()));
    }
    Ok((value, bound))
}

pub(crate) fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Laplace transform of one sampled series with its tail contribution.
pub fn transform_series(times: &[f64], values: &[f64], p: f64) -> Result<(f64, f64)> {
    if times.len() != values.len() || times.is_empty() {
        return Err(Error::Parameter("series needs matching, nonempty times and values".into()));
    }
    let body = body_integral(times, values, p);
    let (t, bound) = tail(times, values, p, body).map_err(|detail| Error::TailRisk { p, detail })?;
    Ok((body + t, bound))
}

pub fn transform(trace: &TimeTrace, p_values: &[f64]) -> Result<LaplaceSamples> {
    check_p_grid(p_values)?;
    let cols: Vec<Vec<f64>> = (0..trace.observation_nodes.len()).map(|i| trace.series(i)).collect();
    let rows: Vec<(Vec<f64>, f64)> = p_values
        .par_iter()
        .map(|&p| {
            let mut row = Vec::with_capacity(cols.len());
            let mut worst = 0.0f64;
            for c in &cols {
                let (v, b) = transform_series(&trace.times, c, p)?;
                row.push(v);
                worst = worst.max(b);
            }
            Ok((row, worst))
        })
        .collect::<Result<_>>()?;
    let (values, tail_bounds) = rows.into_iter().unzip();
    Ok(LaplaceSamples {
        p_values: p_values.to_vec(),
        values,
        nodes: trace.observation_nodes.clone(),
        tail_bounds,
        p0: 0.0,
    })
}

/// Transforms of every interior field component, `[p][unknown]`.
pub fn transform_fields(history: &FieldHistory, p_values: &[f64]) -> Result<Vec<Vec<f64>>> {
    check_p_grid(p_values)?;
    let n = history.fields.first().map_or(0, Vec::len);
    let cols: Vec<Vec<f64>> = (0..n).map(|i| history.fields.iter().map(|f| f[i]).collect()).collect();
    p_values
        .par_iter()
        .map(|&p| cols.iter().map(|c| transform_series(&history.times, c, p).map(|r| r.0)).collect())
        .collect()
}

/// `p₀` of the weak-solution characterization: 0 without drift, otherwise
/// `p₁ = ρ₀^{-1/α} (‖B‖²_∞ + 1)^{1/α}`.
pub fn admissible_p(op: &DiscreteOperator, alpha: f64) -> f64 {
    if !op.has_drift() {
        return 0.0;
    }
    let b = op.coeff.drift_sup();
    op.coeff.rho_min().powf(-1.0 / alpha) * (b * b + 1.0).powf(1.0 / alpha)
}

/// Interior values of `(𝒜 + ρp^α)V = source − (boundary coupling)·g`.
pub fn resolvent_solve(op: &DiscreteOperator, alpha: f64, p: f64, boundary: &[f64], source: Option<&[f64]>) -> Result<Vec<f64>> {
    check_alpha(alpha)?;
    if !(p > 0.0 && p.is_finite()) {
        return Err(Error::Domain(format!("resolvent needs p > 0, got {p}")));
    }
    let p1 = admissible_p(op, alpha);
    if op.has_drift() && p <= p1 {
        return Err(Error::Precondition(format!("with drift the resolvent needs p > p1 = {p1:.6}, got {p}")));
    }
    if boundary.len() != op.n_boundary() {
        return Err(Error::Parameter(format!("boundary data has {} values, expected {}", boundary.len(), op.n_boundary())));
    }
    let lu = BandedLu::factor(&op.shifted(p.powf(alpha)))?;
    Ok(op.solve_with(&lu, boundary, source))
}

/// `a∂_ν V` on `Γ_out` for the resolvent solution.
pub fn resolvent_flux(op: &DiscreteOperator, alpha: f64, p: f64, boundary: &[f64], source: Option<&[f64]>) -> Result<Vec<f64>> {
    let v = resolvent_solve(op, alpha, p, boundary, source)?;
    op.boundary_flux(&v, boundary, &op.domain.gamma_out)
}

/// Outer-boundary vector of `Σ d_k ψ̂_k(p) χη_k` over the selected components.
pub fn schedule_transform(op: &DiscreteOperator, schedule: &ExcitationSchedule, which: Components, p: f64) -> Result<Vec<f64>> {
    let ks: Vec<usize> = match which {
        Components::All => (1..=schedule.components()).collect(),
        Components::One(k) => vec![k],
        Components::UpTo(k) => (1..=k).collect(),
    };
    let mut vals = vec![0.0; schedule.gamma_in.len()];
    for k in ks {
        let amp = schedule.weight(k)? * schedule.profile(k)?.laplace(p);
        vals.iter_mut().zip(schedule.boundary_profile(k)?).for_each(|(v, b)| *v += amp * b);
    }
    op.boundary_vector(&schedule.gamma_in, &vals)
}

/// Contour `p = r₁ + γ(δ, θ₁)`: an arc of radius δ and two rays at angle ±θ₁.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContourSpec {
    pub r1: f64,
    pub theta1: f64,
    /// `None` selects `δ = 1/z`.
    pub delta: Option<f64>,
    /// Segment budget of the adaptive rule on each leg.
    pub nodes_per_leg: usize,
}

impl Default for ContourSpec {
    fn default() -> Self {
        ContourSpec { r1: 0.0, theta1: 0.75 * PI, delta: None, nodes_per_leg: 200 }
    }
}

impl ContourSpec {
    /// Default angle, kept clear of the poles `λ^{1/α} e^{±iπ/α}` when `α > 1`.
    pub fn for_alpha(alpha: f64) -> Self {
        let mut s = ContourSpec::default();
        if alpha > 1.0 {
            s.theta1 = s.theta1.min(0.5 * (0.5 * PI + PI / alpha));
        }
        s
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta1 > 0.5 * PI && self.theta1 < PI) {
            return Err(Error::Parameter(format!("contour angle theta1 must lie in (pi/2, pi), got {}", self.theta1)));
        }
        if let Some(d) = self.delta {
            if !(d > 0.0 && d.is_finite()) {
                return Err(Error::Parameter(format!("contour radius delta must be positive, got {d}")));
            }
        }
        if !self.r1.is_finite() || self.nodes_per_leg == 0 {
            return Err(Error::Parameter("contour shift must be finite and legs need nodes".into()));
        }
        Ok(())
    }
}

/// `(1/2πi) ∫_γ e^{zp} / (λ + p^α) dp`, plus residues of poles the contour
/// leaves on its right.
pub fn contour_kernel(spec: &ContourSpec, alpha: f64, lambda: f64, z: f64) -> Result<f64> {
    spec.validate()?;
    check_alpha(alpha)?;
    if !(z > 0.0 && z.is_finite()) {
        return Err(Error::Domain(format!("contour kernel needs z > 0, got {z}")));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::Parameter(format!("lambda must be nonnegative, got {lambda}")));
    }
    let th = spec.theta1;
    let delta = spec.delta.unwrap_or(1.0 / z);
    let r1 = spec.r1;
    let f = |p: C64| (z * p).exp() / (lambda + p.powf(alpha));
    let shift = |q: C64| C64::new(r1, 0.0) + q;

    // poles of 1/(λ + p^α) on the principal sheet
    let mut residues = 0.0;
    if lambda > 0.0 {
        let m = lambda.powf(1.0 / alpha);
        let mut k = 0i32;
        loop {
            let ang = (PI + 2.0 * PI * k as f64) / alpha;
            if ang >= PI {
                break;
            }
            for s in [1.0, -1.0] {
                let pole = C64::from_polar(m, s * ang);
                let q = pole - C64::new(r1, 0.0);
                let (qa, qr) = (q.arg().abs(), q.norm());
                if (qa - th).abs() < 1e-9 || (qr - delta).abs() < 1e-9 * delta.max(1.0) && qa <= th {
                    return Err(Error::Domain("a pole lies on the contour; adjust delta or theta1".into()));
                }
                if qa < th && qr > delta {
                    residues += ((z * pole).exp() / (alpha * pole.powf(alpha - 1.0))).re;
                }
            }
            k += 1;
        }
    }

    // arc: (1/π) ∫_0^θ Re[f(p) δ e^{iφ}] dφ
    let arc = gauss_kronrod(
        |phi: f64| {
            let q = C64::from_polar(delta, phi);
            (f(shift(q)) * q).re
        },
        0.0,
        th,
        0.0,
        1e-13,
        spec.nodes_per_leg,
    );
    // rays: (1/π) Im ∫_δ^∞ f(r e^{iθ}) e^{iθ} dr, truncated where |e^{zp}| drops by 1e-16
    let c = th.cos();
    let peak = z * (r1 + delta);
    let r_max = ((36.85 + peak - z * r1) / (z * -c)).max(2.0 * delta);
    let e = C64::from_polar(1.0, th);
    let ray = gauss_kronrod(|r: f64| (f(shift(e * r)) * e).im, delta, r_max, 0.0, 1e-13, spec.nodes_per_leg);
    Ok((arc.value + ray.value) / PI + residues)
}

/// Time-domain data behind a field history, for residual checks.
#[derive(Debug, Clone, Default)]
pub struct ResidualInputs<'a> {
    pub schedule: Option<&'a ExcitationSchedule>,
    pub components: Option<Components>,
    pub sigma: SourceProfile,
    pub f: Option<Vec<f64>>,
    pub u0: Option<Vec<f64>>,
}

/// `‖(𝒜 + ρp^α)V(p) − rhs(p)‖ / ‖rhs(p)‖` for the transformed field history,
/// with `rhs = σ̂ f + p^{α−1} ρ u₀ − (coupling)·ĝ`.
pub fn weak_solution_residual(
    op: &DiscreteOperator,
    alpha: f64,
    history: &FieldHistory,
    inputs: &ResidualInputs,
    p_values: &[f64],
) -> Result<Vec<f64>> {
    check_alpha(alpha)?;
    let p1 = admissible_p(op, alpha);
    if let Some(&p) = p_values.iter().find(|&&p| p <= p1 && op.has_drift()) {
        return Err(Error::Precondition(format!("p = {p} is below the admissible p1 = {p1:.6}")));
    }
    if history.fields.iter().any(|f| f.len() != op.n()) {
        return Err(Error::Parameter("field history does not match the operator".into()));
    }
    let f = inputs.f.as_ref().map(|f| interior_data(op, f, "source f")).transpose()?;
    let u0 = inputs.u0.as_ref().map(|u| interior_data(op, u, "initial value u0")).transpose()?;
    let vs = transform_fields(history, p_values)?;
    p_values
        .iter()
        .zip(vs)
        .map(|(&p, v)| {
            let pa = p.powf(alpha);
            let mut rhs = vec![0.0; op.n()];
            if let Some(f) = &f {
                let s = inputs.sigma.laplace(p);
                rhs.iter_mut().zip(f).for_each(|(r, x)| *r += s * x);
            }
            if let Some(u) = &u0 {
                let c = p.powf(alpha - 1.0);
                rhs.iter_mut().zip(u).zip(&op.mass).for_each(|((r, x), m)| *r += c * m * x);
            }
            if let Some(s) = inputs.schedule {
                let g = schedule_transform(op, s, inputs.components.unwrap_or(Components::All), p)?;
                op.boundary_coupling.matvec_add(&g, -1.0, &mut rhs);
            }
            let mut res = op.shifted(pa).matvec(&v);
            res.iter_mut().zip(&rhs).for_each(|(a, b)| *a -= b);
            let (rn, bn) = (norm(&res), norm(&rhs));
            Ok(if bn == 0.0 { rn } else { rn / bn })
        })
        .collect()
}
