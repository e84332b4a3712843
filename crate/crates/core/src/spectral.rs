//! Generalized eigenpairs of the self-adjoint discrete operator and the
//! Mittag-Leffler representation of forward solutions.

use crate::domain::{DiscreteOperator, FluxOperator};
use crate::input::{ExcitationSchedule, Profile, SourceProfile};
use crate::linalg::{dot, BandedLu};
use crate::mlf::{check_alpha, negative_axis_table, NegativeAxisTable};
use crate::quad::gauss_kronrod;
use crate::{Error, Result};
use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::fmt::Write as _;
use std::sync::Arc;

/// Default retained mode count per spatial dimension.
pub fn default_modes(dim: usize) -> usize {
    if dim == 1 {
        40
    } else {
        100
    }
}

const DENSE_LIMIT: usize = 1200;
const CLUSTER_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub operator: Arc<DiscreteOperator>,
    /// Ascending `λ_k`.
    pub eigenvalues: Vec<f64>,
    /// `φ_k` on the unknowns, `⟨φ_j, φ_k⟩_ρ = δ_jk`.
    pub eigenvectors: Vec<Vec<f64>>,
    /// Outer boundary nodes carrying the flux traces.
    pub trace_nodes: Vec<usize>,
    /// `a∂_ν φ_k` on `trace_nodes`, indexed `[mode][node]`.
    pub flux_traces: Vec<Vec<f64>>,
    /// Index groups of eigenvalues equal within relative `1e-8`.
    pub clusters: Vec<Vec<usize>>,
}

/// Eigenvalue, flux-trace export.
#[derive(Debug, Serialize)]
struct DecompositionJson<'a> {
    count: usize,
    eigenvalues: &'a [f64],
    clusters: &'a [Vec<usize>],
    trace_nodes: &'a [usize],
    flux_traces: &'a [Vec<f64>],
}

/// First `m` generalized eigenpairs of `(stiffness, mass)`.
pub fn eigensolve(op: &DiscreteOperator, m: usize) -> Result<SpectralDecomposition> {
    eigensolve_shared(Arc::new(op.clone()), m)
}

pub fn eigensolve_shared(op: Arc<DiscreteOperator>, m: usize) -> Result<SpectralDecomposition> {
    if op.has_drift() {
        return Err(Error::Unsupported(
            "eigensolve needs a self-adjoint operator (B = 0); use the laplace module for drift".into(),
        ));
    }
    let n = op.n();
    if m == 0 || m > n {
        return Err(Error::Parameter(format!("mode count {m} must lie in 1..={n}")));
    }
    let asym = op.stiffness.asymmetry();
    if asym > 1e-12 {
        return Err(Error::Unsupported(format!("stiffness is not symmetric (asymmetry {asym:e})")));
    }
    let sqrt_m: Vec<f64> = op.mass.iter().map(|r| r.sqrt()).collect();
    let (values, vectors) = if n <= DENSE_LIMIT { dense_pairs(&op, &sqrt_m, m) } else { lanczos_pairs(&op, &sqrt_m, m)? };

    // back to φ = M^{-1/2} y / sqrt(h^d), with a fixed sign
    let scale = 1.0 / op.cell_volume().sqrt();
    let mut eigenvectors = Vec::with_capacity(m);
    for y in vectors {
        let mut phi: Vec<f64> = y.iter().zip(&sqrt_m).map(|(v, s)| v / s * scale).collect();
        let big = phi.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let lead = phi.iter().find(|v| v.abs() > 1e-3 * big).copied().unwrap_or(1.0);
        if lead < 0.0 {
            phi.iter_mut().for_each(|v| *v = -*v);
        }
        eigenvectors.push(phi);
    }
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for (k, &l) in values.iter().enumerate() {
        match clusters.last_mut() {
            Some(c) if (l - values[c[0]]).abs() <= CLUSTER_TOL * l => c.push(k),
            _ => clusters.push(vec![k]),
        }
    }
    let trace_nodes = op.domain.outer_boundary.clone();
    let flux = op.flux_operator(&trace_nodes)?;
    let flux_traces = eigenvectors.iter().map(|phi| flux.apply_interior(phi)).collect();
    let dec = SpectralDecomposition { operator: op, eigenvalues: values, eigenvectors, trace_nodes, flux_traces, clusters };
    dec.check()?;
    Ok(dec)
}

fn dense_pairs(op: &DiscreteOperator, sqrt_m: &[f64], m: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = op.n();
    let mut a = DMatrix::zeros(n, n);
    for r in 0..n {
        for (c, v) in op.stiffness.row(r) {
            a[(r, c)] = v / (sqrt_m[r] * sqrt_m[c]);
        }
    }
    let eig = SymmetricEigen::new(a);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order[..m].iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = order[..m].iter().map(|&i| eig.eigenvectors.column(i).iter().copied().collect()).collect();
    (values, vectors)
}

/// Shift-invert Lanczos with full reorthogonalization on `M^{1/2} K^{-1} M^{1/2}`;
/// the Krylov dimension doubles until the first `m` pairs meet the residual bound.
fn lanczos_pairs(op: &DiscreteOperator, sqrt_m: &[f64], m: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = op.n();
    let lu = BandedLu::factor(&op.stiffness)?;
    let apply = |v: &[f64]| -> Vec<f64> {
        let mut x: Vec<f64> = v.iter().zip(sqrt_m).map(|(a, s)| a * s).collect();
        lu.solve_in_place(&mut x);
        x.iter_mut().zip(sqrt_m).for_each(|(a, s)| *a *= s);
        x
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0x1a2c_705);
    let start: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
    let mut dim = n.min((3 * m).max(m + 60));
    loop {
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(dim);
        let mut alpha = Vec::with_capacity(dim);
        let mut beta: Vec<f64> = Vec::with_capacity(dim);
        let s0 = dot(&start, &start).sqrt();
        basis.push(start.iter().map(|v| v / s0).collect());
        for j in 0..dim {
            let mut w = apply(&basis[j]);
            let a = dot(&w, &basis[j]);
            alpha.push(a);
            for _ in 0..2 {
                for q in &basis {
                    let c = dot(&w, q);
                    w.iter_mut().zip(q).for_each(|(x, y)| *x -= c * y);
                }
            }
            let b = dot(&w, &w).sqrt();
            if j + 1 == dim || b <= 1e-13 * a.abs() {
                break;
            }
            beta.push(b);
            basis.push(w.into_iter().map(|v| v / b).collect());
        }
        let k = alpha.len();
        let mut t = DMatrix::zeros(k, k);
        for i in 0..k {
            t[(i, i)] = alpha[i];
            if i + 1 < k {
                t[(i, i + 1)] = beta[i];
                t[(i + 1, i)] = beta[i];
            }
        }
        let eig = SymmetricEigen::new(t);
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
        let take = m.min(k);
        let mut values = Vec::with_capacity(take);
        let mut vectors = Vec::with_capacity(take);
        for &i in &order[..take] {
            let s = eig.eigenvectors.column(i);
            let mut y = vec![0.0; n];
            for (q, &c) in basis.iter().zip(s.iter()) {
                y.iter_mut().zip(q).for_each(|(a, b)| *a += c * b);
            }
            let ny = dot(&y, &y).sqrt();
            y.iter_mut().for_each(|v| *v /= ny);
            values.push(1.0 / eig.eigenvalues[i]);
            vectors.push(y);
        }
        let converged = take == m
            && values.iter().zip(&vectors).all(|(&l, y)| symmetric_residual(op, sqrt_m, l, y) <= 1e-9 * l);
        if converged || dim == n {
            if take < m {
                return Err(Error::Solver(format!("Lanczos found only {take} of {m} eigenpairs")));
            }
            return Ok((values, vectors));
        }
        dim = n.min(2 * dim);
    }
}

/// `‖A y − λ y‖` for `A = M^{-1/2} K M^{-1/2}`.
fn symmetric_residual(op: &DiscreteOperator, sqrt_m: &[f64], l: f64, y: &[f64]) -> f64 {
    let x: Vec<f64> = y.iter().zip(sqrt_m).map(|(a, s)| a / s).collect();
    let kx = op.stiffness.matvec(&x);
    kx.iter().zip(sqrt_m).zip(y).map(|((k, s), v)| (k / s - l * v).powi(2)).sum::<f64>().sqrt()
}

impl SpectralDecomposition {
    pub fn count(&self) -> usize {
        self.eigenvalues.len()
    }

    fn check(&self) -> Result<()> {
        if !(self.eigenvalues[0] > 0.0) {
            return Err(Error::Property(format!("smallest eigenvalue {} is not positive", self.eigenvalues[0])));
        }
        for k in 0..self.count() {
            let r = self.residual(k);
            if r > 1e-8 * self.eigenvalues[k] {
                return Err(Error::Solver(format!("eigenpair {k} residual {r:e} exceeds 1e-8·λ")));
            }
        }
        Ok(())
    }

    /// `‖Kφ − λMφ‖ / ‖Mφ‖`
    pub fn residual(&self, k: usize) -> f64 {
        let op = &self.operator;
        let phi = &self.eigenvectors[k];
        let kp = op.stiffness.matvec(phi);
        let mp: Vec<f64> = phi.iter().zip(&op.mass).map(|(a, r)| a * r).collect();
        let num = kp.iter().zip(&mp).map(|(a, b)| (a - self.eigenvalues[k] * b).powi(2)).sum::<f64>().sqrt();
        num / dot(&mp, &mp).sqrt()
    }

    /// Largest deviation of the Gram matrix from the identity.
    pub fn orthonormality_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.count() {
            for j in 0..=i {
                let g = self.operator.inner(&self.eigenvectors[i], &self.eigenvectors[j]);
                worst = worst.max((g - if i == j { 1.0 } else { 0.0 }).abs());
            }
        }
        worst
    }

    /// Discrete boundary pairing `⟨g, a∂_νφ_k⟩` for outer-boundary data `g`,
    /// defined through the Green identity `h^d φ_kᵀ K_b g`.
    pub fn coupling(&self, g: &[f64]) -> Vec<f64> {
        let kb = self.operator.boundary_coupling.matvec(g);
        let hd = self.operator.cell_volume();
        self.eigenvectors.iter().map(|phi| hd * dot(phi, &kb)).collect()
    }

    /// `⟨u, φ_k⟩_ρ` for interior values `u`.
    pub fn project(&self, u: &[f64]) -> Vec<f64> {
        self.eigenvectors.iter().map(|phi| self.operator.inner(u, phi)).collect()
    }

    /// `∫ f φ_k dx` for interior values `f`.
    pub fn project_unweighted(&self, f: &[f64]) -> Vec<f64> {
        let hd = self.operator.cell_volume();
        self.eigenvectors.iter().map(|phi| hd * dot(f, phi)).collect()
    }

    pub fn synthesize(&self, coefficients: &[f64]) -> Vec<f64> {
        let mut u = vec![0.0; self.operator.n()];
        for (c, phi) in coefficients.iter().zip(&self.eigenvectors) {
            u.iter_mut().zip(phi).for_each(|(a, b)| *a += c * b);
        }
        u
    }

    /// Flux-trace rows of the observation nodes, `[mode][observation]`.
    pub fn traces_at(&self, nodes: &[usize]) -> Result<Vec<Vec<f64>>> {
        let idx: Vec<usize> = nodes
            .iter()
            .map(|n| {
                self.trace_nodes
                    .iter()
                    .position(|m| m == n)
                    .ok_or_else(|| Error::Index(format!("node {n} has no flux trace")))
            })
            .collect::<Result<_>>()?;
        Ok(self.flux_traces.iter().map(|t| idx.iter().map(|&i| t[i]).collect()).collect())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&DecompositionJson {
            count: self.count(),
            eigenvalues: &self.eigenvalues,
            clusters: &self.clusters,
            trace_nodes: &self.trace_nodes,
            flux_traces: &self.flux_traces,
        })
        .expect("decomposition serializes")
    }
}

/// Boundary flux measurements `a∂_ν u(t, x)` on observation nodes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeTrace {
    pub times: Vec<f64>,
    /// `[time][node]`
    pub values: Vec<Vec<f64>>,
    pub observation_nodes: Vec<usize>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl TimeTrace {
    pub fn new(times: Vec<f64>, values: Vec<Vec<f64>>, observation_nodes: Vec<usize>) -> Result<Self> {
        check_times(&times)?;
        if values.len() != times.len() || values.iter().any(|v| v.len() != observation_nodes.len()) {
            return Err(Error::Parameter("trace values do not match times × nodes".into()));
        }
        if values.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Parameter("trace contains non-finite values".into()));
        }
        Ok(TimeTrace { times, values, observation_nodes, warnings: Vec::new() })
    }

    /// Values at one observation node.
    pub fn series(&self, node_index: usize) -> Vec<f64> {
        self.values.iter().map(|v| v[node_index]).collect()
    }

    pub fn peak(&self) -> f64 {
        self.values.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()))
    }

    /// Pointwise `self + s·other` on a shared grid.
    pub fn axpy(&self, s: f64, other: &TimeTrace) -> Result<TimeTrace> {
        if self.times != other.times || self.observation_nodes != other.observation_nodes {
            return Err(Error::Parameter("traces live on different grids".into()));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + s * y).collect())
            .collect();
        let mut warnings = self.warnings.clone();
        warnings.extend(other.warnings.iter().cloned());
        Ok(TimeTrace { times: self.times.clone(), values, observation_nodes: self.observation_nodes.clone(), warnings })
    }

    /// Long-format CSV `time,node,value`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("time,node,value\n");
        for (t, row) in self.times.iter().zip(&self.values) {
            for (node, v) in self.observation_nodes.iter().zip(row) {
                let _ = writeln!(s, "{t:.17e},{node},{v:.17e}");
            }
        }
        s
    }
}

/// Interior nodal fields at the trace times.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldHistory {
    pub times: Vec<f64>,
    pub fields: Vec<Vec<f64>>,
}

pub(crate) fn check_times(times: &[f64]) -> Result<()> {
    if times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(Error::Parameter("times must be finite and nonnegative".into()));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Parameter("times must be strictly increasing".into()));
    }
    Ok(())
}

/// Which input components drive a Dirichlet forward solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Components {
    All,
    One(usize),
    UpTo(usize),
}

/// `∫ E_{α,1}(-λ(t-s)^α) σ'(s) ds`, the response of `∂^α v + λv = ∂^α σ`.
pub fn step_response(table: &NegativeAxisTable, alpha: f64, lambda: f64, profile: &dyn Profile, t: f64) -> f64 {
    let (lo, hi) = profile.support();
    if t <= lo {
        return 0.0;
    }
    let top = t.min(hi);
    let scale = (profile.value(hi).abs() + profile.value(0.5 * (lo + hi)).abs()).max(1e-300);
    if alpha <= 1.0 {
        // s = t - w^{1/α} removes the endpoint behaviour of (t-s)^α
        let inv = 1.0 / alpha;
        let (wa, wb) = ((t - top).powf(alpha), (t - lo).powf(alpha));
        let f = |w: f64| {
            let s = t - w.powf(inv);
            table.eval(lambda * w) * profile.derivative(s) * inv * w.powf(inv - 1.0)
        };
        gauss_kronrod(f, wa, wb, 1e-13 * scale, 1e-10, 400).value
    } else {
        let f = |s: f64| table.eval(lambda * (t - s).powf(alpha)) * profile.derivative(s);
        gauss_kronrod(f, lo, top, 1e-13 * scale, 1e-10, 400).value
    }
}

struct Lift {
    weight: f64,
    profile: crate::input::StepProfile,
    /// interior values of the elliptic lift of `χη_k`
    field: Vec<f64>,
    /// `d_k · a∂_ν G_k` on the observation nodes
    flux: Vec<f64>,
    /// `d_k C_mk / λ_m`
    modal: Vec<f64>,
}

fn lifts(dec: &SpectralDecomposition, schedule: &ExcitationSchedule, which: Components, flux: &FluxOperator) -> Result<(Vec<Lift>, Vec<String>)> {
    let op = &dec.operator;
    let k_max = schedule.components();
    let ks: Vec<usize> = match which {
        Components::All => (1..=k_max).collect(),
        Components::One(k) => {
            schedule.profile(k)?;
            vec![k]
        }
        Components::UpTo(k) => {
            if k > k_max {
                return Err(Error::Index(format!("component {k} outside 1..={k_max}")));
            }
            (1..=k).collect()
        }
    };
    let lu = BandedLu::factor(&op.stiffness)?;
    let mut out = Vec::new();
    let mut warnings = Vec::new();
    for k in ks {
        let g = op.boundary_vector(&schedule.gamma_in, &schedule.boundary_profile(k)?)?;
        let field = op.solve_with(&lu, &g, None);
        let d = schedule.weight(k)?;
        let c = dec.coupling(&g);
        let modal: Vec<f64> = c.iter().zip(&dec.eigenvalues).map(|(c, l)| d * c / l).collect();
        let head: f64 = c.iter().zip(&dec.eigenvalues).map(|(c, l)| (c / l).powi(2)).sum();
        let total = op.inner(&field, &field);
        let tail = (total - head).max(0.0);
        if tail > 1e-6 * head {
            warnings.push(format!(
                "component {k}: boundary-coupling tail {:.3e} of head beyond {} modes (the lift carries it exactly)",
                tail / head,
                dec.count()
            ));
        }
        let fl = flux.apply(&field, &g).into_iter().map(|v| d * v).collect();
        out.push(Lift { weight: d, profile: *schedule.profile(k)?, field, flux: fl, modal });
    }
    Ok((out, warnings))
}

fn observation_flux(dec: &SpectralDecomposition, nodes: &[usize]) -> Result<(FluxOperator, Vec<Vec<f64>>)> {
    Ok((dec.operator.flux_operator(nodes)?, dec.traces_at(nodes)?))
}

/// Flux trace on `Γ_out` of the Dirichlet problem driven by the selected
/// components of the staircase input, zero initial data.
pub fn forward_dirichlet(
    dec: &SpectralDecomposition,
    schedule: &ExcitationSchedule,
    which: Components,
    alpha: f64,
    times: &[f64],
) -> Result<TimeTrace> {
    Ok(dirichlet_impl(dec, schedule, which, alpha, times, false)?.0)
}

/// As [`forward_dirichlet`], also returning interior fields.
pub fn forward_dirichlet_fields(
    dec: &SpectralDecomposition,
    schedule: &ExcitationSchedule,
    which: Components,
    alpha: f64,
    times: &[f64],
) -> Result<(TimeTrace, FieldHistory)> {
    let (trace, fields) = dirichlet_impl(dec, schedule, which, alpha, times, true)?;
    Ok((trace, FieldHistory { times: times.to_vec(), fields }))
}

fn dirichlet_impl(
    dec: &SpectralDecomposition,
    schedule: &ExcitationSchedule,
    which: Components,
    alpha: f64,
    times: &[f64],
    keep: bool,
) -> Result<(TimeTrace, Vec<Vec<f64>>)> {
    check_alpha(alpha)?;
    check_times(times)?;
    let nodes = dec.operator.domain.gamma_out.clone();
    let (flux, traces) = observation_flux(dec, &nodes)?;
    let (lifts, warnings) = lifts(dec, schedule, which, &flux)?;
    let table = negative_axis_table(alpha, 1.0)?;
    let m = dec.count();
    let rows: Vec<(Vec<f64>, Vec<f64>)> = times
        .par_iter()
        .map(|&t| {
            let mut coef = vec![0.0; m];
            let mut out = vec![0.0; nodes.len()];
            let mut field = if keep { vec![0.0; dec.operator.n()] } else { Vec::new() };
            for lift in &lifts {
                let psi = lift.profile.value(t);
                if psi != 0.0 {
                    out.iter_mut().zip(&lift.flux).for_each(|(o, f)| *o += psi * f);
                    if keep {
                        field.iter_mut().zip(&lift.field).for_each(|(o, g)| *o += lift.weight * psi * g);
                    }
                }
                if t > lift.profile.lo {
                    for (i, c) in coef.iter_mut().enumerate() {
                        *c += lift.modal[i] * step_response(&table, alpha, dec.eigenvalues[i], &lift.profile, t);
                    }
                }
            }
            for (c, tr) in coef.iter().zip(&traces) {
                out.iter_mut().zip(tr).for_each(|(o, f)| *o += c * f);
            }
            if keep {
                for (c, phi) in coef.iter().zip(&dec.eigenvectors) {
                    field.iter_mut().zip(phi).for_each(|(o, p)| *o += c * p);
                }
            }
            (out, field)
        })
        .collect();
    let (values, fields): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
    let mut trace = TimeTrace::new(times.to_vec(), values, nodes)?;
    trace.warnings = warnings;
    Ok((trace, fields))
}

/// Modal coefficients of the source/initial-value problem
/// `ρ∂^α u + 𝒜u = σ(t) f`, `u(0) = u₀` (and `∂_t u(0) = 0` for `α > 1`).
pub fn source_coefficients(
    dec: &SpectralDecomposition,
    sigma: &SourceProfile,
    f_modes: &[f64],
    u0_modes: &[f64],
    alpha: f64,
    t: f64,
    table_ic: &NegativeAxisTable,
    table_src: &NegativeAxisTable,
) -> Vec<f64> {
    let s_t = sigma.value(t);
    (0..dec.count())
        .map(|i| {
            let l = dec.eigenvalues[i];
            let mut c = 0.0;
            if u0_modes[i] != 0.0 {
                c += u0_modes[i] * table_ic.eval(l * t.powf(alpha));
            }
            if f_modes[i] != 0.0 && !sigma.is_zero() {
                // ∫K(t-s)σ(s)ds = (σ(t) - ∫E_{α,1}(-λ(t-s)^α)σ'(s)ds)/λ
                c += f_modes[i] * (s_t - step_response(table_src, alpha, l, sigma, t)) / l;
            }
            c
        })
        .collect()
}

/// Flux trace of the source/initial-value problem; `f` and `u0` are full nodal fields.
pub fn forward_source(
    dec: &SpectralDecomposition,
    sigma: &SourceProfile,
    f: &[f64],
    u0: &[f64],
    alpha: f64,
    times: &[f64],
) -> Result<TimeTrace> {
    Ok(source_impl(dec, sigma, f, u0, alpha, times, false)?.0)
}

pub fn forward_source_fields(
    dec: &SpectralDecomposition,
    sigma: &SourceProfile,
    f: &[f64],
    u0: &[f64],
    alpha: f64,
    times: &[f64],
) -> Result<(TimeTrace, FieldHistory)> {
    let (trace, fields) = source_impl(dec, sigma, f, u0, alpha, times, true)?;
    Ok((trace, FieldHistory { times: times.to_vec(), fields }))
}

/// Rejects nodal data that is nonzero inside the obstacle and returns interior values.
pub fn interior_data(op: &DiscreteOperator, full: &[f64], name: &str) -> Result<Vec<f64>> {
    let dom = &op.domain;
    if full.len() != dom.n_nodes() {
        return Err(Error::Parameter(format!("{name} has {} values, grid has {} nodes", full.len(), dom.n_nodes())));
    }
    let bad: Vec<usize> = (0..full.len()).filter(|&k| dom.obstacle_mask[k] && full[k] != 0.0).collect();
    if !bad.is_empty() {
        return Err(Error::Validation { reason: format!("{name} must vanish on the obstacle"), nodes: bad });
    }
    Ok(op.gather(full))
}

fn source_impl(
    dec: &SpectralDecomposition,
    sigma: &SourceProfile,
    f: &[f64],
    u0: &[f64],
    alpha: f64,
    times: &[f64],
    keep: bool,
) -> Result<(TimeTrace, Vec<Vec<f64>>)> {
    check_alpha(alpha)?;
    check_times(times)?;
    sigma.validate()?;
    let op = &dec.operator;
    let f_modes = dec.project_unweighted(&interior_data(op, f, "source f")?);
    let u0_modes = dec.project(&interior_data(op, u0, "initial value u0")?);
    modal_trace(dec, sigma, &f_modes, &u0_modes, alpha, times, keep)
}

/// Trace from given modal data (`∫fφ_k`, `⟨u₀,φ_k⟩_ρ`).
pub fn forward_modal(
    dec: &SpectralDecomposition,
    sigma: &SourceProfile,
    f_modes: &[f64],
    u0_modes: &[f64],
    alpha: f64,
    times: &[f64],
) -> Result<TimeTrace> {
    check_alpha(alpha)?;
    check_times(times)?;
    sigma.validate()?;
    if f_modes.len() > dec.count() || u0_modes.len() > dec.count() {
        return Err(Error::Parameter("more modal coefficients than retained modes".into()));
    }
    let mut f = f_modes.to_vec();
    f.resize(dec.count(), 0.0);
    let mut u = u0_modes.to_vec();
    u.resize(dec.count(), 0.0);
    Ok(modal_trace(dec, sigma, &f, &u, alpha, times, false)?.0)
}

fn modal_trace(
    dec: &SpectralDecomposition,
    sigma: &SourceProfile,
    f_modes: &[f64],
    u0_modes: &[f64],
    alpha: f64,
    times: &[f64],
    keep: bool,
) -> Result<(TimeTrace, Vec<Vec<f64>>)> {
    let nodes = dec.operator.domain.gamma_out.clone();
    let traces = dec.traces_at(&nodes)?;
    let table_ic = negative_axis_table(alpha, 1.0)?;
    let rows: Vec<(Vec<f64>, Vec<f64>)> = times
        .par_iter()
        .map(|&t| {
            let coef = source_coefficients(dec, sigma, f_modes, u0_modes, alpha, t, &table_ic, &table_ic);
            let mut out = vec![0.0; nodes.len()];
            for (c, tr) in coef.iter().zip(&traces) {
                out.iter_mut().zip(tr).for_each(|(o, f)| *o += c * f);
            }
            let field = if keep { dec.synthesize(&coef) } else { Vec::new() };
            (out, field)
        })
        .collect();
    let (values, fields): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
    Ok((TimeTrace::new(times.to_vec(), values, nodes)?, fields))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{assemble, build_domain, CoefficientField, CoefficientSpec, DomainSpec, FieldSpec};
    use crate::input::{build_schedule, ScheduleSpec};
    use crate::mlf::{ml_real, MLParams};
    use std::f64::consts::PI;

    fn op_1d(cells: usize, spec: &CoefficientSpec) -> DiscreteOperator {
        let d = build_domain(&DomainSpec::interval(cells)).unwrap();
        assemble(&d, &CoefficientField::sample(&d, spec).unwrap()).unwrap()
    }

    #[test]
    fn unit_interval_spectrum() {
        let dec = eigensolve(&op_1d(128, &CoefficientSpec::default()), 5).unwrap();
        for k in 0..5 {
            let exact = ((k + 1) as f64 * PI).powi(2);
            assert!((dec.eigenvalues[k] - exact).abs() < 2e-3 * exact);
            // the right end is the last trace node
            let right = *dec.flux_traces[k].last().unwrap();
            let expect = 2f64.sqrt() * (k + 1) as f64 * PI * if k % 2 == 0 { -1.0 } else { 1.0 };
            assert!((right - expect).abs() < 1e-2 * expect.abs(), "{right} vs {expect}");
        }
        assert!(dec.orthonormality_defect() < 1e-10);
    }

    #[test]
    fn density_scaling() {
        let base = eigensolve(&op_1d(64, &CoefficientSpec::default()), 6).unwrap();
        let spec = CoefficientSpec { rho: FieldSpec::constant(4.0), ..CoefficientSpec::default() };
        let scaled = eigensolve(&op_1d(64, &spec), 6).unwrap();
        for (a, b) in base.eigenvalues.iter().zip(&scaled.eigenvalues) {
            assert!((a / 4.0 - b).abs() < 1e-12 * a);
        }
    }

    #[test]
    fn lanczos_matches_dense() {
        let d = build_domain(&DomainSpec::square(40, None)).unwrap();
        let op = assemble(&d, &CoefficientField::sample(&d, &CoefficientSpec::default()).unwrap()).unwrap();
        let sqrt_m: Vec<f64> = op.mass.iter().map(|r| r.sqrt()).collect();
        let (lz, _) = lanczos_pairs(&op, &sqrt_m, 12).unwrap();
        let (dn, _) = dense_pairs(&op, &sqrt_m, 12);
        for (a, b) in lz.iter().zip(&dn) {
            assert!((a - b).abs() < 1e-9 * b);
        }
        let dec = eigensolve(&op, 6).unwrap();
        // λ_{12} = λ_{21} on the square
        assert_eq!(dec.clusters[1], vec![1, 2]);
    }

    #[test]
    fn coupling_identity() {
        let op = op_1d(64, &CoefficientSpec { a: FieldSpec::Affine { base: 1.0, gradient: vec![0.5] }, ..Default::default() });
        let dec = eigensolve(&op, 10).unwrap();
        let g = op.boundary_vector(&op.domain.gamma_in, &[1.0]).unwrap();
        let lift = op.solve_dirichlet(0.0, &g, None).unwrap();
        let proj = dec.project(&lift);
        let c = dec.coupling(&g);
        for k in 0..5 {
            let rhs = -c[k] / dec.eigenvalues[k];
            assert!((proj[k] - rhs).abs() < 1e-8 * rhs.abs());
        }
    }

    #[test]
    fn single_mode_initial_value() {
        let op = op_1d(64, &CoefficientSpec::default());
        let dec = eigensolve(&op, 8).unwrap();
        let u0 = op.scatter(&dec.eigenvectors[0], &vec![0.0; op.n_boundary()]);
        let f = vec![0.0; op.domain.n_nodes()];
        let times = [0.1, 0.5, 1.0];
        let (_, hist) = forward_source_fields(&dec, &SourceProfile::Zero, &f, &u0, 0.5, &times).unwrap();
        for (t, field) in times.iter().zip(&hist.fields) {
            let c = dec.project(field);
            let e = ml_real(&MLParams::new(0.5, 1.0).unwrap(), -dec.eigenvalues[0] * t.sqrt()).unwrap();
            assert!((c[0] - e).abs() < 1e-12);
            assert!(c[1].abs() < 1e-12);
        }
    }

    #[test]
    fn heat_steady_state_and_linearity() {
        let op = op_1d(64, &CoefficientSpec::default());
        let dec = eigensolve(&op, 40).unwrap();
        let mut spec = ScheduleSpec::new(0.2, 0.4, 2);
        spec.plateaus = Some(vec![0.0, 1.0]);
        let sched = build_schedule(&spec, &op.domain).unwrap();
        let times = [0.3, 0.35, 0.5, 3.0];
        let both = forward_dirichlet(&dec, &sched, Components::All, 1.0, &times).unwrap();
        let a = forward_dirichlet(&dec, &sched, Components::One(1), 1.0, &times).unwrap();
        let b = forward_dirichlet(&dec, &sched, Components::One(2), 1.0, &times).unwrap();
        let sum = a.axpy(1.0, &b).unwrap();
        for (x, y) in both.values.iter().flatten().zip(sum.values.iter().flatten()) {
            assert!((x - y).abs() < 1e-10 * both.peak());
        }
        // steady flux of the linear profile d_2(1 - x) is -d_2 at x = 1
        let d2 = sched.weight(2).unwrap();
        assert!((both.values[3][0] + d2).abs() < 1e-6 * d2);
    }
}
