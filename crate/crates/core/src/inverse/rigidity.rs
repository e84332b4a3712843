use crate::mlf::{check_alpha, gamma};
use crate::spectral::TimeTrace;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidityOptions {
    /// Discrepancies below `tol_rel · peak` count as zero.
    pub tol_rel: f64,
    /// First eigenvalue, used for the exponential forgetting envelope.
    pub lambda1: f64,
}

impl Default for RigidityOptions {
    fn default() -> Self {
        RigidityOptions { tol_rel: 1e-6, lambda1: std::f64::consts::PI.powi(2) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RigidityVerdict {
    pub window: (f64, f64),
    /// `sup |A − B|` on the window.
    pub trace_norm: f64,
    /// `sup |∂_t^α (A − B)|` on the window.
    pub caputo_norm: f64,
    /// `max(peak A, peak B)` over the whole record.
    pub peak: f64,
    pub distinguished: bool,
    /// `e^{−λ₁(t_lo − support_end)} · sup |A − B|` over the record.
    pub envelope: f64,
    pub below_envelope: bool,
}

/// `(t−a)^e − (t−b)^e` for `a < b ≤ t`, without cancellation when `b − a ≪ t − b`.
fn power_increment(t: f64, a: f64, b: f64, e: f64) -> f64 {
    let y = t - b;
    if y <= 0.0 {
        return (t - a).powf(e);
    }
    y.powf(e) * (e * ((b - a) / y).ln_1p()).exp_m1()
}

/// L1 Caputo derivative of a sampled function at each sample (order in (0,1]).
fn caputo_l1(times: &[f64], v: &[f64], order: f64) -> Vec<f64> {
    let n = times.len();
    let mut out = vec![0.0; n];
    if order == 1.0 {
        for i in 1..n {
            out[i] = (v[i] - v[i - 1]) / (times[i] - times[i - 1]);
        }
        out[0] = out.get(1).copied().unwrap_or(0.0);
        return out;
    }
    let e = 1.0 - order;
    let g = gamma(2.0 - order);
    for i in 1..n {
        let mut acc = 0.0;
        for j in 1..=i {
            let tau = times[j] - times[j - 1];
            acc += (v[j] - v[j - 1]) / tau * power_increment(times[i], times[j - 1], times[j], e);
        }
        out[i] = acc / g;
    }
    out
}

/// Caputo derivative of order `α ∈ (0,2)` of samples starting at `t = 0`.
pub fn caputo_of_samples(times: &[f64], v: &[f64], alpha: f64) -> Result<Vec<f64>> {
    check_alpha(alpha)?;
    if times.first() != Some(&0.0) {
        return Err(Error::Parameter("the record must start at t = 0".into()));
    }
    if alpha <= 1.0 {
        return Ok(caputo_l1(times, v, alpha));
    }
    let mut dv = vec![0.0; v.len()];
    for i in 1..v.len() {
        dv[i] = (v[i] - v[i - 1]) / (times[i] - times[i - 1]);
    }
    dv[0] = dv.get(1).copied().unwrap_or(0.0);
    Ok(caputo_l1(times, &dv, alpha - 1.0))
}

/// Compares two flux records on a window after the excitation has ended: both the
/// trace difference and its Caputo derivative, which carries the whole history.
pub fn window_rigidity_experiment(
    trace_a: &TimeTrace,
    trace_b: &TimeTrace,
    window: (f64, f64),
    alpha: f64,
    support_end: f64,
    opts: &RigidityOptions,
) -> Result<RigidityVerdict> {
    check_alpha(alpha)?;
    if trace_a.times != trace_b.times || trace_a.observation_nodes != trace_b.observation_nodes {
        return Err(Error::Parameter("traces must share times and observation nodes".into()));
    }
    if !(window.1 > window.0) {
        return Err(Error::Parameter(format!("empty window ({}, {})", window.0, window.1)));
    }
    if window.0 <= support_end {
        return Err(Error::Precondition(format!("window starts at {}, inside the input support ending at {support_end}", window.0)));
    }
    let diff = trace_a.axpy(-1.0, trace_b)?;
    let in_window: Vec<usize> = (0..diff.times.len()).filter(|&i| diff.times[i] >= window.0 && diff.times[i] <= window.1).collect();
    if in_window.is_empty() {
        return Err(Error::Parameter("no samples inside the window".into()));
    }
    let mut trace_norm = 0.0f64;
    let mut caputo_norm = 0.0f64;
    let mut overall = 0.0f64;
    for node in 0..diff.observation_nodes.len() {
        let s = diff.series(node);
        let c = caputo_of_samples(&diff.times, &s, alpha)?;
        overall = overall.max(s.iter().fold(0.0, |a, v| a.max(v.abs())));
        for &i in &in_window {
            trace_norm = trace_norm.max(s[i].abs());
            caputo_norm = caputo_norm.max(c[i].abs());
        }
    }
    let peak = trace_a.peak().max(trace_b.peak());
    let tol = opts.tol_rel * peak;
    let envelope = (-opts.lambda1 * (window.0 - support_end)).exp() * overall;
    Ok(RigidityVerdict {
        window,
        trace_norm,
        caputo_norm,
        peak,
        distinguished: trace_norm > tol || caputo_norm > tol,
        envelope,
        below_envelope: trace_norm <= envelope,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn caputo_of_linear_function() {
        // ∂^α t = t^{1−α}/Γ(2−α), exact under L1
        let times: Vec<f64> = (0..=50).map(|i| i as f64 * 0.02).collect();
        let c = caputo_of_samples(&times, &times, 0.4).unwrap();
        let exact = 1.0f64.powf(0.6) / gamma(1.6);
        assert!((c[50] - exact).abs() < 1e-12);
    }

    #[test]
    fn identical_records_are_not_distinguished() {
        let times: Vec<f64> = (0..=100).map(|i| i as f64 * 0.1).collect();
        let values = times.iter().map(|t| vec![(-t).exp()]).collect();
        let a = TimeTrace::new(times, values, vec![0]).unwrap();
        let v = window_rigidity_experiment(&a, &a, (5.0, 10.0), 0.5, 1.0, &RigidityOptions::default()).unwrap();
        assert!(!v.distinguished);
        assert_eq!(v.trace_norm, 0.0);
    }

    #[test]
    fn overlapping_window_rejected() {
        let times: Vec<f64> = (0..=10).map(|i| i as f64).collect();
        let a = TimeTrace::new(times.clone(), times.iter().map(|_| vec![0.0]).collect(), vec![0]).unwrap();
        assert!(matches!(
            window_rigidity_experiment(&a, &a, (0.5, 3.0), 0.5, 1.0, &RigidityOptions::default()),
            Err(Error::Precondition(_))
        ));
    }
}
