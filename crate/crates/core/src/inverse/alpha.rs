use crate::domain::DiscreteOperator;
use crate::input::ExcitationSchedule;
use crate::laplace::linear_fit;
use crate::linalg::BandedLu;
use crate::mlf::{check_alpha, gamma, rgamma};
use crate::spectral::TimeTrace;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayBranch {
    /// `|flux| ~ t^{-1-α}`, `α ≠ 1`.
    PowerLaw,
    /// Super-polynomial decay, read as `α = 1` since `1/Γ(-1) = 0`.
    Exponential,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaFitOptions {
    pub window: (f64, f64),
    /// When set, the window must start at or after `10 τ₂`.
    pub tau2: Option<f64>,
    /// Time origin of the fit, `t ↦ t - origin` (the centroid of `ψ₁` removes
    /// the leading finite-window bias).
    pub origin: f64,
    /// Samples below `floor_rel · peak` are treated as noise.
    pub floor_rel: f64,
    /// Observation node index inside the trace.
    pub node: usize,
}

impl AlphaFitOptions {
    pub fn new(window: (f64, f64)) -> Self {
        AlphaFitOptions { window, tau2: None, origin: 0.0, floor_rel: 1e-12, node: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaEstimate {
    pub alpha_hat: f64,
    /// 95% interval from the regression standard error.
    pub interval: (f64, f64),
    pub branch: DecayBranch,
    /// `A` in `flux ≈ −t^{−1−α} A / Γ(−α)`; zero on the exponential branch.
    pub amplitude: f64,
    pub slope: f64,
    pub rss_power: f64,
    pub rss_exponential: f64,
    pub samples: usize,
    pub window: (f64, f64),
}

/// Fits the late-time decay of a flux trace. Log–log regression gives the slope
/// `−(1+α̂)`; when a log–linear (exponential) model fits better, returns `α̂ = 1`.
pub fn recover_alpha(trace: &TimeTrace, opts: &AlphaFitOptions) -> Result<AlphaEstimate> {
    let (lo, hi) = opts.window;
    if !(hi > lo && lo > opts.origin) {
        return Err(Error::Parameter(format!("fit window ({lo}, {hi}) must be ordered and after the origin")));
    }
    if let Some(t2) = opts.tau2 {
        if lo < 10.0 * t2 {
            return Err(Error::Precondition(format!("fit window starts at {lo}, before 10·tau2 = {}", 10.0 * t2)));
        }
    }
    if opts.node >= trace.observation_nodes.len() {
        return Err(Error::Index(format!("trace has no observation index {}", opts.node)));
    }
    let series = trace.series(opts.node);
    let peak = series.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let floor = opts.floor_rel * peak;
    let in_window: Vec<(f64, f64)> =
        trace.times.iter().zip(&series).filter(|(t, _)| **t >= lo && **t <= hi).map(|(t, v)| (*t, *v)).collect();
    let usable: Vec<(f64, f64)> = in_window.iter().copied().filter(|(_, v)| v.abs() > floor).collect();
    if usable.len() < 8 {
        let last = trace
            .times
            .iter()
            .zip(&series)
            .filter(|(t, v)| **t > opts.origin && v.abs() > 1e3 * floor)
            .map(|(t, _)| *t)
            .fold(0.0, f64::max);
        return Err(Error::InsufficientSignal {
            detail: format!("{} of {} samples in ({lo}, {hi}) exceed the noise floor {floor:.3e}", usable.len(), in_window.len()),
            suggested_horizon: last,
        });
    }
    let sign = usable[usable.len() - 1].1.signum();
    let y: Vec<f64> = usable.iter().map(|(_, v)| v.abs().ln()).collect();
    let xl: Vec<f64> = usable.iter().map(|(t, _)| (t - opts.origin).ln()).collect();
    let xt: Vec<f64> = usable.iter().map(|(t, _)| t - opts.origin).collect();
    let (sl, il) = linear_fit(&xl, &y);
    let (se, ie) = linear_fit(&xt, &y);
    let rss = |x: &[f64], s: f64, i: f64| x.iter().zip(&y).map(|(x, y)| (y - s * x - i).powi(2)).sum::<f64>();
    let (rss_p, rss_e) = (rss(&xl, sl, il), rss(&xt, se, ie));
    let n = usable.len() as f64;
    let mx = xl.iter().sum::<f64>() / n;
    let sxx: f64 = xl.iter().map(|x| (x - mx).powi(2)).sum();
    let se_slope = (rss_p / (n - 2.0) / sxx).sqrt();
    // equal parameter counts, so the Akaike comparison reduces to the residual sums
    if rss_e < rss_p {
        return Ok(AlphaEstimate {
            alpha_hat: 1.0,
            interval: (1.0, 1.0),
            branch: DecayBranch::Exponential,
            amplitude: 0.0,
            slope: se,
            rss_power: rss_p,
            rss_exponential: rss_e,
            samples: usable.len(),
            window: opts.window,
        });
    }
    let alpha_hat = -sl - 1.0;
    // flux ≈ sign·e^{il} t^{sl} = −t^{−1−α} A / Γ(−α)
    let amplitude = -sign * il.exp() * gamma(-alpha_hat);
    Ok(AlphaEstimate {
        alpha_hat,
        interval: (alpha_hat - 1.96 * se_slope, alpha_hat + 1.96 * se_slope),
        branch: DecayBranch::PowerLaw,
        amplitude,
        slope: sl,
        rss_power: rss_p,
        rss_exponential: rss_e,
        samples: usable.len(),
        window: opts.window,
    })
}

/// Standard window `[10τ₂, 100τ₂]`. When the signal is lost there (exponential
/// decay), refits on the last stretch `[e + (s − e)/4, s]` between the input
/// support end `e` and the suggested horizon `s`.
pub fn recover_alpha_adaptive(trace: &TimeTrace, tau2: f64, origin: f64, support_end: f64) -> Result<AlphaEstimate> {
    let mut opts = AlphaFitOptions::new((10.0 * tau2, 100.0 * tau2));
    opts.tau2 = Some(tau2);
    opts.origin = origin;
    match recover_alpha(trace, &opts) {
        Err(Error::InsufficientSignal { suggested_horizon: s, .. }) if s > support_end => {
            let mut fallback = AlphaFitOptions::new((support_end + 0.25 * (s - support_end), s));
            fallback.origin = origin;
            recover_alpha(trace, &fallback)
        }
        other => other,
    }
}

/// Sign structure of `w = A⁻¹G`, `G` the elliptic lift of `χη₁`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HopfReport {
    /// `η₁` was replaced by `−η₁` to make the data nonpositive.
    pub sign_flipped: bool,
    /// Interior values of `w`.
    pub w: Vec<f64>,
    pub boundary_nodes: Vec<usize>,
    /// `a∂_ν w` on `boundary_nodes`.
    pub flux: Vec<f64>,
    /// Nodes where the normal is defined (corners excluded).
    pub checked: Vec<bool>,
    pub max_interior: f64,
    pub min_flux: f64,
}

/// `(lift G, w = A⁻¹ G)` for outer-boundary data `g`.
pub fn lift_and_w(op: &DiscreteOperator, g: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let lu = BandedLu::factor(&op.stiffness)?;
    let lift = op.solve_with(&lu, g, None);
    let rhs: Vec<f64> = lift.iter().zip(&op.mass).map(|(a, r)| a * r).collect();
    Ok((lift, lu.solve(&rhs)))
}

/// Computes `w` for the (nonpositive) lift of `χη₁` and checks `w < 0` in the
/// interior and `a∂_ν w > 0` on the outer boundary.
pub fn hopf_check(op: &DiscreteOperator, schedule: &ExcitationSchedule) -> Result<HopfReport> {
    let data = schedule.boundary_profile(1)?;
    if data.iter().all(|&v| v == 0.0) {
        return Err(Error::Property("identically zero input χη₁".into()));
    }
    if data.iter().any(|&v| v > 0.0) && data.iter().any(|&v| v < 0.0) {
        return Err(Error::Property("χη₁ changes sign".into()));
    }
    let flip = data.iter().any(|&v| v > 0.0);
    let vals: Vec<f64> = data.iter().map(|v| if flip { -v } else { *v }).collect();
    let g = op.boundary_vector(&schedule.gamma_in, &vals)?;
    let (_, w) = lift_and_w(op, &g)?;
    let nodes = op.domain.outer_boundary.clone();
    let flux = op.boundary_flux(&w, &vec![0.0; op.n_boundary()], &nodes)?;
    let checked: Vec<bool> = nodes.iter().map(|&b| op.domain.inward_directions(b).len() == 1).collect();
    let max_interior = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min_flux = flux.iter().zip(&checked).filter(|(_, c)| **c).map(|(f, _)| *f).fold(f64::INFINITY, f64::min);
    let report = HopfReport { sign_flipped: flip, w, boundary_nodes: nodes, flux, checked, max_interior, min_flux };
    if !(report.max_interior < 0.0) {
        return Err(Error::Property(format!("maximum principle violated: max w = {:e}", report.max_interior)));
    }
    if !(report.min_flux > 0.0) {
        return Err(Error::Property(format!("Hopf sign violated: min a∂_ν w = {:e}", report.min_flux)));
    }
    Ok(report)
}

/// Predicted `A = d₁ (∫ψ₁) a∂_ν w` on `Γ_out` for the unflipped schedule data,
/// so that `flux ≈ −t^{−1−α} A / Γ(−α)`.
pub fn predicted_amplitude(op: &DiscreteOperator, schedule: &ExcitationSchedule) -> Result<Vec<f64>> {
    let g = op.boundary_vector(&schedule.gamma_in, &schedule.boundary_profile(1)?)?;
    let (_, w) = lift_and_w(op, &g)?;
    let flux = op.boundary_flux(&w, &vec![0.0; op.n_boundary()], &op.domain.gamma_out)?;
    let scale = schedule.weight(1)? * schedule.bump_mass();
    Ok(flux.into_iter().map(|f| scale * f).collect())
}

/// Leading coefficient `|A| / |Γ(−α)|` of `|flux| ~ c t^{−1−α}`.
pub fn leading_coefficient(alpha: f64, amplitude: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok((amplitude * rgamma(-alpha)).abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law() {
        let times: Vec<f64> = (0..200).map(|i| 10.0 * 1.02f64.powi(i)).collect();
        let values: Vec<Vec<f64>> = times.iter().map(|t| vec![3.0 * t.powf(-1.5)]).collect();
        let trace = TimeTrace::new(times, values, vec![0]).unwrap();
        let est = recover_alpha(&trace, &AlphaFitOptions::new((10.0, 400.0))).unwrap();
        assert!((est.alpha_hat - 0.5).abs() < 1e-12);
        assert_eq!(est.branch, DecayBranch::PowerLaw);
        // −A/Γ(−0.5) = 3
        assert!((-est.amplitude * rgamma(-0.5) - 3.0).abs() < 1e-10);
    }

    #[test]
    fn exponential_branch() {
        let times: Vec<f64> = (0..200).map(|i| 1.0 + 0.02 * i as f64).collect();
        let values: Vec<Vec<f64>> = times.iter().map(|t| vec![(-5.0 * t).exp()]).collect();
        let trace = TimeTrace::new(times, values, vec![0]).unwrap();
        let est = recover_alpha(&trace, &AlphaFitOptions::new((1.0, 5.0))).unwrap();
        assert_eq!(est.alpha_hat, 1.0);
        assert_eq!(est.branch, DecayBranch::Exponential);
    }

    #[test]
    fn floor_gives_insufficient_signal() {
        let times: Vec<f64> = (0..100).map(|i| 0.1 * i as f64 + 0.1).collect();
        let values: Vec<Vec<f64>> = times.iter().map(|t| vec![(-20.0 * t).exp()]).collect();
        let trace = TimeTrace::new(times, values, vec![0]).unwrap();
        match recover_alpha(&trace, &AlphaFitOptions::new((5.0, 9.0))) {
            Err(Error::InsufficientSignal { suggested_horizon, .. }) => assert!(suggested_horizon > 0.5 && suggested_horizon < 5.0),
            other => panic!("{other:?}"),
        }
    }
}
