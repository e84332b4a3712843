use crate::laplace::LaplaceSamples;
use crate::mlf::check_alpha;
use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoleFitOptions {
    pub n_modes: usize,
    /// Polynomial background terms in `s` (1 = constant, 2 = affine) absorbing
    /// the unresolved higher poles.
    pub background: usize,
    /// Extra poles fitted beyond the reported ones to model the spectral tail.
    #[serde(default)]
    pub tail_poles: usize,
    pub max_iter: usize,
}

impl Default for PoleFitOptions {
    fn default() -> Self {
        PoleFitOptions { n_modes: 3, background: 2, tail_poles: 4, max_iter: 300 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralFit {
    /// Ascending `λ̂_k`.
    pub lambdas: Vec<f64>,
    /// `r̂_k(x)` in `V̂/ψ̂ ≈ Σ r_k(x)/(s + λ_k) + background`, `[mode][node]`.
    pub residues: Vec<Vec<f64>>,
    pub nodes: Vec<usize>,
    /// Relative Frobenius residual of the fit.
    pub residual: f64,
    /// Condition number of the final basis matrix.
    pub condition: f64,
    pub starts: usize,
    /// Fitted poles discarded for carrying no signal.
    pub spurious: usize,
}

struct Projection {
    rss: f64,
    coef: DMatrix<f64>,
    cond: f64,
}

fn basis(s: &[f64], lambdas: &[f64], background: usize) -> DMatrix<f64> {
    let k = lambdas.len();
    DMatrix::from_fn(s.len(), k + background, |i, j| if j < k { 1.0 / (s[i] + lambdas[j]) } else { s[i].powi((j - k) as i32) })
}

/// Linear least squares for the residues at fixed poles.
fn project(s: &[f64], y: &DMatrix<f64>, lambdas: &[f64], background: usize) -> Option<Projection> {
    let a = basis(s, lambdas, background);
    // column equilibration before the SVD
    let scales: Vec<f64> = a.column_iter().map(|c| c.norm().max(1e-300)).collect();
    let mut an = a.clone();
    for (j, sc) in scales.iter().enumerate() {
        an.column_mut(j).scale_mut(1.0 / sc);
    }
    let svd = an.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let mut coef = svd.solve(y, 1e-14 * smax).ok()?;
    for (j, sc) in scales.iter().enumerate() {
        coef.row_mut(j).scale_mut(1.0 / sc);
    }
    let r = y - &a * &coef;
    Some(Projection { rss: r.norm_squared(), coef, cond: smax / smin.max(1e-300) })
}

fn residual_vec(s: &[f64], y: &DMatrix<f64>, theta: &[f64], background: usize) -> Option<DVector<f64>> {
    let lambdas: Vec<f64> = theta.iter().map(|t| t.exp()).collect();
    let a = basis(s, &lambdas, background);
    let p = project(s, y, &lambdas, background)?;
    let r = y - a * p.coef;
    Some(DVector::from_column_slice(r.as_slice()))
}

/// Levenberg–Marquardt on `log λ` with the residues projected out.
fn levenberg_marquardt(s: &[f64], y: &DMatrix<f64>, start: &[f64], opts: &PoleFitOptions) -> Option<(Vec<f64>, f64)> {
    let mut theta: Vec<f64> = start.iter().map(|l| l.ln()).collect();
    let mut r = residual_vec(s, y, &theta, opts.background)?;
    let mut cost = r.norm_squared();
    let mut mu = 1e-3;
    let n = theta.len();
    for _ in 0..opts.max_iter {
        let mut jac = DMatrix::zeros(r.len(), n);
        for k in 0..n {
            let h = 1e-6;
            let mut tp = theta.clone();
            tp[k] += h;
            let mut tm = theta.clone();
            tm[k] -= h;
            let d = (residual_vec(s, y, &tp, opts.background)? - residual_vec(s, y, &tm, opts.background)?) / (2.0 * h);
            jac.set_column(k, &d);
        }
        let jtj = jac.transpose() * &jac;
        let g = jac.transpose() * &r;
        let mut improved = false;
        for _ in 0..20 {
            let mut damped = jtj.clone();
            for k in 0..n {
                damped[(k, k)] += mu * jtj[(k, k)].max(1e-12);
            }
            let Some(step) = damped.lu().solve(&(-&g)) else {
                mu *= 10.0;
                continue;
            };
            let trial: Vec<f64> = theta.iter().zip(step.iter()).map(|(t, d)| t + d.clamp(-2.0, 2.0)).collect();
            if let Some(rt) = residual_vec(s, y, &trial, opts.background) {
                let ct = rt.norm_squared();
                if ct < cost {
                    let gain = (cost - ct) / cost.max(1e-300);
                    theta = trial;
                    r = rt;
                    cost = ct;
                    mu = (mu / 3.0).max(1e-12);
                    improved = true;
                    if gain < 1e-15 {
                        return Some((theta.iter().map(|t| t.exp()).collect(), cost));
                    }
                    break;
                }
            }
            mu *= 10.0;
        }
        if !improved {
            break;
        }
    }
    Some((theta.iter().map(|t| t.exp()).collect(), cost))
}

/// Poles and residues of `V̂(p,x)/ψ̂(p)` as a function of `s = p^α` by variable
/// projection, multistarted from knot combinations spanning the sampled `s` range.
pub fn fit_spectral_data(samples: &LaplaceSamples, alpha: f64, psi_hat: &[f64], opts: &PoleFitOptions) -> Result<SpectralFit> {
    check_alpha(alpha)?;
    let np = samples.p_values.len();
    if psi_hat.len() != np {
        return Err(Error::Parameter("psi_hat must have one value per p".into()));
    }
    if psi_hat.iter().any(|&v| v == 0.0 || !v.is_finite()) {
        return Err(Error::Precondition("the input transform vanishes on the p-grid".into()));
    }
    if opts.n_modes == 0 || opts.n_modes > 5 {
        return Err(Error::Parameter(format!("pole count {} must lie in 1..=5", opts.n_modes)));
    }
    let unknowns_per_node = opts.n_modes + opts.tail_poles + opts.background;
    if np < opts.n_modes + opts.tail_poles + unknowns_per_node {
        return Err(Error::Parameter(format!("{np} p-values are too few for {} poles", opts.n_modes)));
    }
    let s: Vec<f64> = samples.p_values.iter().map(|p| p.powf(alpha)).collect();
    let nx = samples.nodes.len();
    let y = DMatrix::from_fn(np, nx, |i, j| samples.values[i][j] / psi_hat[i]);
    let scale = y.norm();
    if scale == 0.0 {
        return Err(Error::Precondition("the sampled transform is identically zero".into()));
    }

    let (smin, smax) = (s[0], s[np - 1]);
    let knots: Vec<f64> = (0..12).map(|i| 0.5 * smin * (8.0 * smax / smin).powf(i as f64 / 11.0)).collect();
    let total = opts.n_modes + opts.tail_poles;
    // Exhaustive knot combinations for the reported poles, then the tail poles are
    // added one at a time, each new pole started from every knot.
    let mut starts: Vec<Vec<f64>> = Vec::new();
    combos(&knots[..8.min(knots.len())], opts.n_modes, 0, &mut Vec::new(), &mut starts);
    let mut n_starts = starts.len();
    let mut best = best_of(&s, &y, &starts, opts)?;
    for _ in opts.n_modes..total {
        let stage: Vec<Vec<f64>> = knots
            .iter()
            .map(|&k| {
                let mut v = best.clone();
                v.push(k);
                v
            })
            .collect();
        n_starts += stage.len();
        best = best_of(&s, &y, &stage, opts)?;
    }
    let mut order: Vec<usize> = (0..best.len()).collect();
    order.sort_by(|&i, &j| best[i].total_cmp(&best[j]));
    let all: Vec<f64> = order.iter().map(|&i| best[i]).collect();
    let proj = project(&s, &y, &all, opts.background).ok_or_else(|| Error::Solver("final projection failed".into()))?;
    // Poles whose largest contribution on the samples is negligible are spurious
    // (pole/zero doublets of the rational fit) and are not reported.
    let ymax = y.amax();
    let significant: Vec<usize> = (0..all.len())
        .filter(|&k| {
            let r = (0..nx).map(|j| proj.coef[(k, j)].abs()).fold(0.0, f64::max);
            r / (smin + all[k]) > 1e-3 * ymax
        })
        .collect();
    let spurious = all.len() - significant.len();
    if significant.len() < opts.n_modes {
        return Err(Error::IllConditioned(format!("only {} of {} fitted poles carry signal", significant.len(), all.len())));
    }
    let lambdas: Vec<f64> = significant[..opts.n_modes].iter().map(|&k| all[k]).collect();
    let check: Vec<f64> = significant.iter().take(opts.n_modes + 1).map(|&k| all[k]).collect();
    for w in check.windows(2) {
        if (w[1] - w[0]) <= 1e-2 * w[1] {
            return Err(Error::IllConditioned(format!("poles cluster near {:.6} and {:.6}; report the cluster mean {:.6}", w[0], w[1], 0.5 * (w[0] + w[1]))));
        }
    }
    let residues = significant[..opts.n_modes].iter().map(|&k| (0..nx).map(|j| proj.coef[(k, j)]).collect()).collect();
    Ok(SpectralFit {
        lambdas,
        residues,
        nodes: samples.nodes.clone(),
        residual: proj.rss.sqrt() / scale,
        condition: proj.cond,
        starts: n_starts,
        spurious,
    })
}

fn best_of(s: &[f64], y: &DMatrix<f64>, starts: &[Vec<f64>], opts: &PoleFitOptions) -> Result<Vec<f64>> {
    let results: Vec<Option<(Vec<f64>, f64)>> = starts.par_iter().map(|st| levenberg_marquardt(s, y, st, opts)).collect();
    results
        .into_iter()
        .flatten()
        .filter(|(l, c)| c.is_finite() && l.iter().all(|v| v.is_finite() && *v > 0.0))
        .fold(None::<(Vec<f64>, f64, bool)>, |acc, (l, c)| {
            let separated = separated(&l);
            match acc {
                // separated pole sets win over clustered ones, then lower cost
                Some(a) if (a.2, -a.1) >= (separated, -c) => Some(a),
                _ => Some((l, c, separated)),
            }
        })
        .map(|b| b.0)
        .ok_or_else(|| Error::Solver("no pole-fit start converged".into()))
}

fn separated(l: &[f64]) -> bool {
    let mut v = l.to_vec();
    v.sort_by(f64::total_cmp);
    v.windows(2).all(|w| w[1] - w[0] > 1e-2 * w[1])
}

fn combos(knots: &[f64], k: usize, from: usize, cur: &mut Vec<f64>, out: &mut Vec<Vec<f64>>) {
    if cur.len() == k {
        out.push(cur.clone());
        return;
    }
    for i in from..knots.len() {
        cur.push(knots[i]);
        combos(knots, k, i + 1, cur, out);
        cur.pop();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::laplace::log_grid;

    #[test]
    fn single_pole_exact() {
        let p = log_grid(0.25, 64.0, 40);
        let values = p.iter().map(|&p| vec![2.5 / (p + 9.87)]).collect();
        let samples = LaplaceSamples { p_values: p.clone(), values, nodes: vec![0], tail_bounds: vec![0.0; 40], p0: 0.0 };
        let opts = PoleFitOptions { n_modes: 1, background: 0, tail_poles: 0, max_iter: 200 };
        let fit = fit_spectral_data(&samples, 1.0, &vec![1.0; 40], &opts).unwrap();
        assert!((fit.lambdas[0] - 9.87).abs() < 1e-6 * 9.87);
        assert!((fit.residues[0][0] - 2.5).abs() < 1e-6);
    }

    #[test]
    fn three_poles_with_background() {
        let p = log_grid(0.25, 64.0, 40);
        let lam = [9.87, 39.5, 88.8];
        let r = [[-2.0, 1.0], [4.0, 3.0], [-6.0, 2.0]];
        let values = p
            .iter()
            .map(|&p| {
                let s = p.powf(0.8);
                (0..2).map(|x| (0..3).map(|k| r[k][x] / (s + lam[k])).sum::<f64>() + 0.1 - 0.01 * s).collect()
            })
            .collect();
        let samples = LaplaceSamples { p_values: p, values, nodes: vec![3, 7], tail_bounds: vec![0.0; 40], p0: 0.0 };
        let fit = fit_spectral_data(&samples, 0.8, &vec![1.0; 40], &PoleFitOptions { tail_poles: 0, ..PoleFitOptions::default() }).unwrap();
        for k in 0..3 {
            assert!((fit.lambdas[k] - lam[k]).abs() < 1e-5 * lam[k], "{:?}", fit.lambdas);
        }
    }
}
