use crate::input::{Profile, SourceProfile};
use crate::mlf::{check_alpha, negative_axis_table};
use crate::spectral::{step_response, SpectralDecomposition, TimeTrace};
use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Largest design-matrix condition number accepted before modes are dropped.
pub const MAX_CONDITION: f64 = 1e8;

/// Which of `u₀`, `f` is unknown, and how the measurement separates them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SplitCondition {
    /// `f` known through `∫fφ_k`; recover `u₀`.
    KnownSource { f_modes: Vec<f64> },
    /// `u₀` known through `⟨u₀,φ_k⟩_ρ`; recover `f`.
    KnownInitial { u0_modes: Vec<f64> },
    /// `σ` vanishes on `(0, τ₀)`: `u₀` from the early trace, then `f` from the rest.
    TimeSplit { tau0: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceRecovery {
    /// `⟨u₀, φ_k⟩_ρ`
    pub ic_modes: Vec<f64>,
    /// `∫ f φ_k`
    pub source_modes: Vec<f64>,
    /// Modes kept in each solve (ic, source) after conditioning truncation.
    pub modes_used: (usize, usize),
    /// Column-equilibrated condition numbers (ic, source); zero when not solved.
    pub condition: (f64, f64),
    /// Relative residual of the final fit.
    pub residual: f64,
    pub warnings: Vec<String>,
}

/// Time factors `E_{α,1}(−λ_k t^α)` of the initial-value modes, `[time][mode]`.
fn ic_basis(dec: &SpectralDecomposition, alpha: f64, times: &[f64], m: usize) -> Result<Vec<Vec<f64>>> {
    let table = negative_axis_table(alpha, 1.0)?;
    Ok(times.par_iter().map(|&t| (0..m).map(|k| table.eval(dec.eigenvalues[k] * t.powf(alpha))).collect()).collect())
}

/// Time factors `(σ(t) − ∫E_{α,1}(−λ_k(t−s)^α)σ'(s)ds)/λ_k` of the source modes.
fn source_basis(dec: &SpectralDecomposition, alpha: f64, sigma: &SourceProfile, times: &[f64], m: usize) -> Result<Vec<Vec<f64>>> {
    let table = negative_axis_table(alpha, 1.0)?;
    Ok(times
        .par_iter()
        .map(|&t| {
            (0..m)
                .map(|k| {
                    let l = dec.eigenvalues[k];
                    if sigma.is_zero() {
                        0.0
                    } else {
                        (sigma.value(t) - step_response(&table, alpha, l, sigma, t)) / l
                    }
                })
                .collect()
        })
        .collect())
}

struct Fit {
    coef: Vec<f64>,
    used: usize,
    cond: f64,
}

/// Least squares `Σ_k c_k time[t][k] F_k(x) ≈ data[t][x]` over the rows in `rows`,
/// dropping trailing modes until the condition number is acceptable.
fn modal_lsq(time: &[Vec<f64>], traces: &[Vec<f64>], data: &[Vec<f64>], rows: &[usize], m: usize, warnings: &mut Vec<String>, what: &str) -> Result<Fit> {
    let nx = traces.first().map_or(0, |t| t.len());
    let mut used = m.min(rows.len() * nx);
    if used == 0 {
        return Err(Error::Precondition(format!("no samples available for the {what} fit")));
    }
    let b = DVector::from_iterator(rows.len() * nx, rows.iter().flat_map(|&r| data[r].iter().copied()));
    loop {
        let mut a = DMatrix::from_fn(rows.len() * nx, used, |i, k| time[rows[i / nx]][k] * traces[k][i % nx]);
        let scales: Vec<f64> = a.column_iter().map(|c| c.norm()).collect();
        if let Some(k) = scales.iter().position(|&s| s == 0.0) {
            return Err(Error::IllConditioned(format!("{what} mode {} has no signal on the observation set", k + 1)));
        }
        for (j, s) in scales.iter().enumerate() {
            a.column_mut(j).scale_mut(1.0 / s);
        }
        let svd = a.svd(true, true);
        let cond = svd.singular_values.max() / svd.singular_values.min();
        if cond > MAX_CONDITION && used > 1 {
            warnings.push(format!("{what} design with {used} modes has condition {cond:.2e}; dropping mode {used}"));
            used -= 1;
            continue;
        }
        let x = svd.solve(&b, 0.0).map_err(|e| Error::Solver(e.to_string()))?;
        let mut coef: Vec<f64> = x.iter().zip(&scales).map(|(v, s)| v / s).collect();
        coef.resize(m, 0.0);
        return Ok(Fit { coef, used, cond });
    }
}

fn subtract(data: &mut [Vec<f64>], time: &[Vec<f64>], traces: &[Vec<f64>], coef: &[f64]) {
    for (row, tf) in data.iter_mut().zip(time) {
        for (k, c) in coef.iter().enumerate().filter(|(_, c)| **c != 0.0) {
            row.iter_mut().zip(&traces[k]).for_each(|(d, f)| *d -= c * tf[k] * f);
        }
    }
}

/// Known coefficients padded to `m`, and the number of modes actually needed.
fn known(modes: &[f64], m: usize, count: usize) -> Result<(Vec<f64>, usize)> {
    if modes.len() > count {
        return Err(Error::Parameter(format!("{} known coefficients exceed the {count} retained modes", modes.len())));
    }
    let needed = modes.iter().rposition(|&v| v != 0.0).map_or(0, |i| i + 1);
    let mut v = modes.to_vec();
    v.resize(m.max(modes.len()), 0.0);
    Ok((v, needed))
}

/// Recovers the first `n_modes` coefficients of the unknown initial value and/or
/// source from a flux trace, given the spectral data.
pub fn recover_sources(
    trace: &TimeTrace,
    dec: &SpectralDecomposition,
    alpha: f64,
    sigma: &SourceProfile,
    split: &SplitCondition,
    n_modes: usize,
) -> Result<SourceRecovery> {
    check_alpha(alpha)?;
    sigma.validate()?;
    if n_modes == 0 || n_modes > dec.count() {
        return Err(Error::Parameter(format!("n_modes must lie in 1..={}", dec.count())));
    }
    let count = dec.count();
    let traces = dec.traces_at(&trace.observation_nodes)?;
    let times = &trace.times;
    let mut data = trace.values.clone();
    let all: Vec<usize> = (0..times.len()).collect();
    let mut warnings = Vec::new();
    let (ic, src, used, cond) = match split {
        SplitCondition::KnownSource { f_modes } => {
            let (f, needed) = known(f_modes, n_modes, count)?;
            subtract(&mut data, &source_basis(dec, alpha, sigma, times, needed)?, &traces, &f[..needed]);
            let basis = ic_basis(dec, alpha, times, n_modes)?;
            let fit = modal_lsq(&basis, &traces, &data, &all, n_modes, &mut warnings, "initial value")?;
            subtract(&mut data, &basis, &traces, &fit.coef);
            (fit.coef, f[..n_modes].to_vec(), (fit.used, 0), (fit.cond, 0.0))
        }
        SplitCondition::KnownInitial { u0_modes } => {
            if sigma.is_zero() {
                return Err(Error::Precondition("source recovery needs a nonzero σ".into()));
            }
            let (u, needed) = known(u0_modes, n_modes, count)?;
            subtract(&mut data, &ic_basis(dec, alpha, times, needed)?, &traces, &u[..needed]);
            let basis = source_basis(dec, alpha, sigma, times, n_modes)?;
            let fit = modal_lsq(&basis, &traces, &data, &all, n_modes, &mut warnings, "source")?;
            subtract(&mut data, &basis, &traces, &fit.coef);
            (u[..n_modes].to_vec(), fit.coef, (0, fit.used), (0.0, fit.cond))
        }
        SplitCondition::TimeSplit { tau0 } => {
            let (lo, _) = sigma.support();
            if !sigma.is_zero() && lo < *tau0 {
                return Err(Error::Precondition(format!("σ starts at {lo}, inside the initial-value window (0, {tau0})")));
            }
            let early: Vec<usize> = all.iter().copied().filter(|&i| times[i] <= *tau0).collect();
            let late: Vec<usize> = all.iter().copied().filter(|&i| times[i] > *tau0).collect();
            let ib = ic_basis(dec, alpha, times, n_modes)?;
            let fic = modal_lsq(&ib, &traces, &data, &early, n_modes, &mut warnings, "initial value")?;
            subtract(&mut data, &ib, &traces, &fic.coef);
            let fsrc = if sigma.is_zero() {
                Fit { coef: vec![0.0; n_modes], used: 0, cond: 0.0 }
            } else {
                let sb = source_basis(dec, alpha, sigma, times, n_modes)?;
                let fit = modal_lsq(&sb, &traces, &data, &late, n_modes, &mut warnings, "source")?;
                subtract(&mut data, &sb, &traces, &fit.coef);
                fit
            };
            (fic.coef, fsrc.coef, (fic.used, fsrc.used), (fic.cond, fsrc.cond))
        }
    };
    let num: f64 = data.iter().flatten().map(|v| v * v).sum();
    let den: f64 = trace.values.iter().flatten().map(|v| v * v).sum();
    Ok(SourceRecovery {
        ic_modes: ic,
        source_modes: src,
        modes_used: used,
        condition: cond,
        residual: if den > 0.0 { (num / den).sqrt() } else { 0.0 },
        warnings,
    })
}
