//! Mittag-Leffler functions, fractional relaxation kernels and their Laplace
//! transforms.
//!
//! Real arguments are evaluated by the power series for `|z| <= 1`, by the
//! asymptotic expansion when `|z| >= 50` and five terms already reach double
//! precision, and otherwise by integrating along the branch cut of the Hankel
//! representation and adding the pole residues explicitly.

mod gamma;

pub use gamma::{cos_pi, gamma, ln_gamma, rgamma, sin_pi};

use crate::quad::{exp_sinh, tanh_sinh, QuadValue};
use crate::{Error, Result};
use nalgebra::Complex;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

pub type C64 = Complex<f64>;

const QUAD_TOL: f64 = 1e-14;
const SERIES_RADIUS: f64 = 1.0;
const ASYMPTOTIC_RADIUS: f64 = 50.0;
const EXP_LIMIT: f64 = 709.0;

/// Index pair (β₁, β₂) of `E_{β₁,β₂}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MLParams {
    pub beta1: f64,
    pub beta2: f64,
}

impl MLParams {
    pub fn new(beta1: f64, beta2: f64) -> Result<Self> {
        let p = MLParams { beta1, beta2 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta1 > 0.0 && self.beta1.is_finite()) || !(self.beta2 > 0.0 && self.beta2.is_finite()) {
            return Err(Error::Parameter(format!(
                "Mittag-Leffler indices must be positive, got ({}, {})",
                self.beta1, self.beta2
            )));
        }
        Ok(())
    }
}

/// Arguments of the relaxation kernel `t^(α-1) E_{α,α}(-λ t^α)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelQuery {
    pub alpha: f64,
    pub lambda: f64,
    pub t: f64,
}

impl KernelQuery {
    pub fn new(alpha: f64, lambda: f64, t: f64) -> Result<Self> {
        let q = KernelQuery { alpha, lambda, t };
        q.validate()?;
        Ok(q)
    }

    pub fn validate(&self) -> Result<()> {
        check_alpha(self.alpha)?;
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::Parameter(format!("lambda must be positive, got {}", self.lambda)));
        }
        if !(self.t >= 0.0 && self.t.is_finite()) {
            return Err(Error::Parameter(format!("t must be nonnegative, got {}", self.t)));
        }
        Ok(())
    }
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 2.0) {
        return Err(Error::Parameter(format!("alpha must lie in (0, 2), got {alpha}")));
    }
    Ok(())
}

/// `E_{β₁,β₂}(z)` for real or complex `z`.
pub fn ml_eval(params: &MLParams, z: impl Into<C64>) -> Result<C64> {
    params.validate()?;
    let z = z.into();
    if !(z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::Parameter("Mittag-Leffler argument must be finite".into()));
    }
    if z.im == 0.0 {
        return ml_core(params.beta1, params.beta2, z.re).map(C64::from);
    }
    ml_complex(params.beta1, params.beta2, z)
}

/// `E_{β₁,β₂}(x)` on the real line.
pub fn ml_real(params: &MLParams, x: f64) -> Result<f64> {
    params.validate()?;
    if !x.is_finite() {
        return Err(Error::Parameter("Mittag-Leffler argument must be finite".into()));
    }
    ml_core(params.beta1, params.beta2, x)
}

fn overflow(a: f64, b: f64, x: f64) -> Error {
    Error::Overflow(format!("E_{{{a},{b}}}({x}) exceeds the double range"))
}

fn ml_core(a: f64, b: f64, x: f64) -> Result<f64> {
    if x == 0.0 {
        return Ok(rgamma(b));
    }
    if a == 1.0 && b == 1.0 {
        return if x > EXP_LIMIT { Err(overflow(a, b, x)) } else { Ok(x.exp()) };
    }
    if x.abs() <= SERIES_RADIUS {
        return Ok(series(a, b, C64::from(x)).re);
    }
    if x > 0.0 && x.powf(1.0 / a) > EXP_LIMIT {
        return Err(overflow(a, b, x));
    }
    if a >= 2.0 {
        return Ok(reduce_index(a, b, C64::from(x))?.re);
    }
    if a == 1.0 {
        return Ok(ml_unit_index(b, C64::from(x))?.re);
    }
    if b >= 1.0 + a {
        return Ok((ml_core(a, b - a, x)? - rgamma(b - a)) / x);
    }
    if x.abs() >= ASYMPTOTIC_RADIUS {
        if let Some(v) = asymptotic_real(a, b, x) {
            return Ok(v);
        }
    }
    let v = hankel_real(a, b, x);
    if !v.is_finite() {
        return Err(overflow(a, b, x));
    }
    Ok(v)
}

fn ml_complex(a: f64, b: f64, z: C64) -> Result<C64> {
    if z.im == 0.0 {
        return ml_core(a, b, z.re).map(C64::from);
    }
    if z.norm() <= SERIES_RADIUS {
        return Ok(series(a, b, z));
    }
    if a >= 2.0 {
        return reduce_index(a, b, z);
    }
    if a == 1.0 {
        return ml_unit_index(b, z);
    }
    if b >= 1.0 + a {
        return Ok((ml_complex(a, b - a, z)? - rgamma(b - a)) / z);
    }
    hankel_complex(a, b, z)
}

fn series(a: f64, b: f64, z: C64) -> C64 {
    let mut sum = C64::new(0.0, 0.0);
    let mut zk = C64::new(1.0, 0.0);
    let mut k = 0usize;
    loop {
        let arg = a * k as f64 + b;
        let term = zk * rgamma(arg);
        sum += term;
        if arg > 3.0 && term.norm() <= 1e-18 * sum.norm().max(1e-300) {
            break;
        }
        if k > 4000 {
            break;
        }
        zk *= z;
        k += 1;
    }
    sum
}

/// `E_{a,b}(z) = (1/m) Σ_j E_{a/m,b}(z^{1/m} e^{2πij/m})`, used for `a >= 2`.
fn reduce_index(a: f64, b: f64, z: C64) -> Result<C64> {
    let m = (a / 2.0).floor() as usize + 1;
    let root = z.powf(1.0 / m as f64);
    let mut sum = C64::new(0.0, 0.0);
    for j in 0..m {
        let w = root * C64::from_polar(1.0, 2.0 * PI * j as f64 / m as f64);
        sum += ml_complex(a / m as f64, b, w)?;
    }
    Ok(sum / m as f64)
}

/// `E_{1,b}(z)`: exponential, an integral for `b > 1`, and the recurrence below 1.
fn ml_unit_index(b: f64, z: C64) -> Result<C64> {
    if z.re > EXP_LIMIT {
        return Err(overflow(1.0, b, z.re));
    }
    if b == 1.0 {
        return Ok(z.exp());
    }
    if b < 1.0 {
        return Ok(ml_unit_index(b + 1.0, z)? * z + rgamma(b));
    }
    if b == 2.0 && z.im == 0.0 {
        return Ok(C64::from(z.re.exp_m1() / z.re));
    }
    let r = tanh_sinh(|t, _, one_minus| z.scale(t).exp() * one_minus.powf(b - 2.0), 0.0, 1.0, QUAD_TOL);
    Ok(r.value * rgamma(b - 1.0))
}

/// Residues of `e^s s^{a-b} / (s^a - z)` at the poles on the principal sheet.
fn pole_residues(a: f64, b: f64, z: C64) -> Result<C64> {
    let mut total = C64::new(0.0, 0.0);
    let rho = z.norm().powf(1.0 / a);
    let arg = z.arg();
    for k in -1i32..=1 {
        let theta = (arg + 2.0 * PI * k as f64) / a;
        if theta.abs() >= PI {
            if (theta.abs() - PI).abs() < 1e-9 {
                return Err(Error::Domain(format!("pole of E_{{{a},{b}}}({z}) lies on the branch cut")));
            }
            continue;
        }
        let s = C64::from_polar(rho, theta);
        if s.re > EXP_LIMIT {
            return Err(overflow(a, b, z.re));
        }
        total += s.powf(1.0 - b) * s.exp() / a;
    }
    Ok(total)
}

/// `∫_0^∞ f(r) dr` for an integrand behaving like `r^power` at the origin.
/// The piece below `split` is integrated in `v = r^(1+power)` to remove the
/// endpoint singularity.
fn cut_integral<T: QuadValue>(f: impl Fn(f64) -> T, power: f64, split: f64) -> T {
    let m = if power < 0.0 { 1.0 / (1.0 + power) } else { 1.0 };
    let head = tanh_sinh(
        |v, _, _| {
            let r = v.powf(m);
            f(r) * (m * v.powf(m - 1.0))
        },
        0.0,
        split.powf(1.0 / m),
        QUAD_TOL,
    );
    head.value + exp_sinh(|r, _| f(r), split, QUAD_TOL).value
}

fn hankel_real(a: f64, b: f64, x: f64) -> f64 {
    let (sa, ca) = (sin_pi(a), cos_pi(a));
    let (sb, sab) = (sin_pi(b), sin_pi(a - b));
    let (xs, xc) = (x * sa, x * ca);
    let kernel = |r: f64| {
        if r <= 0.0 {
            return 0.0;
        }
        let ra = r.powf(a);
        let num = ra * sb + x * sab;
        let den = (ra - xc) * (ra - xc) + xs * xs;
        r.powf(a - b) * num / den * (-r).exp() / PI
    };
    let peak = if xc > 0.0 { xc.powf(1.0 / a) } else { 0.0 };
    let split = if peak > 1e-12 && peak < 700.0 { peak } else { 1.0 };
    let integral = cut_integral(kernel, a - b, split);
    let residue = if x > 0.0 {
        let s = x.powf(1.0 / a);
        s.powf(1.0 - b) * s.exp() / a
    } else if a > 1.0 {
        let s = C64::from_polar((-x).powf(1.0 / a), PI / a);
        2.0 * (s.powf(1.0 - b) * s.exp()).re / a
    } else {
        0.0
    };
    integral + residue
}

fn hankel_complex(a: f64, b: f64, z: C64) -> Result<C64> {
    let e_plus = C64::from_polar(1.0, PI * a);
    let e_minus = e_plus.conj();
    let (sb, sab) = (sin_pi(b), sin_pi(a - b));
    let kernel = |r: f64| {
        if r <= 0.0 {
            return C64::new(0.0, 0.0);
        }
        let ra = r.powf(a);
        let num = z * sab + ra * sb;
        let den = (e_minus * ra - z) * (e_plus * ra - z);
        num / den * (r.powf(a - b) * (-r).exp() / PI)
    };
    let split = z.norm().powf(1.0 / a).min(700.0);
    let integral = cut_integral(kernel, a - b, split);
    Ok(integral + pole_residues(a, b, z)?)
}

fn asymptotic_real(a: f64, b: f64, x: f64) -> Option<f64> {
    let mut sum = pole_residues(a, b, C64::from(x)).ok()?.re;
    let mut zk = 1.0;
    for k in 1..=5 {
        zk /= x;
        sum -= zk * rgamma(b - a * k as f64);
    }
    let t6 = (zk / x).abs() * rgamma(b - 6.0 * a).abs();
    let t7 = (zk / (x * x)).abs() * rgamma(b - 7.0 * a).abs();
    if t6.max(t7) <= 1e-15 * sum.abs() {
        Some(sum)
    } else {
        None
    }
}

/// Relaxation kernel `t^(α-1) E_{α,α}(-λ t^α)`, the per-mode impulse response.
pub fn relaxation_kernel(q: &KernelQuery) -> Result<f64> {
    q.validate()?;
    let KernelQuery { alpha, lambda, t } = *q;
    if t == 0.0 {
        return if alpha < 1.0 {
            Err(Error::SingularInput(format!("kernel is unbounded at t = 0 for alpha = {alpha}")))
        } else if alpha == 1.0 {
            Ok(1.0)
        } else {
            Ok(0.0)
        };
    }
    if alpha == 1.0 {
        return Ok((-lambda * t).exp());
    }
    Ok(t.powf(alpha - 1.0) * ml_core(alpha, alpha, -lambda * t.powf(alpha))?)
}

/// Laplace transform of the relaxation kernel, `1/(p^α + λ)`.
pub fn kernel_laplace(alpha: f64, lambda: f64, p: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if !(p > 0.0) {
        return Err(Error::Domain(format!("Laplace variable must be positive, got {p}")));
    }
    Ok(1.0 / (p.powf(alpha) + lambda))
}

/// Leading large-time term `-t^(-1-α)/Γ(-α) · amplitude` of the boundary flux.
/// Exactly zero at α = 1, where `1/Γ(-1)` is taken to vanish.
pub fn asymptotic_flux_model(alpha: f64, amplitude: f64, t: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if !(t > 0.0) {
        return Err(Error::Domain(format!("time must be positive, got {t}")));
    }
    if alpha == 1.0 {
        return Ok(0.0);
    }
    Ok(-t.powf(-1.0 - alpha) * rgamma(-alpha) * amplitude)
}

const CHEB_N: usize = 24;
const TABLE_OCTAVES: i32 = 25;

/// Piecewise Chebyshev interpolant of `y ↦ E_{a,b}(-y)` on `y >= 0`,
/// used wherever the same kernel is evaluated many times.
#[derive(Debug)]
pub struct NegativeAxisTable {
    a: f64,
    b: f64,
    panels: Vec<(f64, f64, [f64; CHEB_N])>,
    y_max: f64,
}

impl NegativeAxisTable {
    pub fn build(params: &MLParams) -> Result<Self> {
        params.validate()?;
        let (a, b) = (params.beta1, params.beta2);
        let mut bounds = vec![(0.0, 0.25), (0.25, 0.5), (0.5, 1.0)];
        for j in 0..TABLE_OCTAVES {
            bounds.push((2f64.powi(j), 2f64.powi(j + 1)));
        }
        let mut panels = Vec::with_capacity(bounds.len());
        for (lo, hi) in bounds {
            let mut vals = [0.0; CHEB_N];
            for (i, v) in vals.iter_mut().enumerate() {
                let u = (PI * (i as f64 + 0.5) / CHEB_N as f64).cos();
                *v = ml_core(a, b, -(0.5 * (lo + hi) + 0.5 * (hi - lo) * u))?;
            }
            let mut coef = [0.0; CHEB_N];
            for (j, c) in coef.iter_mut().enumerate() {
                let s: f64 = vals
                    .iter()
                    .enumerate()
                    .map(|(i, v)| v * (PI * j as f64 * (i as f64 + 0.5) / CHEB_N as f64).cos())
                    .sum();
                *c = 2.0 * s / CHEB_N as f64;
            }
            coef[0] *= 0.5;
            panels.push((lo, hi, coef));
        }
        Ok(NegativeAxisTable { a, b, panels, y_max: 2f64.powi(TABLE_OCTAVES) })
    }

    pub fn params(&self) -> MLParams {
        MLParams { beta1: self.a, beta2: self.b }
    }

    /// `E_{a,b}(-y)` for `y >= 0`.
    pub fn eval(&self, y: f64) -> f64 {
        if y >= self.y_max || y < 0.0 {
            return ml_core(self.a, self.b, -y).unwrap_or(f64::NAN);
        }
        let idx = if y < 0.25 {
            0
        } else if y < 0.5 {
            1
        } else if y < 1.0 {
            2
        } else {
            (3 + y.log2().floor() as usize).min(self.panels.len() - 1)
        };
        let (lo, hi, ref c) = self.panels[idx];
        let u = (2.0 * y - lo - hi) / (hi - lo);
        let (mut b1, mut b2) = (0.0, 0.0);
        for &cj in c.iter().skip(1).rev() {
            let t = 2.0 * u * b1 - b2 + cj;
            b2 = b1;
            b1 = t;
        }
        u * b1 - b2 + c[0]
    }
}

/// Shared table for `E_{a,b}(-y)`, built on first use.
pub fn negative_axis_table(a: f64, b: f64) -> Result<Arc<NegativeAxisTable>> {
    static CACHE: OnceLock<Mutex<HashMap<(u64, u64), Arc<NegativeAxisTable>>>> = OnceLock::new();
    let key = (a.to_bits(), b.to_bits());
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(t) = cache.lock().expect("table cache poisoned").get(&key) {
        return Ok(t.clone());
    }
    let table = Arc::new(NegativeAxisTable::build(&MLParams::new(a, b)?)?);
    cache.lock().expect("table cache poisoned").insert(key, table.clone());
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ml(a: f64, b: f64, x: f64) -> f64 {
        ml_real(&MLParams::new(a, b).unwrap(), x).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn exponential_case() {
        assert!(rel(ml(1.0, 1.0, 1.0), std::f64::consts::E) < 1e-15);
        for i in 0..=70 {
            let x = -50.0 + i as f64;
            assert!(rel(ml(1.0, 1.0, x), x.exp()) < 1e-12);
        }
    }

    #[test]
    fn zero_argument() {
        assert!(rel(ml(0.5, 0.5, 0.0), 1.0 / PI.sqrt()) < 1e-15);
    }

    #[test]
    fn bad_params_rejected() {
        assert!(matches!(MLParams::new(0.0, 1.0), Err(Error::Parameter(_))));
        assert!(matches!(MLParams::new(1.0, -1.0), Err(Error::Parameter(_))));
    }

    #[test]
    fn overflow_signalled() {
        let p = MLParams::new(0.5, 1.0).unwrap();
        assert!(matches!(ml_real(&p, 1e3), Err(Error::Overflow(_))));
        let p = MLParams::new(1.0, 1.0).unwrap();
        assert!(matches!(ml_real(&p, 800.0), Err(Error::Overflow(_))));
    }

    #[test]
    fn cosine_and_cosh() {
        // E_{2,1}(-x^2) = cos x, E_{2,1}(x^2) = cosh x
        for &x in &[0.5f64, 2.0, 5.0, 9.0] {
            assert!((ml(2.0, 1.0, -x * x) - x.cos()).abs() < 1e-12, "{x}");
            assert!(rel(ml(2.0, 1.0, x * x), x.cosh()) < 1e-12, "{x}");
        }
    }

    #[test]
    fn regimes_join_smoothly() {
        for &(a, b) in &[(0.5, 1.0), (0.8, 0.8), (1.5, 1.5), (0.3, 1.0)] {
            for &x in &[-1.0, -50.0] {
                let l = ml(a, b, x * (1.0 - 1e-12));
                let r = ml(a, b, x * (1.0 + 1e-12));
                assert!(rel(l, r) < 1e-10, "({a},{b}) at {x}: {l} vs {r}");
            }
        }
    }

    #[test]
    fn complex_matches_real_and_series() {
        let p = MLParams::new(0.7, 1.1).unwrap();
        let z = C64::new(-2.0, 1.5);
        let h = ml_eval(&p, z).unwrap();
        let s = series(0.7, 1.1, z);
        assert!((h - s).norm() < 1e-10 * s.norm(), "{h} {s}");
    }

    #[test]
    fn kernel_cases() {
        let k = relaxation_kernel(&KernelQuery::new(1.0, 2.0, 0.5).unwrap()).unwrap();
        assert!(rel(k, (-1.0f64).exp()) < 1e-15);
        let k = relaxation_kernel(&KernelQuery::new(0.5, 1.0, 1.0).unwrap()).unwrap();
        assert!(rel(k, ml(0.5, 0.5, -1.0)) < 1e-15);
        let q = KernelQuery::new(0.5, 1.0, 0.0).unwrap();
        assert!(matches!(relaxation_kernel(&q), Err(Error::SingularInput(_))));
    }

    #[test]
    fn laplace_closed_form() {
        assert!(rel(kernel_laplace(1.0, 2.0, 3.0).unwrap(), 0.2) < 1e-15);
        assert!(rel(kernel_laplace(0.5, 1.0, 4.0).unwrap(), 1.0 / 3.0) < 1e-15);
        assert!(matches!(kernel_laplace(0.5, 1.0, 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn flux_model_values() {
        assert_eq!(asymptotic_flux_model(1.0, 3.0, 10.0).unwrap(), 0.0);
        let v1 = asymptotic_flux_model(0.5, 1.0, 1.0).unwrap();
        assert!(rel(v1, 0.5 / PI.sqrt()) < 1e-14);
        let v100 = asymptotic_flux_model(0.5, 1.0, 100.0).unwrap();
        assert!(rel(v100, v1 * 1e-3) < 1e-13);
    }

    #[test]
    fn table_matches_direct() {
        for &(a, b) in &[(0.5, 1.0), (0.8, 0.8), (1.5, 1.0), (1.0, 1.0)] {
            let t = NegativeAxisTable::build(&MLParams::new(a, b).unwrap()).unwrap();
            let mut y = 1e-3;
            while y < 1e8 {
                let d = ml(a, b, -y);
                let v = t.eval(y);
                assert!((v - d).abs() < 1e-12 * d.abs().max(1.0 / (1.0 + y)), "({a},{b}) y={y}: {v} vs {d}");
                y *= 1.37;
            }
        }
    }
}
