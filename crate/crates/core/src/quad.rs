//! Numerical quadrature: adaptive Gauss-Kronrod (G7/K15) and double
//! exponential rules (tanh-sinh on finite intervals, exp-sinh on half lines).

use nalgebra::Complex;
use std::f64::consts::FRAC_PI_2;
use std::ops::{Add, Mul, Sub};
use std::sync::OnceLock;

/// Values that can be accumulated by the adaptive rules.
pub trait QuadValue: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> {
    fn zero() -> Self;
    fn magnitude(&self) -> f64;
    fn finite(&self) -> bool;
}

impl QuadValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn magnitude(&self) -> f64 {
        self.abs()
    }
    fn finite(&self) -> bool {
        self.is_finite()
    }
}

impl QuadValue for Complex<f64> {
    fn zero() -> Self {
        Complex::new(0.0, 0.0)
    }
    fn magnitude(&self) -> f64 {
        self.norm()
    }
    fn finite(&self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QuadResult<T> {
    pub value: T,
    pub error: f64,
    pub evals: usize,
    pub converged: bool,
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_225,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

struct Segment<T> {
    a: f64,
    b: f64,
    value: T,
    error: f64,
}

fn kronrod15<T: QuadValue, F: FnMut(f64) -> T>(f: &mut F, a: f64, b: f64) -> Segment<T> {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    let mut abs_k = fc.magnitude() * WGK[7];
    let mut vals = [(T::zero(), T::zero()); 7];
    for (j, v) in vals.iter_mut().enumerate() {
        let dx = h * XGK[j];
        let f1 = f(c - dx);
        let f2 = f(c + dx);
        *v = (f1, f2);
        k = k + (f1 + f2) * WGK[j];
        abs_k += (f1.magnitude() + f2.magnitude()) * WGK[j];
        if j % 2 == 1 {
            g = g + (f1 + f2) * WG[j / 2];
        }
    }
    // QUADPACK-style error scaling
    let mean = k * 0.5;
    let mut asc = WGK[7] * (fc - mean).magnitude();
    for (j, (f1, f2)) in vals.iter().enumerate() {
        asc += WGK[j] * ((*f1 - mean).magnitude() + (*f2 - mean).magnitude());
    }
    let asc = asc * h.abs();
    let raw = ((k - g) * h).magnitude();
    let mut err = raw;
    if asc != 0.0 && raw != 0.0 {
        err = asc * (200.0 * raw / asc).powf(1.5).min(1.0);
    }
    let abs_k = abs_k * h.abs();
    if abs_k > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * abs_k);
    }
    Segment { a, b, value: k * h, error: err }
}

/// Adaptive Gauss-Kronrod integration of `f` over `[a, b]`.
///
/// Subdivides the interval with the largest error estimate until the summed
/// estimate falls below `max(abs_tol, rel_tol * |I|)` or `max_segments` is hit.
pub fn gauss_kronrod<T, F>(
    mut f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_segments: usize,
) -> QuadResult<T>
where
    T: QuadValue,
    F: FnMut(f64) -> T,
{
    if a == b {
        return QuadResult { value: T::zero(), error: 0.0, evals: 0, converged: true };
    }
    let mut segs = vec![kronrod15(&mut f, a, b)];
    let mut evals = 15;
    loop {
        let total = segs.iter().fold(T::zero(), |acc, s| acc + s.value);
        let err: f64 = segs.iter().map(|s| s.error).sum();
        let tol = abs_tol.max(rel_tol * total.magnitude());
        if err <= tol || segs.len() >= max_segments {
            return QuadResult { value: total, error: err, evals, converged: err <= tol };
        }
        let (worst, _) = segs
            .iter()
            .enumerate()
            .fold((0, -1.0), |(bi, be), (i, s)| if s.error > be { (i, s.error) } else { (bi, be) });
        let s = segs.swap_remove(worst);
        let m = 0.5 * (s.a + s.b);
        if m <= s.a.min(s.b) || m >= s.a.max(s.b) {
            // interval exhausted at machine resolution
            segs.push(s);
            let total = segs.iter().fold(T::zero(), |acc, s| acc + s.value);
            let err: f64 = segs.iter().map(|s| s.error).sum();
            return QuadResult { value: total, error: err, evals, converged: false };
        }
        segs.push(kronrod15(&mut f, s.a, m));
        segs.push(kronrod15(&mut f, m, s.b));
        evals += 30;
    }
}

/// Gauss-Kronrod integration over `[a, b]` split at the given interior points.
pub fn gauss_kronrod_split<F>(mut f: F, points: &[f64], abs_tol: f64, rel_tol: f64) -> QuadResult<f64>
where
    F: FnMut(f64) -> f64,
{
    let mut out = QuadResult { value: 0.0, error: 0.0, evals: 0, converged: true };
    for w in points.windows(2) {
        if w[1] <= w[0] {
            continue;
        }
        let r = gauss_kronrod(&mut f, w[0], w[1], abs_tol / (points.len() as f64), rel_tol, 200);
        out.value += r.value;
        out.error += r.error;
        out.evals += r.evals;
        out.converged &= r.converged;
    }
    out
}

const DE_LEVELS: usize = 8;
const TANH_SINH_TMAX: f64 = 3.5;
const EXP_SINH_TMIN: f64 = -4.5;
const EXP_SINH_TMAX: f64 = 3.75;

/// Nodes of one refinement level: (t, weight-factor) pairs, new nodes only.
struct DeTable {
    levels: Vec<Vec<(f64, f64, f64)>>,
}

fn tanh_sinh_table() -> &'static DeTable {
    static TABLE: OnceLock<DeTable> = OnceLock::new();
    TABLE.get_or_init(|| {
        // (left offset factor, right offset factor, weight) on [-1, 1]
        let node = |t: f64| {
            let u = FRAC_PI_2 * t.sinh();
            let w = FRAC_PI_2 * t.cosh() / u.cosh().powi(2);
            let left = 2.0 / (1.0 + (-2.0 * u).exp());
            let right = 2.0 / (1.0 + (2.0 * u).exp());
            (left, right, w)
        };
        let mut levels = Vec::with_capacity(DE_LEVELS);
        let mut lvl0 = vec![node(0.0)];
        let mut j = 1;
        while j as f64 <= TANH_SINH_TMAX {
            lvl0.push(node(j as f64));
            lvl0.push(node(-(j as f64)));
            j += 1;
        }
        levels.push(lvl0);
        for k in 1..DE_LEVELS {
            let h = 0.5f64.powi(k as i32);
            let mut nodes = Vec::new();
            let mut i = 1usize;
            while i as f64 * h <= TANH_SINH_TMAX {
                let t = i as f64 * h;
                nodes.push(node(t));
                nodes.push(node(-t));
                i += 2;
            }
            levels.push(nodes);
        }
        DeTable { levels }
    })
}

fn exp_sinh_table() -> &'static DeTable {
    static TABLE: OnceLock<DeTable> = OnceLock::new();
    TABLE.get_or_init(|| {
        // (x offset from a, unused, weight)
        let node = |t: f64| {
            let u = FRAC_PI_2 * t.sinh();
            let x = u.exp();
            (x, 0.0, FRAC_PI_2 * t.cosh() * x)
        };
        let mut levels = Vec::with_capacity(DE_LEVELS);
        let range = |h: f64, step: usize, start: usize| {
            let mut v = Vec::new();
            let lo = (EXP_SINH_TMIN / h).ceil() as i64;
            let hi = (EXP_SINH_TMAX / h).floor() as i64;
            for i in lo..=hi {
                if (i.unsigned_abs() as usize) % step == start % step || step == 1 {
                    v.push(node(i as f64 * h));
                }
            }
            v
        };
        levels.push(range(1.0, 1, 0));
        for k in 1..DE_LEVELS {
            let h = 0.5f64.powi(k as i32);
            levels.push(range(h, 2, 1));
        }
        DeTable { levels }
    })
}

/// Tanh-sinh quadrature on `[a, b]`. The integrand receives `(x, x - a, b - x)`
/// so that endpoint singularities can be evaluated without cancellation.
pub fn tanh_sinh<T, F>(mut f: F, a: f64, b: f64, rel_tol: f64) -> QuadResult<T>
where
    T: QuadValue,
    F: FnMut(f64, f64, f64) -> T,
{
    let d = 0.5 * (b - a);
    if d == 0.0 {
        return QuadResult { value: T::zero(), error: 0.0, evals: 0, converged: true };
    }
    let table = tanh_sinh_table();
    let mut sum = T::zero();
    let mut evals = 0;
    let mut prev = T::zero();
    let mut h = 1.0;
    let mut eval_level = |nodes: &[(f64, f64, f64)], f: &mut F| {
        let mut s = T::zero();
        for &(l, r, w) in nodes {
            let dl = d * l;
            let dr = d * r;
            if dl <= 0.0 || dr <= 0.0 {
                continue;
            }
            let x = if dl < dr { a + dl } else { b - dr };
            let v = f(x, dl, dr);
            if v.finite() {
                s = s + v * w;
            }
            evals += 1;
        }
        s
    };
    for (k, nodes) in table.levels.iter().enumerate() {
        if k > 0 {
            h *= 0.5;
        }
        sum = sum + eval_level(nodes, &mut f);
        let est = sum * (d * h);
        if k >= 3 {
            let diff = (est - prev).magnitude();
            if diff <= rel_tol * est.magnitude() || diff == 0.0 {
                return QuadResult { value: est, error: diff, evals, converged: true };
            }
        }
        prev = est;
    }
    QuadResult { value: prev, error: f64::NAN, evals, converged: false }
}

/// Exp-sinh quadrature on `[a, ∞)`. The integrand receives `(x, x - a)`.
pub fn exp_sinh<T, F>(mut f: F, a: f64, rel_tol: f64) -> QuadResult<T>
where
    T: QuadValue,
    F: FnMut(f64, f64) -> T,
{
    let table = exp_sinh_table();
    let mut sum = T::zero();
    let mut evals = 0;
    let mut prev = T::zero();
    let mut h = 1.0;
    for (k, nodes) in table.levels.iter().enumerate() {
        if k > 0 {
            h *= 0.5;
        }
        for &(off, _, w) in nodes {
            let v = f(a + off, off);
            evals += 1;
            if v.finite() {
                sum = sum + v * w;
            }
        }
        let est = sum * h;
        if k >= 3 {
            let diff = (est - prev).magnitude();
            if diff <= rel_tol * est.magnitude() || diff == 0.0 {
                return QuadResult { value: est, error: diff, evals, converged: true };
            }
        }
        prev = est;
    }
    QuadResult { value: prev, error: f64::NAN, evals, converged: false }
}

/// Gauss-Legendre nodes and weights on [-1, 1] (4 points).
pub const GL4_NODES: [f64; 4] = [
    -0.861_136_311_594_052_6,
    -0.339_981_043_584_856_3,
    0.339_981_043_584_856_3,
    0.861_136_311_594_052_6,
];
pub const GL4_WEIGHTS: [f64; 4] = [
    0.347_854_845_137_453_85,
    0.652_145_154_862_546_1,
    0.652_145_154_862_546_1,
    0.347_854_845_137_453_85,
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kronrod_polynomial_exact() {
        let r = gauss_kronrod(|x: f64| x.powi(5) - 2.0 * x * x, 0.0, 2.0, 1e-14, 1e-14, 50);
        let exact = 64.0 / 6.0 - 16.0 / 3.0;
        assert!((r.value - exact).abs() < 1e-12);
    }

    #[test]
    fn kronrod_endpoint_singularity() {
        let r = gauss_kronrod(|x: f64| 1.0 / x.sqrt(), 0.0, 1.0, 1e-12, 1e-12, 500);
        assert!((r.value - 2.0).abs() < 1e-9, "{}", r.value);
    }

    #[test]
    fn kronrod_complex() {
        let r = gauss_kronrod(|x: f64| Complex::new(x.cos(), x.sin()), 0.0, 1.0, 1e-14, 1e-14, 50);
        assert!((r.value.re - 1f64.sin()).abs() < 1e-13);
        assert!((r.value.im - (1.0 - 1f64.cos())).abs() < 1e-13);
    }

    #[test]
    fn tanh_sinh_singular_ends() {
        // ∫_0^1 x^{-1/2} (1-x)^{-1/2} dx = π
        let r = tanh_sinh(|_, l, rr| 1.0 / (l.sqrt() * rr.sqrt()), 0.0, 1.0, 1e-12);
        assert!((r.value - std::f64::consts::PI).abs() < 1e-10, "{}", r.value);
    }

    #[test]
    fn exp_sinh_gamma_half() {
        // ∫_0^∞ x^{-1/2} e^{-x} dx = √π
        let r = exp_sinh(|x, _| (-x).exp() / x.sqrt(), 0.0, 1e-12);
        assert!((r.value - std::f64::consts::PI.sqrt()).abs() < 1e-12, "{}", r.value);
    }
}
