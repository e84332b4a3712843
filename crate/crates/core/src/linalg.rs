//! Sparse storage and the linear solvers used by the finite-difference operators.

use crate::{Error, Result};
use nalgebra::DMatrix;

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Csr {
    pub rows: usize,
    pub cols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub data: Vec<f64>,
}

impl Csr {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Csr { rows, cols, indptr: vec![0; rows + 1], indices: Vec::new(), data: Vec::new() }
    }

    /// Builds from (row, col, value) triplets; duplicates are summed, explicit zeros dropped.
    pub fn from_triplets(rows: usize, cols: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by(|x, y| (x.0, x.1).cmp(&(y.0, y.1)));
        let mut indptr = vec![0; rows + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut data: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            assert!(r < rows && c < cols, "triplet ({r}, {c}) outside {rows}x{cols}");
            if last == Some((r, c)) {
                *data.last_mut().expect("nonempty") += v;
            } else {
                indices.push(c);
                data.push(v);
                indptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..rows {
            indptr[r + 1] += indptr[r];
        }
        let mut m = Csr { rows, cols, indptr, indices, data };
        m.prune();
        m
    }

    fn prune(&mut self) {
        let mut indptr = vec![0; self.rows + 1];
        let mut indices = Vec::with_capacity(self.indices.len());
        let mut data = Vec::with_capacity(self.data.len());
        for r in 0..self.rows {
            for k in self.indptr[r]..self.indptr[r + 1] {
                if self.data[k] != 0.0 {
                    indices.push(self.indices[k]);
                    data.push(self.data[k]);
                }
            }
            indptr[r + 1] = indices.len();
        }
        self.indptr = indptr;
        self.indices = indices;
        self.data = data;
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.indptr[r]..self.indptr[r + 1]).map(move |k| (self.indices[k], self.data[k]))
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.row(r).find(|&(j, _)| j == c).map_or(0.0, |(_, v)| v)
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|r| self.row(r).map(|(c, v)| v * x[c]).sum()).collect()
    }

    /// `y += s * A x`
    pub fn matvec_add(&self, x: &[f64], s: f64, y: &mut [f64]) {
        for (r, yr) in y.iter_mut().enumerate().take(self.rows) {
            let acc: f64 = self.row(r).map(|(c, v)| v * x[c]).sum();
            *yr += s * acc;
        }
    }

    pub fn transpose_matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.cols];
        for (r, xr) in x.iter().enumerate() {
            for (c, v) in self.row(r) {
                y[c] += v * xr;
            }
        }
        y
    }

    pub fn transpose(&self) -> Csr {
        let mut t = Vec::with_capacity(self.nnz());
        for r in 0..self.rows {
            for (c, v) in self.row(r) {
                t.push((c, r, v));
            }
        }
        Csr::from_triplets(self.cols, self.rows, t)
    }

    /// `self + s * other` for matrices of equal shape.
    pub fn add_scaled(&self, other: &Csr, s: f64) -> Csr {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut t = Vec::with_capacity(self.nnz() + other.nnz());
        for r in 0..self.rows {
            t.extend(self.row(r).map(|(c, v)| (r, c, v)));
            t.extend(other.row(r).map(|(c, v)| (r, c, s * v)));
        }
        Csr::from_triplets(self.rows, self.cols, t)
    }

    /// Adds `d[i]` to the diagonal.
    pub fn add_diagonal(&self, d: &[f64]) -> Csr {
        let mut t: Vec<_> = (0..self.rows).flat_map(|r| self.row(r).map(move |(c, v)| (r, c, v))).collect();
        t.extend(d.iter().enumerate().map(|(i, &v)| (i, i, v)));
        Csr::from_triplets(self.rows, self.cols, t)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.rows, self.cols);
        for r in 0..self.rows {
            for (c, v) in self.row(r) {
                m[(r, c)] += v;
            }
        }
        m
    }

    /// Largest `|i - j|` over stored entries.
    pub fn bandwidth(&self) -> usize {
        (0..self.rows).flat_map(|r| self.row(r).map(move |(c, _)| r.abs_diff(c))).max().unwrap_or(0)
    }

    /// Maximum relative asymmetry `max|a_ij - a_ji| / max|a_ij|`.
    pub fn asymmetry(&self) -> f64 {
        let scale = self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst: f64 = 0.0;
        for r in 0..self.rows {
            for (c, v) in self.row(r) {
                worst = worst.max((v - self.get(c, r)).abs());
            }
        }
        worst / scale
    }
}

/// LU factorization of a banded matrix without pivoting. Intended for the
/// diagonally dominant or symmetric positive definite systems produced by the
/// discretization.
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    w: usize,
    // row-major, row i holds columns i-w ..= i+w
    lu: Vec<f64>,
}

impl BandedLu {
    pub fn factor(a: &Csr) -> Result<Self> {
        if a.rows != a.cols {
            return Err(Error::Solver(format!("banded LU needs a square matrix, got {}x{}", a.rows, a.cols)));
        }
        let n = a.rows;
        let w = a.bandwidth();
        let stride = 2 * w + 1;
        let mut lu = vec![0.0; n * stride];
        for r in 0..n {
            for (c, v) in a.row(r) {
                lu[r * stride + (c + w - r)] += v;
            }
        }
        let scale = a.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for k in 0..n {
            let pivot = lu[k * stride + w];
            if pivot.abs() <= 1e-14 * scale || !pivot.is_finite() {
                return Err(Error::Solver(format!("zero pivot {pivot:e} at row {k} in banded LU")));
            }
            let hi = (k + w + 1).min(n);
            for i in k + 1..hi {
                let ik = i * stride + (k + w - i);
                let l = lu[ik] / pivot;
                if l == 0.0 {
                    continue;
                }
                lu[ik] = l;
                for j in k + 1..hi {
                    lu[i * stride + (j + w - i)] -= l * lu[k * stride + (j + w - k)];
                }
            }
        }
        Ok(BandedLu { n, w, lu })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let (n, w) = (self.n, self.w);
        let stride = 2 * w + 1;
        for i in 0..n {
            let lo = i.saturating_sub(w);
            let mut s = x[i];
            for j in lo..i {
                s -= self.lu[i * stride + (j + w - i)] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let hi = (i + w + 1).min(n);
            let mut s = x[i];
            for j in i + 1..hi {
                s -= self.lu[i * stride + (j + w - i)] * x[j];
            }
            x[i] = s / self.lu[i * stride + w];
        }
    }
}

/// Outcome of an iterative solve.
#[derive(Debug, Clone)]
pub struct CgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

/// Jacobi-preconditioned conjugate gradients for symmetric positive definite systems.
pub fn conjugate_gradient(a: &Csr, b: &[f64], rel_tol: f64, max_iter: usize) -> Result<CgOutcome> {
    let n = a.rows;
    let diag: Vec<f64> = (0..n).map(|i| a.get(i, i)).collect();
    if diag.iter().any(|&d| d <= 0.0) {
        return Err(Error::Solver("conjugate gradients needs a positive diagonal".into()));
    }
    let bnorm = norm(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok(CgOutcome { x, iterations: 0, residual: 0.0 });
    }
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&diag).map(|(r, d)| r / d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    for it in 0..max_iter {
        let ap = a.matvec(&p);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(Error::Solver(format!("matrix not positive definite (pAp = {pap:e}) at iteration {it}")));
        }
        let step = rz / pap;
        for i in 0..n {
            x[i] += step * p[i];
            r[i] -= step * ap[i];
        }
        let res = norm(&r) / bnorm;
        if res <= rel_tol {
            return Ok(CgOutcome { x, iterations: it + 1, residual: res });
        }
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    let res = norm(&r) / bnorm;
    Err(Error::Solver(format!("conjugate gradients stalled after {max_iter} iterations, residual {res:e}")))
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian(n: usize) -> Csr {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i > 0 {
                t.push((i, i - 1, -1.0));
            }
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
            }
        }
        Csr::from_triplets(n, n, t)
    }

    #[test]
    fn triplets_merge_duplicates() {
        let m = Csr::from_triplets(2, 2, vec![(0, 0, 1.0), (0, 0, 2.0), (1, 0, 0.0), (1, 1, 4.0)]);
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.get(0, 0), 3.0);
        assert_eq!(m.matvec(&[1.0, 1.0]), vec![3.0, 4.0]);
    }

    #[test]
    fn banded_solve_matches_dense() {
        let a = laplacian(50).add_diagonal(&vec![0.3; 50]);
        let b: Vec<f64> = (0..50).map(|i| (i as f64 * 0.37).sin()).collect();
        let x = BandedLu::factor(&a).unwrap().solve(&b);
        let r = a.matvec(&x);
        for (ri, bi) in r.iter().zip(&b) {
            assert!((ri - bi).abs() < 1e-12);
        }
    }

    #[test]
    fn cg_converges() {
        let a = laplacian(100);
        let b = vec![1.0; 100];
        let out = conjugate_gradient(&a, &b, 1e-12, 500).unwrap();
        let x = BandedLu::factor(&a).unwrap().solve(&b);
        for (u, v) in out.x.iter().zip(&x) {
            assert!((u - v).abs() < 1e-8 * v.abs().max(1.0));
        }
    }

    #[test]
    fn asymmetry_detects() {
        let mut m = laplacian(4);
        assert_eq!(m.asymmetry(), 0.0);
        m.data[1] = -1.5;
        assert!(m.asymmetry() > 0.1);
    }
}
