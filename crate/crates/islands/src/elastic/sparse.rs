//! Minimal CSR storage and a Jacobi-preconditioned conjugate gradient solver
//! for the symmetric positive-definite stiffness systems assembled by the
//! mesh module.

use crate::error::{Error, Result};

/// Symmetric sparse matrix in CSR form. Only structurally present entries
/// are stored; the assembler inserts both triangles of each symmetric pair.
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

/// Coordinate-format accumulator; finalized into CSR once assembly is done.
pub struct CooBuilder {
    n: usize,
    entries: Vec<(u32, u32, f64)>,
}

impl CooBuilder {
    pub fn new(n: usize) -> Self {
        Self { n, entries: Vec::new() }
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        if v != 0.0 {
            self.entries.push((i as u32, j as u32, v));
        }
    }

    pub fn build(mut self) -> CsrMatrix {
        self.entries.sort_unstable_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0usize; self.n + 1];
        let mut col_idx = Vec::with_capacity(self.entries.len());
        let mut values = Vec::with_capacity(self.entries.len());
        let mut last = None;
        for &(i, j, v) in &self.entries {
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(j as usize);
                values.push(v);
                row_ptr[i as usize + 1] = col_idx.len();
                last = Some((i, j));
            }
        }
        // rows with no entries inherit the previous offset
        for i in 1..=self.n {
            row_ptr[i] = row_ptr[i].max(row_ptr[i - 1]);
        }
        CsrMatrix { n: self.n, row_ptr, col_idx, values }
    }
}

impl CsrMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(y.len(), self.n);
        for i in 0..self.n {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            y[i] = acc;
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n];
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                if self.col_idx[k] == i {
                    d[i] = self.values[k];
                }
            }
        }
        d
    }
}

#[derive(Debug)]
pub struct CgReport {
    pub iterations: usize,
    /// Final residual norm relative to the right-hand side norm.
    pub rel_residual: f64,
}

/// Solve `A x = b` by conjugate gradients with diagonal preconditioning,
/// starting from the provided `x` (warm start). Tolerance is on the
/// preconditioned residual relative to `b`.
pub fn solve_cg(
    a: &CsrMatrix,
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iters: usize,
) -> Result<CgReport> {
    let n = a.n();
    let b_norm = norm(b);
    if b_norm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(CgReport { iterations: 0, rel_residual: 0.0 });
    }
    let inv_diag: Vec<f64> = a
        .diagonal()
        .iter()
        .map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 })
        .collect();

    let mut r = vec![0.0; n];
    a.mul_vec(x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(ri, di)| ri * di).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut res = norm(&r) / b_norm;

    let mut it = 0;
    while res > tol && it < max_iters {
        a.mul_vec(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(Error::SolverFailure { iterations: it, residual: res });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        res = norm(&r) / b_norm;
        it += 1;
    }
    if res > tol {
        return Err(Error::SolverFailure { iterations: it, residual: res });
    }
    Ok(CgReport { iterations: it, rel_residual: res })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Solve the tridiagonal SPD system given by `diag` and `off` (sub/super
/// diagonal) in place with the Thomas algorithm. Used by the semi-implicit
/// surface step of the gradient flow.
pub fn solve_tridiagonal(diag: &[f64], off: &[f64], rhs: &mut [f64]) {
    let n = diag.len();
    debug_assert_eq!(off.len() + 1, n);
    debug_assert_eq!(rhs.len(), n);
    let mut c = vec![0.0; n - 1];
    let mut d = diag[0];
    rhs[0] /= d;
    for i in 1..n {
        c[i - 1] = off[i - 1] / d;
        d = diag[i] - off[i - 1] * c[i - 1];
        rhs[i] = (rhs[i] - off[i - 1] * rhs[i - 1]) / d;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= c[i] * rhs[i + 1];
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian_1d(n: usize) -> CsrMatrix {
        let mut b = CooBuilder::new(n);
        for i in 0..n {
            b.add(i, i, 2.0);
            if i > 0 {
                b.add(i, i - 1, -1.0);
            }
            if i + 1 < n {
                b.add(i, i + 1, -1.0);
            }
        }
        b.build()
    }

    #[test]
    fn cg_solves_laplacian() {
        let n = 200;
        let a = laplacian_1d(n);
        let x_true: Vec<f64> = (0..n).map(|i| (i as f64 * 0.1).sin()).collect();
        let mut b = vec![0.0; n];
        a.mul_vec(&x_true, &mut b);
        let mut x = vec![0.0; n];
        let rep = solve_cg(&a, &b, &mut x, 1e-12, 10_000).unwrap();
        assert!(rep.rel_residual <= 1e-12);
        let err: f64 = x.iter().zip(&x_true).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-8, "max err {err}");
    }

    #[test]
    fn cg_reports_failure_on_iteration_cap() {
        let a = laplacian_1d(400);
        let b = vec![1.0; 400];
        let mut x = vec![0.0; 400];
        match solve_cg(&a, &b, &mut x, 1e-14, 3) {
            Err(Error::SolverFailure { iterations, .. }) => assert_eq!(iterations, 3),
            other => panic!("expected solver failure, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_entries_are_merged() {
        let mut b = CooBuilder::new(2);
        b.add(0, 0, 1.0);
        b.add(0, 0, 2.0);
        b.add(1, 1, 1.0);
        let a = b.build();
        let mut y = vec![0.0; 2];
        a.mul_vec(&[1.0, 1.0], &mut y);
        assert_eq!(y, vec![3.0, 1.0]);
    }

    #[test]
    fn thomas_matches_dense_solve() {
        let diag = vec![2.0, 2.5, 3.0, 2.0];
        let off = vec![-1.0, -0.5, -1.0];
        let mut rhs = vec![1.0, 2.0, 3.0, 4.0];
        let rhs0 = rhs.clone();
        solve_tridiagonal(&diag, &off, &mut rhs);
        // verify A x = rhs0
        let n = 4;
        for i in 0..n {
            let mut acc = diag[i] * rhs[i];
            if i > 0 {
                acc += off[i - 1] * rhs[i - 1];
            }
            if i + 1 < n {
                acc += off[i] * rhs[i + 1];
            }
            assert!((acc - rhs0[i]).abs() < 1e-12);
        }
    }
}
