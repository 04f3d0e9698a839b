//! Compressed sparse row matrices and a Jacobi-preconditioned conjugate
//! gradient solver for symmetric positive definite systems.

use serde::Serialize;

use crate::error::{Error, Result};

/// Row-compressed sparse matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from per-row `(column, value)` lists; duplicate columns are summed.
    pub fn from_rows(ncols: usize, rows: Vec<Vec<(usize, f64)>>) -> Self {
        let nrows = rows.len();
        let mut indptr = Vec::with_capacity(nrows + 1);
        let mut indices = Vec::new();
        let mut data = Vec::new();
        indptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(c, _)| c);
            let mut last: Option<usize> = None;
            for (c, v) in row {
                debug_assert!(c < ncols);
                if last == Some(c) {
                    *data.last_mut().unwrap() += v;
                } else {
                    indices.push(c);
                    data.push(v);
                    last = Some(c);
                }
            }
            indptr.push(indices.len());
        }
        CsrMatrix {
            nrows,
            ncols,
            indptr,
            indices,
            data,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_rows(n, (0..n).map(|i| vec![(i, 1.0)]).collect())
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.indptr[i]..self.indptr[i + 1];
        self.indices[span.clone()]
            .iter()
            .copied()
            .zip(self.data[span].iter().copied())
    }

    pub fn row_len(&self, i: usize) -> usize {
        self.indptr[i + 1] - self.indptr[i]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|&(c, _)| c == j).map_or(0.0, |(_, v)| v)
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows).map(|i| self.get(i, i)).collect()
    }

    /// `y = A x`.
    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for (i, yi) in y.iter_mut().enumerate() {
            let mut s = 0.0;
            for k in self.indptr[i]..self.indptr[i + 1] {
                s += self.data[k] * x[self.indices[k]];
            }
            *yi = s;
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut rows = vec![Vec::new(); self.ncols];
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                rows[j].push((i, v));
            }
        }
        CsrMatrix::from_rows(self.nrows, rows)
    }

    /// Max-row-sum norm `‖A‖_∞`.
    pub fn norm_inf(&self) -> f64 {
        (0..self.nrows)
            .map(|i| self.row(i).map(|(_, v)| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// `‖A − Aᵀ‖_∞`.
    pub fn asymmetry_inf(&self) -> f64 {
        assert_eq!(self.nrows, self.ncols);
        let t = self.transpose();
        (0..self.nrows)
            .map(|i| {
                let mut diff: Vec<(usize, f64)> = self.row(i).collect();
                for (c, v) in t.row(i) {
                    match diff.iter_mut().find(|e| e.0 == c) {
                        Some(e) => e.1 -= v,
                        None => diff.push((c, -v)),
                    }
                }
                diff.iter().map(|e| e.1.abs()).sum::<f64>()
            })
            .fold(0.0, f64::max)
    }
}

/// Outcome of an iterative solve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SolveReport {
    pub iterations: usize,
    /// `‖A x − b‖₂ / ‖b‖₂`, recomputed from the returned `x`.
    pub final_residual: f64,
    pub converged: bool,
}

pub const DEFAULT_TOL: f64 = 1e-10;

/// Default iteration cap: generous multiple of the system size.
pub fn default_max_iter(n: usize) -> usize {
    (5 * n).max(100)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Jacobi-preconditioned CG from a zero initial guess.
pub fn solve_spd(
    op: &CsrMatrix,
    rhs: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, SolveReport)> {
    solve_spd_from(op, rhs, vec![0.0; rhs.len()], tol, max_iter)
}

/// Jacobi-preconditioned CG from the initial guess `x`.
///
/// Convergence is declared only on the true residual `‖b − A x‖₂ ≤ tol‖b‖₂`;
/// when the recurrence drifts the iteration restarts from the true residual.
/// Exhausting `max_iter` is reported with `converged = false`; a non-finite
/// intermediate is a hard error.
pub fn solve_spd_from(
    op: &CsrMatrix,
    rhs: &[f64],
    mut x: Vec<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, SolveReport)> {
    let n = op.nrows();
    if op.ncols() != n || rhs.len() != n || x.len() != n {
        return Err(Error::InvalidInput(format!(
            "dimension mismatch: {}x{} operator, rhs {}, guess {}",
            n,
            op.ncols(),
            rhs.len(),
            x.len()
        )));
    }
    if !(tol > 0.0 && tol <= 1e-2) {
        return Err(Error::InvalidInput(format!("tolerance {tol} outside (0, 1e-2]")));
    }
    let bnorm = norm2(rhs);
    if bnorm == 0.0 {
        return Ok((
            vec![0.0; n],
            SolveReport {
                iterations: 0,
                final_residual: 0.0,
                converged: true,
            },
        ));
    }
    let inv_diag: Vec<f64> = op
        .diagonal()
        .into_iter()
        .map(|d| if d > 0.0 { 1.0 / d } else { 1.0 })
        .collect();

    let mut ap = vec![0.0; n];
    let mut r = vec![0.0; n];
    let true_residual = |x: &[f64], r: &mut [f64], ap: &mut [f64]| {
        op.mul_vec_into(x, ap);
        for i in 0..n {
            r[i] = rhs[i] - ap[i];
        }
        norm2(r) / bnorm
    };
    let mut rel = true_residual(&x, &mut r, &mut ap);
    if !rel.is_finite() {
        return Err(Error::Breakdown { iterations: 0 });
    }
    let mut iterations = 0;
    let mut restarts = 0;
    while rel > tol && iterations < max_iter {
        let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(a, b)| a * b).collect();
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        loop {
            op.mul_vec_into(&p, &mut ap);
            let pap = dot(&p, &ap);
            let alpha = rz / pap;
            if !alpha.is_finite() {
                return Err(Error::Breakdown { iterations });
            }
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            iterations += 1;
            let rec = norm2(&r) / bnorm;
            if !rec.is_finite() {
                return Err(Error::Breakdown { iterations });
            }
            if rec <= tol || iterations >= max_iter {
                break;
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
        }
        rel = true_residual(&x, &mut r, &mut ap);
        restarts += 1;
        if restarts > 50 {
            break;
        }
    }
    Ok((
        x,
        SolveReport {
            iterations,
            final_residual: rel,
            converged: rel <= tol,
        },
    ))
}

/// Like [`solve_spd_from`], but non-convergence is an error.
pub fn solve_spd_strict(
    op: &CsrMatrix,
    rhs: &[f64],
    guess: Option<Vec<f64>>,
    tol: f64,
) -> Result<Vec<f64>> {
    let guess = guess.unwrap_or_else(|| vec![0.0; rhs.len()]);
    let (x, report) = solve_spd_from(op, rhs, guess, tol, default_max_iter(rhs.len()))?;
    if !report.converged {
        return Err(Error::NotConverged {
            iterations: report.iterations,
            residual: report.final_residual,
            tol,
        });
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn poisson_1d(n: usize) -> CsrMatrix {
        let rows = (0..n)
            .map(|i| {
                let mut r = vec![(i, 2.0)];
                if i > 0 {
                    r.push((i - 1, -1.0));
                }
                if i + 1 < n {
                    r.push((i + 1, -1.0));
                }
                r
            })
            .collect();
        CsrMatrix::from_rows(n, rows)
    }

    fn laplacian_2d(m: usize) -> CsrMatrix {
        let idx = |i: usize, j: usize| j * m + i;
        let mut rows = Vec::new();
        for j in 0..m {
            for i in 0..m {
                let mut r = vec![(idx(i, j), 4.0)];
                if i > 0 {
                    r.push((idx(i - 1, j), -1.0));
                }
                if i + 1 < m {
                    r.push((idx(i + 1, j), -1.0));
                }
                if j > 0 {
                    r.push((idx(i, j - 1), -1.0));
                }
                if j + 1 < m {
                    r.push((idx(i, j + 1), -1.0));
                }
                rows.push(r);
            }
        }
        CsrMatrix::from_rows(m * m, rows)
    }

    /// Thomas algorithm for a constant tridiagonal (sub, diag, sup) system.
    fn thomas(sub: f64, diag: f64, sup: f64, d: &[f64]) -> Vec<f64> {
        let n = d.len();
        let mut c = vec![0.0; n];
        let mut e = vec![0.0; n];
        c[0] = sup / diag;
        e[0] = d[0] / diag;
        for i in 1..n {
            let m = diag - sub * c[i - 1];
            c[i] = sup / m;
            e[i] = (d[i] - sub * e[i - 1]) / m;
        }
        let mut x = vec![0.0; n];
        x[n - 1] = e[n - 1];
        for i in (0..n - 1).rev() {
            x[i] = e[i] - c[i] * x[i + 1];
        }
        x
    }

    #[test]
    fn identity_solves_in_one_iteration() {
        let mut e1 = vec![0.0; 5];
        e1[0] = 1.0;
        let (x, rep) = solve_spd(&CsrMatrix::identity(5), &e1, 1e-10, 10).unwrap();
        assert_eq!(x, e1);
        assert_eq!(rep.iterations, 1);
        assert!(rep.converged);
    }

    #[test]
    fn matches_thomas_on_1d_poisson() {
        let a = poisson_1d(7);
        let b = vec![1.0; 7];
        let (x, rep) = solve_spd(&a, &b, 1e-12, 100).unwrap();
        let oracle = thomas(-1.0, 2.0, -1.0, &b);
        assert!(rep.converged);
        for (u, v) in x.iter().zip(&oracle) {
            assert!((u - v).abs() < 1e-10);
        }
    }

    #[test]
    fn converges_on_2d_laplacian_within_5n() {
        let a = laplacian_2d(31);
        let n = a.nrows();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (x, rep) = solve_spd(&a, &b, 1e-10, 5 * n).unwrap();
        assert!(rep.converged);
        let r: Vec<f64> = a.mul_vec(&x).iter().zip(&b).map(|(p, q)| p - q).collect();
        assert!(norm2(&r) <= 1e-10 * norm2(&b));
        // Round trip: solving A x' = A x reproduces x.
        let (x2, _) = solve_spd(&a, &a.mul_vec(&x), 1e-12, 5 * n).unwrap();
        let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (u, v) in x.iter().zip(&x2) {
            assert!((u - v).abs() <= 1e-8 * scale);
        }
    }

    #[test]
    fn exhausted_iterations_are_reported_not_fatal() {
        let a = laplacian_2d(15);
        let b = vec![1.0; a.nrows()];
        let (_, rep) = solve_spd(&a, &b, 1e-12, 3).unwrap();
        assert!(!rep.converged);
        assert_eq!(rep.iterations, 3);
        assert!(solve_spd_strict(&poisson_1d(4), &[1.0; 4], None, 1e-10).is_ok());
    }

    #[test]
    fn nan_breaks_down() {
        let a = CsrMatrix::from_rows(2, vec![vec![(0, f64::NAN)], vec![(1, 1.0)]]);
        assert!(matches!(
            solve_spd(&a, &[1.0, 1.0], 1e-10, 10),
            Err(Error::Breakdown { .. })
        ));
    }

    #[test]
    fn rejects_bad_tolerance() {
        assert!(solve_spd(&poisson_1d(3), &[1.0; 3], 0.5, 10).is_err());
    }

    #[test]
    fn symmetry_norms() {
        let a = poisson_1d(5);
        assert_eq!(a.asymmetry_inf(), 0.0);
        assert_eq!(a.norm_inf(), 4.0);
        let b = CsrMatrix::from_rows(2, vec![vec![(0, 1.0), (1, 2.0)], vec![(1, 1.0)]]);
        assert_eq!(b.asymmetry_inf(), 2.0);
    }
}
