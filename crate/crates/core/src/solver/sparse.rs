#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Rows below this count are multiplied sequentially.
#[cfg(feature = "parallel")]
const PARALLEL_ROWS: usize = 4096;

/// Square sparse matrix in compressed row storage.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_offsets: Vec<usize>,
    pub col_indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from (row, col, value) triplets, summing duplicates.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_unstable_by_key(|t| (t.0, t.1));
        let mut row_offsets = vec![0usize; n + 1];
        let mut col_indices = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
                continue;
            }
            row_offsets[r + 1] += 1;
            col_indices.push(c);
            values.push(v);
            last = Some((r, c));
        }
        for i in 0..n {
            row_offsets[i + 1] += row_offsets[i];
        }
        CsrMatrix { n, row_offsets, col_indices, values }
    }

    pub fn identity(n: usize) -> Self {
        CsrMatrix::from_triplets(n, (0..n).map(|i| (i, i, 1.0)).collect())
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_offsets[i]..self.row_offsets[i + 1];
        self.col_indices[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|&(c, _)| c == j).map_or(0.0, |(_, v)| v)
    }

    fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        let mut s = 0.0;
        for k in self.row_offsets[i]..self.row_offsets[i + 1] {
            s += self.values[k] * x[self.col_indices[k]];
        }
        s
    }

    pub fn mul_into(&self, x: &[f64], y: &mut [f64]) {
        #[cfg(feature = "parallel")]
        if self.n >= PARALLEL_ROWS {
            y.par_iter_mut().enumerate().for_each(|(i, yi)| *yi = self.row_dot(i, x));
            return;
        }
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row_dot(i, x);
        }
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_into(x, &mut y);
        y
    }

    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        dot(x, &self.mul(x))
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// Largest `|a_ij - a_ji|` over stored entries.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst
    }

    /// Principal submatrix on the `keep` indices, renumbered in order.
    pub fn restrict(&self, keep: &[usize]) -> CsrMatrix {
        let mut index = vec![usize::MAX; self.n];
        for (k, &i) in keep.iter().enumerate() {
            index[i] = k;
        }
        let mut trip = Vec::new();
        for (k, &i) in keep.iter().enumerate() {
            for (j, v) in self.row(i) {
                if index[j] != usize::MAX {
                    trip.push((k, index[j], v));
                }
            }
        }
        CsrMatrix::from_triplets(keep.len(), trip)
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Solves `A x = b` for symmetric positive definite `A` by Jacobi-preconditioned
/// conjugate gradients, stopping when `|A x - b| <= tol |b|`.
pub fn cg_solve(a: &CsrMatrix, b: &[f64], tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    let mut x = vec![0.0; a.n];
    cg_solve_from(a, b, &mut x, tol, max_iter)?;
    Ok(x)
}

/// As [`cg_solve`], starting from and overwriting `x`.
pub fn cg_solve_from(a: &CsrMatrix, b: &[f64], x: &mut [f64], tol: f64, max_iter: usize) -> Result<CgStats> {
    let n = a.n;
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(CgStats { iterations: 0, relative_residual: 0.0 });
    }
    let inv_diag: Vec<f64> = a.diagonal().iter().map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 }).collect();
    let mut r = a.mul(x);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let mut rnorm = norm2(&r);
    if rnorm <= tol * bnorm {
        return Ok(CgStats { iterations: 0, relative_residual: rnorm / bnorm });
    }
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(ri, di)| ri * di).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for it in 1..=max_iter {
        a.mul_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::NoConvergence { iterations: it, residual: rnorm / bnorm });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        rnorm = norm2(&r);
        if rnorm <= tol * bnorm {
            // confirm against the true residual
            let ax = a.mul(x);
            let true_res = ax.iter().zip(b).map(|(u, v)| (v - u) * (v - u)).sum::<f64>().sqrt();
            if true_res <= tol * bnorm {
                return Ok(CgStats { iterations: it, relative_residual: true_res / bnorm });
            }
            for i in 0..n {
                r[i] = b[i] - ax[i];
            }
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
    Err(Error::NoConvergence { iterations: max_iter, residual: rnorm / bnorm })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Dense Gaussian elimination with partial pivoting (test oracle).
    #[allow(clippy::needless_range_loop)]
    fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
        let n = b.len();
        for k in 0..n {
            let piv = (k..n).max_by(|&i, &j| a[i][k].abs().partial_cmp(&a[j][k].abs()).unwrap()).unwrap();
            a.swap(k, piv);
            b.swap(k, piv);
            for i in k + 1..n {
                let f = a[i][k] / a[k][k];
                for j in k..n {
                    a[i][j] -= f * a[k][j];
                }
                b[i] -= f * b[k];
            }
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|j| a[i][j] * x[j]).sum();
            x[i] = (b[i] - s) / a[i][i];
        }
        x
    }

    #[test]
    fn identity_system() {
        let a = CsrMatrix::identity(5);
        let b = vec![1.0, -2.0, 3.0, 0.5, 7.0];
        let x = cg_solve(&a, &b, 1e-14, 10).unwrap();
        assert_eq!(x, b);
    }

    #[test]
    fn zero_rhs_takes_no_iterations() {
        let a = CsrMatrix::identity(3);
        let mut x = vec![1.0; 3];
        let s = cg_solve_from(&a, &[0.0; 3], &mut x, 1e-12, 10).unwrap();
        assert_eq!(s.iterations, 0);
        assert_eq!(x, vec![0.0; 3]);
    }

    #[test]
    fn random_spd_matches_dense_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 10;
        let g: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let mut dense = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                dense[i][j] = (0..n).map(|k| g[i][k] * g[j][k]).sum::<f64>() + if i == j { 0.5 } else { 0.0 };
            }
        }
        let trip = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| (i, j, dense[i][j])).collect();
        let a = CsrMatrix::from_triplets(n, trip);
        assert!(a.asymmetry() < 1e-15);
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x = cg_solve(&a, &b, 1e-14, 200).unwrap();
        let y = dense_solve(dense, b);
        for (u, v) in x.iter().zip(&y) {
            assert!((u - v).abs() < 1e-10, "{u} {v}");
        }
    }

    #[test]
    fn iteration_cap_reports_no_convergence() {
        let trip = vec![(0, 0, 4.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 3.0), (2, 2, 10.0), (1, 2, 0.5), (2, 1, 0.5)];
        let a = CsrMatrix::from_triplets(3, trip);
        assert!(matches!(cg_solve(&a, &[1.0, 2.0, 3.0], 1e-15, 1), Err(Error::NoConvergence { .. })));
    }

    #[test]
    fn triplets_sum_duplicates() {
        let a = CsrMatrix::from_triplets(2, vec![(1, 0, 1.0), (0, 0, 2.0), (1, 0, 3.0)]);
        assert_eq!(a.get(1, 0), 4.0);
        assert_eq!(a.nnz(), 2);
        let r = a.restrict(&[1]);
        assert_eq!(r.n, 1);
        assert_eq!(r.nnz(), 0);
    }
}
