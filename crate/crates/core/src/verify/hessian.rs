use serde::{Deserialize, Serialize};

use crate::domain::TriangleMesh;
use crate::error::{Error, Result};
use crate::field::{Normalization, Quantity, ScalarField};
use crate::geometry::{conformal_factor, log_rho_gradient, PlanarPoint};
use crate::par::map_indices;
use crate::solver::EIGEN_BAND;

/// Polynomial degree of the local least-squares fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FitOrder {
    Quadratic,
    /// Second derivatives accurate to O(h^2) instead of O(h).
    #[default]
    Cubic,
}

impl FitOrder {
    fn unknowns(self) -> usize {
        match self {
            FitOrder::Quadratic => 5,
            FitOrder::Cubic => 9,
        }
    }

    /// Patch size below which the fit drops to the next lower order.
    fn min_points(self) -> usize {
        match self {
            FitOrder::Quadratic => 6,
            FitOrder::Cubic => 12,
        }
    }
}

/// Euclidean chart derivatives recovered at a vertex.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalFit {
    pub grad: [f64; 2],
    pub hess: [[f64; 2]; 2],
}

impl LocalFit {
    /// First-order Taylor transport of the gradient to `q`, keeping the Hessian.
    pub fn shifted(&self, from: PlanarPoint, q: PlanarPoint) -> LocalFit {
        let d = [q.x - from.x, q.y - from.y];
        let h = self.hess;
        LocalFit {
            grad: [self.grad[0] + h[0][0] * d[0] + h[0][1] * d[1], self.grad[1] + h[1][0] * d[0] + h[1][1] * d[1]],
            hess: h,
        }
    }

    pub fn blend(&self, other: &LocalFit, t: f64) -> LocalFit {
        let l = |a: f64, b: f64| (1.0 - t) * a + t * b;
        LocalFit {
            grad: [l(self.grad[0], other.grad[0]), l(self.grad[1], other.grad[1])],
            hess: [
                [l(self.hess[0][0], other.hess[0][0]), l(self.hess[0][1], other.hess[0][1])],
                [l(self.hess[1][0], other.hess[1][0]), l(self.hess[1][1], other.hess[1][1])],
            ],
        }
    }
}

/// Covariant Hessian in the orthonormal frame `rho^-1 (d/dX, d/dY)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HessianSample {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub phi: f64,
    pub trace: f64,
    pub eig_min: f64,
    pub eig_max: f64,
    /// `|grad v|_g`.
    pub grad_norm: f64,
}

impl HessianSample {
    pub fn from_components(a: f64, b: f64, c: f64, grad_norm: f64) -> Self {
        let mean = 0.5 * (a + c);
        let rad = (0.5 * (a - c)).hypot(b);
        HessianSample { a, b, c, phi: a * c - b * b, trace: a + c, eig_min: mean - rad, eig_max: mean + rad, grad_norm }
    }

    /// Applies the conformal Christoffel correction to Euclidean chart derivatives at `q`.
    pub fn from_chart(q: PlanarPoint, fit: &LocalFit) -> Self {
        let h = covariant_chart_hessian(q, fit);
        let rho2 = conformal_factor(q);
        let g = fit.grad;
        HessianSample::from_components(h[0][0] / rho2, h[0][1] / rho2, h[1][1] / rho2, g[0].hypot(g[1]) / rho2.sqrt())
    }

    /// `H(w, w)` for `w` given in orthonormal-frame components.
    pub fn quadratic(&self, w: [f64; 2]) -> f64 {
        self.a * w[0] * w[0] + 2.0 * self.b * w[0] * w[1] + self.c * w[1] * w[1]
    }

    /// Components in the orthonormal frame rotated by `theta`.
    pub fn in_frame(&self, theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        let (e1, e2) = ([c, s], [-s, c]);
        let b = self.a * e1[0] * e2[0] + self.b * (e1[0] * e2[1] + e1[1] * e2[0]) + self.c * e1[1] * e2[1];
        HessianSample::from_components(self.quadratic(e1), b, self.quadratic(e2), self.grad_norm)
    }

    pub fn max_abs(&self) -> f64 {
        self.eig_min.abs().max(self.eig_max.abs())
    }
}

/// Corrected Hessian `v_ij - f_i v_j - f_j v_i + delta_ij (f . grad v)` in chart
/// components, with `f = log rho`.
pub fn covariant_chart_hessian(q: PlanarPoint, fit: &LocalFit) -> [[f64; 2]; 2] {
    let f = log_rho_gradient(q);
    let g = fit.grad;
    let fg = f[0] * g[0] + f[1] * g[1];
    let mut h = fit.hess;
    for i in 0..2 {
        for j in 0..2 {
            h[i][j] -= f[i] * g[j] + f[j] * g[i];
        }
        h[i][i] += fg;
    }
    h
}

/// Recovered derivatives and covariant Hessians of one field.
#[derive(Debug, Clone, PartialEq)]
pub struct HessianField {
    pub fits: Vec<Option<LocalFit>>,
    pub samples: Vec<Option<HessianSample>>,
}

impl HessianField {
    pub fn sample(&self, i: usize) -> Option<&HessianSample> {
        self.samples[i].as_ref()
    }
}

/// `v = u^((1-p)/2)`, or `log u` when `p` is within the eigen band of 1.
///
/// Boundary vertices get `v = 0` for `p < 1` and are marked non-finite otherwise.
pub fn power_transform(mesh: &TriangleMesh, u: &ScalarField, p: f64) -> Result<ScalarField> {
    if u.len() != mesh.n_vertices() {
        return Err(Error::FieldMismatch { values: u.len(), vertices: mesh.n_vertices() });
    }
    let log = (p - 1.0).abs() <= EIGEN_BAND;
    let alpha = 0.5 * (1.0 - p);
    let mut values = Vec::with_capacity(u.len());
    for (i, &x) in u.values.iter().enumerate() {
        if mesh.is_boundary(i) {
            values.push(if log {
                f64::NEG_INFINITY
            } else if p < 1.0 {
                0.0
            } else {
                f64::INFINITY
            });
            continue;
        }
        if !(x > 0.0) {
            return Err(Error::NonPositive { vertex: i, value: x });
        }
        values.push(if log { x.ln() } else { x.powf(alpha) });
    }
    let quantity = if log { Quantity::LogU } else { Quantity::V };
    Ok(ScalarField { values, quantity, p, normalization: Normalization::None })
}

/// Hessian of the power transform `v = g(u)` from the recovered derivatives of `u`,
/// by `grad^2 v = g'(u) grad^2 u + g''(u) du (x) du`.
///
/// `v` is singular at the boundary for every `p`, and fitting it directly
/// loses accuracy within a few element layers of the boundary, whereas `u` is
/// smooth up to the boundary. Boundary vertices (where `u = 0`) get no sample.
pub fn transform_hessian(mesh: &TriangleMesh, u: &ScalarField, hu: &HessianField, p: f64) -> HessianField {
    let log = (p - 1.0).abs() <= EIGEN_BAND;
    let alpha = 0.5 * (1.0 - p);
    let fits: Vec<Option<LocalFit>> = (0..mesh.n_vertices())
        .map(|i| {
            let x = u.values[i];
            if mesh.is_boundary(i) || !(x > 0.0) {
                return None;
            }
            let (d1, d2) = if log {
                (1.0 / x, -1.0 / (x * x))
            } else {
                (alpha * x.powf(alpha - 1.0), alpha * (alpha - 1.0) * x.powf(alpha - 2.0))
            };
            hu.fits[i].map(|f| {
                let g = f.grad;
                let mut hess = [[0.0; 2]; 2];
                for a in 0..2 {
                    for b in 0..2 {
                        hess[a][b] = d1 * f.hess[a][b] + d2 * g[a] * g[b];
                    }
                }
                LocalFit { grad: [d1 * g[0], d1 * g[1]], hess }
            })
        })
        .collect();
    let samples =
        fits.iter().enumerate().map(|(i, f)| f.as_ref().map(|f| HessianSample::from_chart(mesh.vertices[i], f))).collect();
    HessianField { fits, samples }
}

/// Householder least squares for a small dense system; `None` if rank deficient.
#[allow(clippy::needless_range_loop)] // row and column indices are both live
fn least_squares(mut a: Vec<Vec<f64>>, mut b: Vec<f64>, n: usize) -> Option<Vec<f64>> {
    let m = a.len();
    if m < n {
        return None;
    }
    let scale = a.iter().flat_map(|r| r.iter()).fold(0.0f64, |s, x| s.max(x.abs()));
    for k in 0..n {
        let norm = (k..m).map(|i| a[i][k] * a[i][k]).sum::<f64>().sqrt();
        if norm <= 1e-10 * scale {
            return None;
        }
        let alpha = if a[k][k] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = (k..m).map(|i| a[i][k]).collect();
        v[0] -= alpha;
        let vv: f64 = v.iter().map(|x| x * x).sum();
        for j in k..n {
            let s: f64 = (k..m).map(|i| v[i - k] * a[i][j]).sum::<f64>() * 2.0 / vv;
            for i in k..m {
                a[i][j] -= s * v[i - k];
            }
        }
        let s: f64 = (k..m).map(|i| v[i - k] * b[i]).sum::<f64>() * 2.0 / vv;
        for i in k..m {
            b[i] -= s * v[i - k];
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let s: f64 = (k + 1..n).map(|j| a[k][j] * x[j]).sum();
        x[k] = (b[k] - s) / a[k][k];
    }
    Some(x)
}

/// Weighted least-squares Taylor fit of `values` around vertex `i`, with the
/// constant term pinned to the nodal value and weights `1 / (d^2 + eps)`.
///
/// Uses the 2-ring, widening to the 3-ring when too few neighbours carry
/// finite values, and drops from cubic to quadratic if needed.
pub fn fit_derivatives(mesh: &TriangleMesh, values: &[f64], i: usize, order: FitOrder) -> Result<LocalFit> {
    let q0 = mesh.vertices[i];
    let v0 = values[i];
    let h = mesh.h;
    let mut usable = Vec::new();
    for rings in [2, 3] {
        usable = mesh.ring(i, rings).into_iter().filter(|&j| values[j].is_finite()).collect();
        if usable.len() >= order.min_points() {
            break;
        }
    }
    let order = if usable.len() >= order.min_points() { order } else { FitOrder::Quadratic };
    if usable.len() < FitOrder::Quadratic.min_points() {
        return Err(Error::PatchDeficient { vertex: i, usable: usable.len() });
    }
    let n = order.unknowns();
    let mut rows = Vec::with_capacity(usable.len());
    let mut rhs = Vec::with_capacity(usable.len());
    for &j in &usable {
        let (x, y) = ((mesh.vertices[j].x - q0.x) / h, (mesh.vertices[j].y - q0.y) / h);
        let w = (1.0 / (x * x + y * y + 1e-6)).sqrt();
        let mut row = vec![x, y, 0.5 * x * x, x * y, 0.5 * y * y];
        if order == FitOrder::Cubic {
            row.extend_from_slice(&[x * x * x, x * x * y, x * y * y, y * y * y]);
        }
        rows.push(row.into_iter().map(|c| c * w).collect());
        rhs.push((values[j] - v0) * w);
    }
    let c = least_squares(rows, rhs, n).ok_or(Error::PatchDeficient { vertex: i, usable: usable.len() })?;
    let h2 = h * h;
    Ok(LocalFit { grad: [c[0] / h, c[1] / h], hess: [[c[2] / h2, c[3] / h2], [c[3] / h2, c[4] / h2]] })
}

/// Covariant Hessian of `v` at every vertex with a finite value, boundary
/// vertices included (their fits are one-sided).
pub fn covariant_hessian(mesh: &TriangleMesh, v: &ScalarField) -> Result<HessianField> {
    covariant_hessian_with(mesh, v, FitOrder::default())
}

pub fn covariant_hessian_with(mesh: &TriangleMesh, v: &ScalarField, order: FitOrder) -> Result<HessianField> {
    if v.len() != mesh.n_vertices() {
        return Err(Error::FieldMismatch { values: v.len(), vertices: mesh.n_vertices() });
    }
    let fits: Vec<Result<Option<LocalFit>>> = map_indices(mesh.n_vertices(), |i| {
        if !v.values[i].is_finite() {
            return Ok(None);
        }
        fit_derivatives(mesh, &v.values, i, order).map(Some)
    });
    let fits: Vec<Option<LocalFit>> = fits.into_iter().collect::<Result<_>>()?;
    let samples =
        fits.iter().enumerate().map(|(i, f)| f.as_ref().map(|f| HessianSample::from_chart(mesh.vertices[i], f))).collect();
    Ok(HessianField { fits, samples })
}
