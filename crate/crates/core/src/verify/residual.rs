use serde::Serialize;

use super::definiteness::included_vertices;
use super::hessian::{covariant_hessian_with, power_transform, transform_hessian, FitOrder, HessianField};
use crate::domain::TriangleMesh;
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::geometry::conformal_factor;
use crate::solver::{FemSystem, EIGEN_BAND};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Residuals {
    /// Relative weighted L2 norm of `Delta u + u^p` (or `Delta u + lambda u`).
    pub pde_residual_l2: f64,
    /// Relative weighted L2 mismatch of the equation satisfied by `v`.
    pub deltav_residual_l2: f64,
}

/// Spherical area attached to each vertex (one third of each incident triangle).
pub fn vertex_weights(mesh: &TriangleMesh) -> Vec<f64> {
    let mut w = vec![0.0; mesh.n_vertices()];
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let a = mesh.triangle_area(t) / 3.0;
        for &i in tri {
            w[i] += a * conformal_factor(mesh.vertices[i]);
        }
    }
    w
}

fn relative_l2(idx: &[usize], w: &[f64], lhs: impl Fn(usize) -> f64, rhs: impl Fn(usize) -> f64) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for &i in idx {
        let r = rhs(i);
        num += w[i] * (lhs(i) - r).powi(2);
        den += w[i] * r * r;
    }
    (num / den).sqrt()
}

/// Residuals of the solved equation and of the transformed equation
///
/// `Delta v = (1/v) (-(1+p)/(1-p) |grad v|^2 - (1-p)/2)` for `p != 1`, or
/// `Delta v = -lambda - |grad v|^2` for `v = log u` at `p = 1`,
///
/// evaluated with recovered derivatives at vertices at least `margin` from the boundary.
pub fn pde_residual(mesh: &TriangleMesh, u: &ScalarField, p: f64, lambda: Option<f64>, margin: f64) -> Result<Residuals> {
    pde_residual_with(mesh, u, p, lambda, margin, FitOrder::default())
}

pub fn pde_residual_with(
    mesh: &TriangleMesh,
    u: &ScalarField,
    p: f64,
    lambda: Option<f64>,
    margin: f64,
    order: FitOrder,
) -> Result<Residuals> {
    let log = (p - 1.0).abs() <= EIGEN_BAND;
    let lambda = match (log, lambda) {
        (true, Some(l)) => l,
        (true, None) => return Err(Error::InvalidExponent(p)),
        _ => 0.0,
    };
    let v = power_transform(mesh, u, p)?;
    let hu = covariant_hessian_with(mesh, u, order)?;
    let hv = transform_hessian(mesh, u, &hu, p);
    pde_residual_from(mesh, u, &v, &hu, &hv, p, lambda, margin)
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn pde_residual_from(
    mesh: &TriangleMesh,
    u: &ScalarField,
    v: &ScalarField,
    hu: &HessianField,
    hv: &HessianField,
    p: f64,
    lambda: f64,
    margin: f64,
) -> Result<Residuals> {
    let log = (p - 1.0).abs() <= EIGEN_BAND;
    let idx = included_vertices(mesh, hv, margin);
    if idx.is_empty() {
        return Err(Error::EmptyInterior);
    }
    let w = vertex_weights(mesh);
    let source = |i: usize| {
        if log {
            lambda * u.values[i]
        } else if p == 0.0 {
            1.0
        } else {
            u.values[i].powf(p)
        }
    };
    let pde = relative_l2(&idx, &w, |i| hu.samples[i].map_or(f64::NAN, |s| s.trace), |i| -source(i));
    let deltav = relative_l2(
        &idx,
        &w,
        |i| hv.samples[i].unwrap().trace,
        |i| {
            let g2 = hv.samples[i].unwrap().grad_norm.powi(2);
            if log {
                -lambda - g2
            } else {
                (-(1.0 + p) / (1.0 - p) * g2 - 0.5 * (1.0 - p)) / v.values[i]
            }
        },
    );
    Ok(Residuals { pde_residual_l2: pde, deltav_residual_l2: deltav })
}

/// Discrete Laplace-Beltrami operator `-(K v)_i / m_i` with the row-summed
/// weighted mass `m_i`, i.e. the cotangent Laplacian divided by the spherical
/// vertex area.
///
/// Rows next to the boundary miss the boundary flux and are only meaningful a
/// few element layers inside. The consistent mass inverse would spread that
/// boundary error through the whole domain.
pub fn discrete_laplace_beltrami(system: &FemSystem, v: &[f64]) -> Vec<f64> {
    let kv = system.stiffness_full.mul(v);
    let lumped = system.mass_rho_full.mul(&vec![1.0; v.len()]);
    kv.iter().zip(&lumped).map(|(k, m)| -k / m).collect()
}

/// Relative weighted L2 difference between the Hessian trace and the discrete
/// Laplace-Beltrami operator over vertices at least `margin` from the boundary.
pub fn trace_identity(
    mesh: &TriangleMesh,
    system: &FemSystem,
    v: &ScalarField,
    hessian: &HessianField,
    margin: f64,
) -> Result<f64> {
    if v.values.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidDomain("trace identity needs a field finite on every vertex".into()));
    }
    let lap = discrete_laplace_beltrami(system, &v.values);
    let idx = included_vertices(mesh, hessian, margin);
    if idx.is_empty() {
        return Err(Error::EmptyInterior);
    }
    let w = vertex_weights(mesh);
    Ok(relative_l2(&idx, &w, |i| hessian.samples[i].unwrap().trace, |i| lap[i]))
}
