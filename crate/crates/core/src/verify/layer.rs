use serde::Serialize;

use super::hessian::HessianField;
use crate::domain::{boundary_distance, fermi_frame, nearest_boundary, transported_frame, TriangleMesh};
use crate::error::{Error, Result};
use crate::geometry::conformal_factor;
use crate::solver::EIGEN_BAND;

/// Fewest band vertices for a meaningful check.
pub const MIN_BAND_VERTICES: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundaryLayerReport {
    pub delta: f64,
    pub band_vertices: usize,
    /// Minimum inward normal derivative of `u` over boundary vertices.
    pub a0: f64,
    /// Minimum geodesic curvature of the boundary.
    pub kappa0: f64,
    pub u_tautau_max: f64,
    pub u_etaeta_min: f64,
    pub v_definite: bool,
    pub v_violations: usize,
    /// `u_tautau_max` and `u_etaeta_min` divided by `kappa0 a0 / 2`.
    pub tautau_margin: f64,
    pub etaeta_margin: f64,
}

impl BoundaryLayerReport {
    pub fn passed(&self) -> bool {
        self.u_tautau_max < 0.0 && self.u_etaeta_min > 0.0 && self.v_definite
    }
}

/// Sign checks in the band `2h <= dist <= delta` along the boundary, in the
/// Fermi frame transported from each vertex's nearest boundary point.
///
/// `hu` and `hv` are the recovered Hessians of `u` and of its power transform;
/// `hu` must include the one-sided fits at boundary vertices.
pub fn boundary_layer_check(
    mesh: &TriangleMesh,
    hu: &HessianField,
    hv: &HessianField,
    p: f64,
    delta: f64,
) -> Result<BoundaryLayerReport> {
    if !(delta >= 3.0 * mesh.h) {
        return Err(Error::InvalidBand(format!("delta {delta} below 3h = {}", 3.0 * mesh.h)));
    }
    let dist = boundary_distance(mesh);
    let inradius = dist.max();
    if delta > 0.5 * inradius {
        return Err(Error::InvalidBand(format!("delta {delta} exceeds half the inradius {inradius}")));
    }
    let mut a0 = f64::INFINITY;
    let mut kappa0 = f64::INFINITY;
    for (k, &b) in mesh.boundary_vertices.iter().enumerate() {
        let fit = hu.fits[b].ok_or(Error::PatchDeficient { vertex: b, usable: 0 })?;
        let nu = mesh.boundary_normals[k];
        let rho = conformal_factor(mesh.vertices[b]).sqrt();
        a0 = a0.min(-(fit.grad[0] * nu[0] + fit.grad[1] * nu[1]) / rho);
        kappa0 = kappa0.min(fermi_frame(mesh, k).kappa_tilde);
    }
    let band: Vec<usize> =
        mesh.interior_vertices().filter(|&i| dist.values[i] >= 2.0 * mesh.h && dist.values[i] <= delta).collect();
    if band.len() < MIN_BAND_VERTICES {
        return Err(Error::LayerTooThin { count: band.len() });
    }
    // log u is concave like the sublinear transforms
    let sign = if p > 1.0 + EIGEN_BAND { 1.0 } else { -1.0 };
    let (mut tt_max, mut nn_min, mut violations) = (f64::NEG_INFINITY, f64::INFINITY, 0);
    for &i in &band {
        let su = hu.samples[i].ok_or(Error::PatchDeficient { vertex: i, usable: 0 })?;
        let foot = nearest_boundary(mesh, i);
        let (tau, eta) = transported_frame(mesh, i, &foot);
        tt_max = tt_max.max(su.quadratic(tau));
        nn_min = nn_min.min(su.quadratic(eta));
        let definite = hv.samples[i].is_some_and(|s| sign * s.eig_min > 0.0 && sign * s.eig_max > 0.0);
        if !definite {
            violations += 1;
        }
    }
    let scale = 0.5 * kappa0 * a0;
    Ok(BoundaryLayerReport {
        delta,
        band_vertices: band.len(),
        a0,
        kappa0,
        u_tautau_max: tt_max,
        u_etaeta_min: nn_min,
        v_definite: violations == 0,
        v_violations: violations,
        tautau_margin: tt_max / scale,
        etaeta_margin: nn_min / scale,
    })
}
