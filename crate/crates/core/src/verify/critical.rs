use serde::{Deserialize, Serialize};

use super::definiteness::DEFINITENESS_RTOL;
use super::hessian::{HessianField, HessianSample};
use crate::domain::TriangleMesh;
use crate::geometry::PlanarPoint;

/// Candidate threshold `eta_crit = CRIT_FACTOR * h * max |grad u|`.
pub const CRIT_FACTOR: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriticalType {
    Max,
    Saddle,
    Min,
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CriticalPoint {
    pub location: PlanarPoint,
    pub vertex: usize,
    pub gradient_norm: f64,
    pub hessian_eigs: [f64; 2],
    #[serde(rename = "type")]
    pub kind: CriticalType,
}

/// Critical points of `u` from its recovered derivatives `hu`.
///
/// A vertex is a candidate when its Euclidean gradient norm is below
/// `eta_crit` and strictly below that of every neighbour; its location is
/// refined by one Newton step on the local fit. Classification uses the
/// covariant Hessian eigenvalues against `eps_def = 1e-8 max |H|`.
pub fn critical_points(mesh: &TriangleMesh, hu: &HessianField) -> Vec<CriticalPoint> {
    critical_points_with(mesh, hu, DEFINITENESS_RTOL)
}

pub fn critical_points_with(mesh: &TriangleMesh, hu: &HessianField, rtol: f64) -> Vec<CriticalPoint> {
    let gnorm: Vec<f64> = hu.fits.iter().map(|f| f.map_or(f64::INFINITY, |f| f.grad[0].hypot(f.grad[1]))).collect();
    let gmax = gnorm.iter().copied().filter(|g| g.is_finite()).fold(0.0, f64::max);
    let hmax = hu.samples.iter().flatten().map(HessianSample::max_abs).fold(0.0, f64::max);
    let eps = rtol * hmax;
    let eta = CRIT_FACTOR * mesh.h * gmax;
    let mut out: Vec<CriticalPoint> = Vec::new();
    for i in mesh.interior_vertices() {
        let Some(fit) = hu.fits[i] else { continue };
        if !(gnorm[i] <= eta) || mesh.neighbors(i).iter().any(|&j| gnorm[j] <= gnorm[i]) {
            continue;
        }
        let q = mesh.vertices[i];
        let h = fit.hess;
        let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
        let location = if det.abs() > 1e-300 {
            let dx = (h[1][1] * fit.grad[0] - h[0][1] * fit.grad[1]) / det;
            let dy = (h[0][0] * fit.grad[1] - h[1][0] * fit.grad[0]) / det;
            let step = dx.hypot(dy);
            // a Newton step leaving the vertex patch is not trusted
            if step <= 2.0 * mesh.h {
                PlanarPoint::new(q.x - dx, q.y - dy)
            } else {
                q
            }
        } else {
            q
        };
        let s = HessianSample::from_chart(location, &fit.shifted(q, location));
        let kind = if s.eig_max < -eps {
            CriticalType::Max
        } else if s.eig_min > eps {
            CriticalType::Min
        } else if s.eig_min < -eps && s.eig_max > eps {
            CriticalType::Saddle
        } else {
            CriticalType::Degenerate
        };
        if out.iter().any(|c| c.location.dist(&location) < mesh.h) {
            continue;
        }
        out.push(CriticalPoint { location, vertex: i, gradient_norm: gnorm[i], hessian_eigs: [s.eig_min, s.eig_max], kind });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{generate_mesh, planarize, DomainSpec};
    use crate::field::{Quantity, ScalarField};
    use crate::verify::hessian::covariant_hessian;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn height_function_has_one_maximum_at_the_pole() {
        let m = generate_mesh(&planarize(&DomainSpec::ball(FRAC_PI_2), 64).unwrap(), 0.03).unwrap();
        let z = ScalarField::new(
            m.vertices.iter().map(|q| (1.0 - q.norm_sq()) / (1.0 + q.norm_sq())).collect(),
            Quantity::Sample,
            f64::NAN,
        );
        let hz = covariant_hessian(&m, &z).unwrap();
        let cps = critical_points(&m, &hz);
        assert_eq!(cps.len(), 1, "{cps:?}");
        assert_eq!(cps[0].kind, CriticalType::Max);
        assert!(cps[0].location.norm() < 1e-6);
        assert!((cps[0].hessian_eigs[0] + 1.0).abs() < 5e-3);
    }

    #[test]
    fn saddle_is_classified() {
        let m = generate_mesh(&planarize(&DomainSpec::ball(0.5), 64).unwrap(), 0.02).unwrap();
        let f = ScalarField::new(
            m.vertices.iter().map(|q| (q.x - 0.011).powi(2) - (q.y + 0.007).powi(2)).collect(),
            Quantity::Sample,
            f64::NAN,
        );
        let cps = critical_points(&m, &covariant_hessian(&m, &f).unwrap());
        assert_eq!(cps.len(), 1);
        assert_eq!(cps[0].kind, CriticalType::Saddle);
        assert!(cps[0].location.dist(&PlanarPoint::new(0.011, -0.007)) < 1e-8);
    }
}
