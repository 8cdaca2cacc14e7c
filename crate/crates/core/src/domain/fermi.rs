use serde::{Deserialize, Serialize};

use super::TriangleMesh;
use crate::field::{Quantity, ScalarField};
use crate::geometry::{
    conformal_factor, cross, dot3, geodesic_direction_at, geodesic_distance, norm3, pushforward, spherical_boundary_curvature,
    stereo_lift, PlanarPoint, SpherePoint,
};

/// Boundary-adapted orthonormal frame at a boundary vertex.
///
/// `tau` and `eta` hold chart components of unit vectors for the conformal
/// metric, so their Euclidean length is `1 / rho`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FermiFrame {
    pub base: PlanarPoint,
    pub tau: [f64; 2],
    pub eta: [f64; 2],
    pub kappa_tilde: f64,
}

impl FermiFrame {
    /// Inner product of chart vectors in the conformal metric at the base point.
    pub fn g_inner(&self, a: [f64; 2], b: [f64; 2]) -> f64 {
        conformal_factor(self.base) * (a[0] * b[0] + a[1] * b[1])
    }
}

pub fn fermi_frame(mesh: &TriangleMesh, boundary_index: usize) -> FermiFrame {
    let v = mesh.boundary_vertices[boundary_index];
    let base = mesh.vertices[v];
    let nu = mesh.boundary_normals[boundary_index];
    let rho = conformal_factor(base).sqrt();
    // counterclockwise tangent; the interior lies to its left
    let tau = [-nu[1] / rho, nu[0] / rho];
    let eta = [-nu[0] / rho, -nu[1] / rho];
    let kappa_tilde = spherical_boundary_curvature(base, mesh.boundary_kappa_e[boundary_index], nu).unwrap_or_else(|_| {
        let n = nu[0].hypot(nu[1]);
        spherical_boundary_curvature(base, mesh.boundary_kappa_e[boundary_index], [nu[0] / n, nu[1] / n]).unwrap_or(f64::NAN)
    });
    FermiFrame { base, tau, eta, kappa_tilde }
}

/// Spherical distance from every vertex to the boundary polygon, whose edges
/// are taken as great-circle arcs between consecutive boundary vertices.
pub fn boundary_distance(mesh: &TriangleMesh) -> ScalarField {
    let arcs = boundary_arcs(mesh);
    let values = (0..mesh.n_vertices())
        .map(|i| {
            if mesh.is_boundary(i) {
                return 0.0;
            }
            nearest_on_arcs(&arcs, stereo_lift(mesh.vertices[i])).distance
        })
        .collect();
    ScalarField::new(values, Quantity::Distance, f64::NAN)
}

/// Closest boundary point to a vertex.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryFoot {
    pub point: SpherePoint,
    /// Index into `boundary_vertices` of the arc start.
    pub arc: usize,
    pub distance: f64,
}

pub(crate) fn boundary_arcs(mesh: &TriangleMesh) -> Vec<(SpherePoint, SpherePoint)> {
    let lifted: Vec<SpherePoint> = mesh.boundary_vertices.iter().map(|&b| stereo_lift(mesh.vertices[b])).collect();
    let n = lifted.len();
    (0..n).map(|k| (lifted[k], lifted[(k + 1) % n])).collect()
}

pub(crate) fn nearest_on_arcs(arcs: &[(SpherePoint, SpherePoint)], p: SpherePoint) -> BoundaryFoot {
    let mut best = BoundaryFoot { point: p, arc: 0, distance: f64::INFINITY };
    let pa = p.as_array();
    for (k, &(a, b)) in arcs.iter().enumerate() {
        let (aa, ba) = (a.as_array(), b.as_array());
        let n = cross(aa, ba);
        let nn = norm3(n);
        let mut candidate = None;
        if nn > 1e-15 {
            let n = [n[0] / nn, n[1] / nn, n[2] / nn];
            let s = dot3(pa, n);
            let proj = [pa[0] - s * n[0], pa[1] - s * n[1], pa[2] - s * n[2]];
            if norm3(proj) > 1e-12 {
                let f = SpherePoint::from_vector(proj);
                let fa = f.as_array();
                // inside the arc iff a -> f and f -> b turn the same way as a -> b
                if dot3(cross(aa, fa), n) >= 0.0 && dot3(cross(fa, ba), n) >= 0.0 {
                    candidate = Some((f, s.abs().clamp(0.0, 1.0).asin()));
                }
            }
        }
        let (f, d) = candidate.unwrap_or_else(|| {
            let (da, db) = (geodesic_distance(p, a), geodesic_distance(p, b));
            if da <= db {
                (a, da)
            } else {
                (b, db)
            }
        });
        if d < best.distance {
            best = BoundaryFoot { point: f, arc: k, distance: d };
        }
    }
    best
}

/// Closest point of the boundary polygon (great-circle edges) to vertex `i`.
pub fn nearest_boundary(mesh: &TriangleMesh, i: usize) -> BoundaryFoot {
    nearest_on_arcs(&boundary_arcs(mesh), stereo_lift(mesh.vertices[i]))
}

/// Fermi directions at vertex `i`, transported along the normal geodesic from
/// its boundary foot point: `(tau, eta)` as unit components in the orthonormal
/// frame `rho^-1 (d/dX, d/dY)`.
pub fn transported_frame(mesh: &TriangleMesh, i: usize, foot: &BoundaryFoot) -> ([f64; 2], [f64; 2]) {
    let x = stereo_lift(mesh.vertices[i]);
    let eta = match geodesic_direction_at(foot.point, x) {
        Some(t) => {
            let w = pushforward(x, t);
            let n = w[0].hypot(w[1]);
            [w[0] / n, w[1] / n]
        }
        None => {
            let nu = mesh.boundary_normals[foot.arc];
            [-nu[0], -nu[1]]
        }
    };
    // eta is tau rotated by +90 degrees
    ([eta[1], -eta[0]], eta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{generate_mesh, planarize, DomainSpec};
    use std::f64::consts::{FRAC_PI_3, FRAC_PI_4};

    fn mesh(r: f64, h: f64) -> TriangleMesh {
        generate_mesh(&planarize(&DomainSpec::ball(r), 64).unwrap(), h).unwrap()
    }

    #[test]
    fn distance_field_on_ball() {
        let h = 0.02;
        let m = mesh(FRAC_PI_4, h);
        let d = boundary_distance(&m);
        for &b in &m.boundary_vertices {
            assert_eq!(d.values[b], 0.0);
        }
        assert!(m.interior_vertices().all(|i| d.values[i] > 0.0));
        let center =
            (0..m.n_vertices()).min_by(|&a, &b| m.vertices[a].norm().partial_cmp(&m.vertices[b].norm()).unwrap()).unwrap();
        assert!((d.values[center] - FRAC_PI_4).abs() < 2.0 * h);
        // radial geometry: d = R - r for every vertex, up to the boundary sampling error
        for i in 0..m.n_vertices() {
            let r = 2.0 * m.vertices[i].norm().atan();
            assert!((d.values[i] - (FRAC_PI_4 - r)).abs() < 0.5 * h * h, "{} vs {}", d.values[i], FRAC_PI_4 - r);
        }
    }

    #[test]
    fn distance_center_converges() {
        let errs: Vec<f64> = [0.08, 0.04, 0.02]
            .iter()
            .map(|&h| {
                let m = mesh(FRAC_PI_3, h);
                let d = boundary_distance(&m);
                let c = (0..m.n_vertices())
                    .min_by(|&a, &b| m.vertices[a].norm().partial_cmp(&m.vertices[b].norm()).unwrap())
                    .unwrap();
                let r = 2.0 * m.vertices[c].norm().atan();
                (d.values[c] + r - FRAC_PI_3).abs()
            })
            .collect();
        assert!(errs.iter().zip([0.08f64, 0.04, 0.02]).all(|(&e, h)| e < 0.5 * h * h), "{errs:?}");
        assert!(errs[2] < errs[1] && errs[1] < errs[0]);
    }

    #[test]
    fn frames_on_ball() {
        let m = mesh(FRAC_PI_3, 0.03);
        for k in 0..m.boundary_vertices.len() {
            let f = fermi_frame(&m, k);
            assert!(f.g_inner(f.tau, f.eta).abs() < 1e-10);
            assert!((f.g_inner(f.tau, f.tau) - 1.0).abs() < 1e-10);
            assert!((f.g_inner(f.eta, f.eta) - 1.0).abs() < 1e-10);
            assert!((f.kappa_tilde - 1.0 / FRAC_PI_3.tan()).abs() < 1e-6);
            // inward normal points at the origin
            let inward = [-f.base.x, -f.base.y];
            let n = inward[0].hypot(inward[1]) * f.eta[0].hypot(f.eta[1]);
            let cos = (inward[0] * f.eta[0] + inward[1] * f.eta[1]) / n;
            assert!(cos.clamp(-1.0, 1.0).acos() < 1e-6);
            // tau is counterclockwise
            assert!(f.base.x * f.tau[1] - f.base.y * f.tau[0] > 0.0);
        }
    }

    #[test]
    fn transported_frame_is_radial_on_ball() {
        let m = mesh(FRAC_PI_4, 0.03);
        for i in m.interior_vertices().step_by(7) {
            let foot = nearest_boundary(&m, i);
            let (tau, eta) = transported_frame(&m, i, &foot);
            let q = m.vertices[i];
            if q.norm() < 0.05 {
                continue;
            }
            let cos = -(q.x * eta[0] + q.y * eta[1]) / q.norm();
            assert!(cos > 1.0 - 1e-3, "cos {cos}");
            assert!((tau[0] * eta[0] + tau[1] * eta[1]).abs() < 1e-14);
        }
    }
}
