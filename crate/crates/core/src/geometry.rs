//! The unit sphere, its stereographic chart from the north pole, and the
//! conformal metric `rho^2 (dX^2 + dY^2)` with `rho^2 = 4 / (1 + X^2 + Y^2)^2`.

use serde::{Deserialize, Serialize};

use crate::domain::{planarize_unchecked, DomainSpec};
use crate::error::{Error, Result};

/// Points with `z >= 1 - POLE_GUARD` are treated as the projection pole.
pub const POLE_GUARD: f64 = 1e-9;
/// Default threshold separating uniform convexity from the marginal case.
pub const CURVATURE_TOLERANCE: f64 = 1e-6;
const UNIT_NORMAL_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpherePoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PlanarPoint {
    pub x: f64,
    pub y: f64,
}

impl SpherePoint {
    pub const SOUTH_POLE: SpherePoint = SpherePoint { x: 0.0, y: 0.0, z: -1.0 };
    pub const NORTH_POLE: SpherePoint = SpherePoint { x: 0.0, y: 0.0, z: 1.0 };

    /// Normalizes an arbitrary non-zero vector onto the sphere.
    pub fn from_vector(v: [f64; 3]) -> Self {
        let n = norm3(v);
        SpherePoint { x: v[0] / n, y: v[1] / n, z: v[2] / n }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    /// Point at geodesic distance `r` from the south pole along the meridian of azimuth `theta`.
    pub fn from_south_polar(r: f64, theta: f64) -> Self {
        SpherePoint { x: r.sin() * theta.cos(), y: r.sin() * theta.sin(), z: -r.cos() }
    }
}

impl PlanarPoint {
    pub fn new(x: f64, y: f64) -> Self {
        PlanarPoint { x, y }
    }

    pub fn norm_sq(&self) -> f64 {
        self.x * self.x + self.y * self.y
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn dist(&self, other: &PlanarPoint) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

pub fn stereo_project(p: SpherePoint) -> Result<PlanarPoint> {
    if p.z >= 1.0 - POLE_GUARD {
        return Err(Error::PoleProjection { z: p.z });
    }
    let s = 1.0 - p.z;
    Ok(PlanarPoint { x: p.x / s, y: p.y / s })
}

pub fn stereo_lift(q: PlanarPoint) -> SpherePoint {
    let r2 = q.norm_sq();
    let d = 1.0 + r2;
    SpherePoint { x: 2.0 * q.x / d, y: 2.0 * q.y / d, z: (r2 - 1.0) / d }
}

/// `rho^2(q) = 4 / (1 + |q|^2)^2`, in `(0, 4]`.
pub fn conformal_factor(q: PlanarPoint) -> f64 {
    let d = 1.0 + q.norm_sq();
    4.0 / (d * d)
}

/// Gradient of `f = log(rho)` in chart coordinates.
pub fn log_rho_gradient(q: PlanarPoint) -> [f64; 2] {
    let d = 1.0 + q.norm_sq();
    [-2.0 * q.x / d, -2.0 * q.y / d]
}

/// Geodesic curvature on the sphere of a planar boundary curve, given its
/// Euclidean curvature and outward Euclidean unit normal at `q`.
pub fn spherical_boundary_curvature(q: PlanarPoint, kappa_e: f64, nu_e: [f64; 2]) -> Result<f64> {
    let norm = nu_e[0].hypot(nu_e[1]);
    if (norm - 1.0).abs() > UNIT_NORMAL_TOLERANCE {
        return Err(Error::NonUnitNormal { norm });
    }
    Ok(0.5 * (1.0 + q.norm_sq()) * kappa_e - (q.x * nu_e[0] + q.y * nu_e[1]))
}

pub fn geodesic_distance(p: SpherePoint, q: SpherePoint) -> f64 {
    let d = p.x * q.x + p.y * q.y + p.z * q.z;
    d.clamp(-1.0, 1.0).acos()
}

/// Chart components of the pushforward of a tangent vector `t` at `p`.
pub fn pushforward(p: SpherePoint, t: [f64; 3]) -> [f64; 2] {
    let s = 1.0 - p.z;
    [t[0] / s + p.x * t[2] / (s * s), t[1] / s + p.y * t[2] / (s * s)]
}

/// Lift of a chart tangent vector `w` at `q` to a vector in R^3 tangent to the sphere.
pub fn pullback(q: PlanarPoint, w: [f64; 2]) -> [f64; 3] {
    let r2 = q.norm_sq();
    let d = 1.0 + r2;
    let dot = q.x * w[0] + q.y * w[1];
    let d2 = d * d;
    [2.0 * w[0] / d - 4.0 * q.x * dot / d2, 2.0 * w[1] / d - 4.0 * q.y * dot / d2, 2.0 * dot / d - 2.0 * (r2 - 1.0) * dot / d2]
}

/// Point reached from `p` after arclength `s` along the great circle with unit tangent `t`.
pub fn exp_map(p: SpherePoint, t: [f64; 3], s: f64) -> SpherePoint {
    let (sn, cs) = s.sin_cos();
    SpherePoint::from_vector([p.x * cs + t[0] * sn, p.y * cs + t[1] * sn, p.z * cs + t[2] * sn])
}

/// Unit tangent at `to` of the minimizing geodesic from `from`, pointing away from `from`.
pub fn geodesic_direction_at(from: SpherePoint, to: SpherePoint) -> Option<[f64; 3]> {
    let d = geodesic_distance(from, to);
    if d < 1e-14 || (std::f64::consts::PI - d) < 1e-12 {
        return None;
    }
    let a = from.as_array();
    let b = to.as_array();
    let c = d.cos();
    let e = [b[0] - a[0] * c, b[1] - a[1] * c, b[2] - a[2] * c];
    // derivative of a cos s + e_hat sin s at s = d
    let sn = d.sin();
    let t = [-a[0] * sn + e[0] / sn * c, -a[1] * sn + e[1] / sn * c, -a[2] * sn + e[2] / sn * c];
    let n = norm3(t);
    Some([t[0] / n, t[1] / n, t[2] / n])
}

/// Rotation of R^3 stored as a row-major 3x3 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation(pub [[f64; 3]; 3]);

impl Rotation {
    pub const IDENTITY: Rotation = Rotation([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);

    /// Rotation about the unit `axis` by `angle` (Rodrigues).
    pub fn about_axis(axis: [f64; 3], angle: f64) -> Self {
        let n = norm3(axis);
        let [x, y, z] = [axis[0] / n, axis[1] / n, axis[2] / n];
        let (s, c) = angle.sin_cos();
        let t = 1.0 - c;
        Rotation([
            [t * x * x + c, t * x * y - s * z, t * x * z + s * y],
            [t * x * y + s * z, t * y * y + c, t * y * z - s * x],
            [t * x * z - s * y, t * y * z + s * x, t * z * z + c],
        ])
    }

    /// The minimal rotation carrying `p` to the south pole.
    pub fn to_south_pole(p: SpherePoint) -> Self {
        let a = p.as_array();
        let b = SpherePoint::SOUTH_POLE.as_array();
        let axis = cross(a, b);
        let sin = norm3(axis);
        let cos = dot3(a, b);
        if sin < 1e-15 {
            if cos > 0.0 {
                return Rotation::IDENTITY;
            }
            return Rotation::about_axis([1.0, 0.0, 0.0], std::f64::consts::PI);
        }
        Rotation::about_axis(axis, sin.atan2(cos))
    }

    pub fn apply(&self, v: [f64; 3]) -> [f64; 3] {
        let m = &self.0;
        [
            m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
            m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
            m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
        ]
    }

    pub fn apply_point(&self, p: SpherePoint) -> SpherePoint {
        SpherePoint::from_vector(self.apply(p.as_array()))
    }

    pub fn inverse(&self) -> Rotation {
        let m = &self.0;
        Rotation([[m[0][0], m[1][0], m[2][0]], [m[0][1], m[1][1], m[2][1]], [m[0][2], m[1][2], m[2][2]]])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvexityVerdict {
    UniformlyConvex,
    ConvexMarginal,
    NotConvex,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvexityCheck {
    pub kappa_min: f64,
    pub verdict: ConvexityVerdict,
}

pub fn check_uniform_convexity(domain: &DomainSpec, n_samples: usize) -> Result<ConvexityCheck> {
    check_uniform_convexity_with(domain, n_samples, CURVATURE_TOLERANCE)
}

pub fn check_uniform_convexity_with(domain: &DomainSpec, n_samples: usize, tolerance: f64) -> Result<ConvexityCheck> {
    let curve = planarize_unchecked(domain, n_samples)?;
    let mut kappa_min = f64::INFINITY;
    for s in &curve.samples {
        if !s.kappa_e.is_finite() || !s.point.x.is_finite() || !s.point.y.is_finite() {
            return Err(Error::DegenerateBoundary("non-finite curvature sample".into()));
        }
        let k = spherical_boundary_curvature(s.point, s.kappa_e, s.normal)?;
        kappa_min = kappa_min.min(k);
    }
    let verdict = if kappa_min > tolerance {
        ConvexityVerdict::UniformlyConvex
    } else if kappa_min >= -tolerance {
        ConvexityVerdict::ConvexMarginal
    } else {
        ConvexityVerdict::NotConvex
    };
    Ok(ConvexityCheck { kappa_min, verdict })
}

pub(crate) fn norm3(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

pub(crate) fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, FRAC_PI_4, FRAC_PI_6, PI};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn projection_examples() {
        let o = stereo_project(SpherePoint::SOUTH_POLE).unwrap();
        assert!(close(o.x, 0.0, 1e-15) && close(o.y, 0.0, 1e-15));
        let e = stereo_project(SpherePoint { x: 1.0, y: 0.0, z: 0.0 }).unwrap();
        assert!(close(e.x, 1.0, 1e-15) && close(e.y, 0.0, 1e-15));
        for &r in &[0.1, 0.7, 1.3, 2.5] {
            let q = stereo_project(SpherePoint::from_south_polar(r, 0.0)).unwrap();
            assert!(close(q.x, (r / 2.0).tan(), 1e-13));
        }
        assert!(matches!(stereo_project(SpherePoint::NORTH_POLE), Err(Error::PoleProjection { .. })));
    }

    #[test]
    fn lift_examples() {
        let s = stereo_lift(PlanarPoint::new(0.0, 0.0));
        assert_eq!(s, SpherePoint::SOUTH_POLE);
        let e = stereo_lift(PlanarPoint::new(1.0, 0.0));
        assert!(close(e.x, 1.0, 1e-15) && close(e.z, 0.0, 1e-15));
    }

    #[test]
    fn conformal_factor_examples() {
        assert_eq!(conformal_factor(PlanarPoint::new(0.0, 0.0)), 4.0);
        assert_eq!(conformal_factor(PlanarPoint::new(1.0, 0.0)), 1.0);
        assert!(close(conformal_factor(PlanarPoint::new(3.0, 4.0)), 4.0 / 676.0, 1e-15));
    }

    #[test]
    fn boundary_curvature_on_geodesic_circles() {
        // equator: planar unit circle
        let k = spherical_boundary_curvature(PlanarPoint::new(1.0, 0.0), 1.0, [1.0, 0.0]).unwrap();
        assert!(close(k, 0.0, 1e-15));
        let t = FRAC_PI_6.tan();
        let k = spherical_boundary_curvature(PlanarPoint::new(t, 0.0), 1.0 / t, [1.0, 0.0]).unwrap();
        assert!(close(k, (1.0 - t * t) / (2.0 * t), 1e-14));
        assert!(close(k, 1.0 / FRAC_PI_3.tan(), 1e-12));
        let k = spherical_boundary_curvature(PlanarPoint::default(), 3.5, [0.6, 0.8]).unwrap();
        assert!(close(k, 1.75, 1e-15));
        assert!(matches!(
            spherical_boundary_curvature(PlanarPoint::default(), 1.0, [1.0, 0.1]),
            Err(Error::NonUnitNormal { .. })
        ));
    }

    #[test]
    fn curvature_matches_cot_along_whole_circles() {
        for &r in &[0.2, FRAC_PI_6, FRAC_PI_4, 1.0, FRAC_PI_3, 1.4] {
            let t = (r / 2.0).tan();
            for i in 0..64 {
                let th = 2.0 * PI * i as f64 / 64.0;
                let q = PlanarPoint::new(t * th.cos(), t * th.sin());
                let k = spherical_boundary_curvature(q, 1.0 / t, [th.cos(), th.sin()]).unwrap();
                assert!(close(k, 1.0 / r.tan(), 1e-8), "r={r} k={k}");
            }
        }
    }

    #[test]
    fn distance_examples() {
        let p = SpherePoint::from_south_polar(0.3, 1.0);
        assert_eq!(geodesic_distance(p, p), 0.0);
        let e = SpherePoint { x: 0.0, y: 1.0, z: 0.0 };
        assert!(close(geodesic_distance(SpherePoint::SOUTH_POLE, e), FRAC_PI_2, 1e-15));
        assert!(close(geodesic_distance(SpherePoint::SOUTH_POLE, SpherePoint::NORTH_POLE), PI, 1e-15));
    }

    #[test]
    fn distance_matches_chart_length_of_segment_image() {
        // the planar segment through the origin is the image of a meridian arc
        let a = PlanarPoint::new(0.0, 0.0);
        let b = PlanarPoint::new(0.3, -0.4);
        let n = 4000;
        let mut len = 0.0;
        for i in 0..n {
            let t = (i as f64 + 0.5) / n as f64;
            let q = PlanarPoint::new(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y));
            len += conformal_factor(q).sqrt() * a.dist(&b) / n as f64;
        }
        let d = geodesic_distance(stereo_lift(a), stereo_lift(b));
        assert!(close(len, d, 1e-6), "len={len} d={d}");
    }

    #[test]
    fn geodesic_direction_points_away() {
        let a = SpherePoint::SOUTH_POLE;
        let b = SpherePoint::from_south_polar(0.5, 0.0);
        let t = geodesic_direction_at(a, b).unwrap();
        let c = exp_map(b, t, 0.1);
        assert!(close(geodesic_distance(a, c), 0.6, 1e-12));
    }

    #[test]
    fn rotation_to_south_pole() {
        let p = SpherePoint::from_vector([0.3, -0.2, 0.5]);
        let r = Rotation::to_south_pole(p);
        let s = r.apply_point(p);
        assert!(close(s.z, -1.0, 1e-14));
        let back = r.inverse().apply_point(s);
        assert!(close(back.x, p.x, 1e-14) && close(back.y, p.y, 1e-14));
    }

    proptest! {
        #[test]
        fn lift_project_round_trip(r in 0.0f64..1.0, th in 0.0f64..std::f64::consts::TAU) {
            let q = PlanarPoint::new(r * th.cos(), r * th.sin());
            let p = stereo_lift(q);
            prop_assert!((p.x * p.x + p.y * p.y + p.z * p.z - 1.0).abs() < 1e-12);
            let back = stereo_project(p).unwrap();
            prop_assert!((back.x - q.x).abs() < 1e-12 && (back.y - q.y).abs() < 1e-12);
        }

        #[test]
        fn project_lift_round_trip(v in prop::array::uniform3(-1.0f64..1.0)) {
            prop_assume!(norm3(v) > 0.1);
            let p = SpherePoint::from_vector(v);
            prop_assume!(p.z < 0.99);
            let back = stereo_lift(stereo_project(p).unwrap());
            prop_assert!(geodesic_distance(p, back) < 1e-7);
            prop_assert!((back.x - p.x).abs() < 1e-12 && (back.y - p.y).abs() < 1e-12 && (back.z - p.z).abs() < 1e-12);
        }

        #[test]
        fn metric_pullback_is_isometric(v in prop::array::uniform3(-1.0f64..1.0), w in prop::array::uniform3(-1.0f64..1.0)) {
            prop_assume!(norm3(v) > 0.1);
            let p = SpherePoint::from_vector(v);
            prop_assume!(p.z < 0.9);
            let a = p.as_array();
            let wd = dot3(w, a);
            let t = [w[0] - wd * a[0], w[1] - wd * a[1], w[2] - wd * a[2]];
            prop_assume!(norm3(t) > 0.1);
            let tn = norm3(t);
            let t = [t[0] / tn, t[1] / tn, t[2] / tn];
            // finite-difference pushforward along the geodesic
            let s = 1e-6;
            let qp = stereo_project(exp_map(p, t, s)).unwrap();
            let qm = stereo_project(exp_map(p, t, -s)).unwrap();
            let dq = [(qp.x - qm.x) / (2.0 * s), (qp.y - qm.y) / (2.0 * s)];
            let q = stereo_project(p).unwrap();
            let len2 = conformal_factor(q) * (dq[0] * dq[0] + dq[1] * dq[1]);
            prop_assert!((len2 - 1.0).abs() < 1e-8, "len2 = {}", len2);
            let an = pushforward(p, t);
            prop_assert!((an[0] - dq[0]).abs() < 1e-6 && (an[1] - dq[1]).abs() < 1e-6);
            let back = pullback(q, an);
            prop_assert!((back[0] - t[0]).abs() < 1e-10 && (back[2] - t[2]).abs() < 1e-10);
        }

        #[test]
        fn distance_is_a_metric(a in prop::array::uniform3(-1.0f64..1.0), b in prop::array::uniform3(-1.0f64..1.0), c in prop::array::uniform3(-1.0f64..1.0)) {
            prop_assume!(norm3(a) > 0.1 && norm3(b) > 0.1 && norm3(c) > 0.1);
            let (a, b, c) = (SpherePoint::from_vector(a), SpherePoint::from_vector(b), SpherePoint::from_vector(c));
            prop_assert!((geodesic_distance(a, b) - geodesic_distance(b, a)).abs() < 1e-15);
            prop_assert!(geodesic_distance(a, c) <= geodesic_distance(a, b) + geodesic_distance(b, c) + 1e-12);
        }
    }
}
