//! Domain descriptions and their planar images in the stereographic chart.

mod fermi;
mod mesh;

pub use fermi::{boundary_distance, fermi_frame, nearest_boundary, transported_frame, BoundaryFoot, FermiFrame};
pub use mesh::{generate_mesh, read_mesh, write_mesh, MeshQuality, TriangleMesh};

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::geometry::{stereo_project, PlanarPoint, Rotation, SpherePoint};

/// Tolerance on the closed unit disk containment of boundary samples.
pub const DISK_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DomainSpec {
    /// Geodesic ball; planarized after rotating `center` to the south pole.
    GeodesicBall { center: SpherePoint, radius: f64 },
    /// Closed counterclockwise curve given directly in the chart.
    PlanarConvexCurve { samples: Vec<PlanarPoint> },
    /// The planar ellipse `(tan(a/2) cos t, tan(b/2) sin t)`.
    SphericalEllipse { a: f64, b: f64 },
}

impl DomainSpec {
    pub fn ball(radius: f64) -> Self {
        DomainSpec::GeodesicBall { center: SpherePoint::SOUTH_POLE, radius }
    }

    pub fn ellipse(a: f64, b: f64) -> Self {
        DomainSpec::SphericalEllipse { a, b }
    }

    /// Rotation applied before projecting, mapping the designated interior point to the south pole.
    pub fn normalization(&self) -> Rotation {
        match self {
            DomainSpec::GeodesicBall { center, .. } => Rotation::to_south_pole(*center),
            _ => Rotation::IDENTITY,
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            DomainSpec::GeodesicBall { center, radius } => {
                let n = center.x * center.x + center.y * center.y + center.z * center.z;
                if (n - 1.0).abs() > 1e-12 {
                    return Err(Error::InvalidDomain(format!("ball center is not a unit vector (|c|^2 = {n})")));
                }
                if !(*radius > 0.0 && *radius < PI) {
                    return Err(Error::InvalidDomain(format!("ball radius {radius} outside (0, pi)")));
                }
            }
            DomainSpec::SphericalEllipse { a, b } => {
                for s in [a, b] {
                    if !(*s > 0.0 && *s < PI) {
                        return Err(Error::InvalidDomain(format!("ellipse semi-axis {s} outside (0, pi)")));
                    }
                }
            }
            DomainSpec::PlanarConvexCurve { samples } => {
                if samples.len() < 3 {
                    return Err(Error::DegenerateBoundary(format!("{} curve samples", samples.len())));
                }
                if samples.iter().any(|q| !q.x.is_finite() || !q.y.is_finite()) {
                    return Err(Error::DegenerateBoundary("non-finite curve sample".into()));
                }
            }
        }
        Ok(())
    }
}

/// Analytic or piecewise-linear description of a planar boundary curve.
#[derive(Debug, Clone, PartialEq)]
pub enum CurveShape {
    Circle {
        radius: f64,
    },
    Ellipse {
        a: f64,
        b: f64,
    },
    /// Closed counterclockwise polyline (first point not repeated).
    Polyline(Vec<PlanarPoint>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundarySample {
    pub point: PlanarPoint,
    /// Euclidean curvature, positive where the curve bends toward the interior.
    pub kappa_e: f64,
    /// Outward Euclidean unit normal.
    pub normal: [f64; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryCurve {
    pub shape: CurveShape,
    pub samples: Vec<BoundarySample>,
}

impl CurveShape {
    pub fn length(&self) -> f64 {
        match self {
            CurveShape::Circle { radius } => 2.0 * PI * radius,
            CurveShape::Ellipse { .. } => ellipse_arclength_table(self, 4096).last().copied().unwrap_or(0.0),
            CurveShape::Polyline(pts) => polyline_length(pts),
        }
    }

    /// `n` samples equally spaced in arclength, counterclockwise.
    pub fn sample(&self, n: usize) -> Vec<BoundarySample> {
        match self {
            CurveShape::Circle { radius } => (0..n)
                .map(|i| {
                    let t = 2.0 * PI * i as f64 / n as f64;
                    let (s, c) = t.sin_cos();
                    BoundarySample { point: PlanarPoint::new(radius * c, radius * s), kappa_e: 1.0 / radius, normal: [c, s] }
                })
                .collect(),
            CurveShape::Ellipse { a, b } => {
                let table = ellipse_arclength_table(self, 8 * n.max(512));
                let m = table.len() - 1;
                let total = table[m];
                (0..n)
                    .map(|i| {
                        let target = total * i as f64 / n as f64;
                        let k = table.partition_point(|&s| s <= target).clamp(1, m);
                        let frac = (target - table[k - 1]) / (table[k] - table[k - 1]);
                        let t = 2.0 * PI * ((k - 1) as f64 + frac) / m as f64;
                        ellipse_sample(*a, *b, t)
                    })
                    .collect()
            }
            CurveShape::Polyline(pts) => resample_polyline(pts, n),
        }
    }
}

fn ellipse_sample(a: f64, b: f64, t: f64) -> BoundarySample {
    let (s, c) = t.sin_cos();
    let speed2 = a * a * s * s + b * b * c * c;
    let nrm = (b * b * c * c + a * a * s * s).sqrt();
    BoundarySample {
        point: PlanarPoint::new(a * c, b * s),
        kappa_e: a * b / speed2.powf(1.5),
        normal: [b * c / nrm, a * s / nrm],
    }
}

// cumulative arclength at parameters 2*pi*k/m, k = 0..=m (midpoint rule per cell)
fn ellipse_arclength_table(shape: &CurveShape, m: usize) -> Vec<f64> {
    let CurveShape::Ellipse { a, b } = *shape else {
        return vec![0.0];
    };
    let mut out = Vec::with_capacity(m + 1);
    out.push(0.0);
    let dt = 2.0 * PI / m as f64;
    let mut acc = 0.0;
    for k in 0..m {
        // Simpson on each cell
        let f = |t: f64| (a * a * t.sin().powi(2) + b * b * t.cos().powi(2)).sqrt();
        let t0 = k as f64 * dt;
        acc += dt / 6.0 * (f(t0) + 4.0 * f(t0 + 0.5 * dt) + f(t0 + dt));
        out.push(acc);
    }
    out
}

fn polyline_length(pts: &[PlanarPoint]) -> f64 {
    let n = pts.len();
    (0..n).map(|i| pts[i].dist(&pts[(i + 1) % n])).sum()
}

/// Discrete curvature and outward normal at each vertex of a closed counterclockwise polyline.
fn polyline_vertex_data(pts: &[PlanarPoint]) -> Vec<(f64, [f64; 2])> {
    let n = pts.len();
    (0..n)
        .map(|i| {
            let a = pts[(i + n - 1) % n];
            let b = pts[i];
            let c = pts[(i + 1) % n];
            let (ab, bc, ca) = (a.dist(&b), b.dist(&c), c.dist(&a));
            let cross = (b.x - a.x) * (c.y - b.y) - (b.y - a.y) * (c.x - b.x);
            // signed circumcircle curvature through a, b, c
            let kappa = 2.0 * cross / (ab * bc * ca);
            let (tx, ty) = (c.x - a.x, c.y - a.y);
            let tn = tx.hypot(ty);
            (kappa, [ty / tn, -tx / tn])
        })
        .collect()
}

fn resample_polyline(pts: &[PlanarPoint], n: usize) -> Vec<BoundarySample> {
    let m = pts.len();
    let data = polyline_vertex_data(pts);
    let mut cum = Vec::with_capacity(m + 1);
    cum.push(0.0);
    for i in 0..m {
        cum.push(cum[i] + pts[i].dist(&pts[(i + 1) % m]));
    }
    let total = cum[m];
    (0..n)
        .map(|j| {
            let target = total * j as f64 / n as f64;
            let k = cum.partition_point(|&s| s <= target).clamp(1, m) - 1;
            let seg = cum[k + 1] - cum[k];
            let t = if seg > 0.0 { (target - cum[k]) / seg } else { 0.0 };
            let (a, b) = (pts[k], pts[(k + 1) % m]);
            let (ka, na) = data[k];
            let (kb, nb) = data[(k + 1) % m];
            let nx = (1.0 - t) * na[0] + t * nb[0];
            let ny = (1.0 - t) * na[1] + t * nb[1];
            let nn = nx.hypot(ny);
            BoundarySample {
                point: PlanarPoint::new(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)),
                kappa_e: (1.0 - t) * ka + t * kb,
                normal: [nx / nn, ny / nn],
            }
        })
        .collect()
}

fn signed_area(pts: &[PlanarPoint]) -> f64 {
    let n = pts.len();
    0.5 * (0..n)
        .map(|i| {
            let (a, b) = (pts[i], pts[(i + 1) % n]);
            a.x * b.y - b.x * a.y
        })
        .sum::<f64>()
}

fn segments_cross(p1: PlanarPoint, p2: PlanarPoint, q1: PlanarPoint, q2: PlanarPoint) -> bool {
    let orient = |a: PlanarPoint, b: PlanarPoint, c: PlanarPoint| (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    d1 * d2 < 0.0 && d3 * d4 < 0.0
}

/// Fails with [`Error::SelfIntersection`] if two non-adjacent edges of the closed polyline cross.
pub fn check_simple(pts: &[PlanarPoint]) -> Result<()> {
    let n = pts.len();
    for i in 0..n {
        let (a, b) = (pts[i], pts[(i + 1) % n]);
        for j in (i + 2)..n {
            if i == 0 && j == n - 1 {
                continue;
            }
            if segments_cross(a, b, pts[j], pts[(j + 1) % n]) {
                return Err(Error::SelfIntersection { first: i, second: j });
            }
        }
    }
    Ok(())
}

impl BoundaryCurve {
    pub fn points(&self) -> Vec<PlanarPoint> {
        self.samples.iter().map(|s| s.point).collect()
    }
}

fn curve_shape(domain: &DomainSpec) -> Result<CurveShape> {
    domain.validate()?;
    Ok(match domain {
        DomainSpec::GeodesicBall { radius, center } => {
            // after normalization the center projects to the origin
            let o = stereo_project(domain.normalization().apply_point(*center))?;
            debug_assert!(o.norm() < 1e-9);
            CurveShape::Circle { radius: (radius / 2.0).tan() }
        }
        DomainSpec::SphericalEllipse { a, b } => CurveShape::Ellipse { a: (a / 2.0).tan(), b: (b / 2.0).tan() },
        DomainSpec::PlanarConvexCurve { samples } => {
            let mut pts = samples.clone();
            if pts.len() > 3 && pts.first() == pts.last() {
                pts.pop();
            }
            check_simple(&pts)?;
            let area = signed_area(&pts);
            if area.abs() < 1e-14 {
                return Err(Error::DegenerateBoundary("curve encloses no area".into()));
            }
            if area < 0.0 {
                pts.reverse();
            }
            CurveShape::Polyline(pts)
        }
    })
}

/// Planar boundary of the domain without the unit-disk containment check.
pub fn planarize_unchecked(domain: &DomainSpec, n_boundary: usize) -> Result<BoundaryCurve> {
    if n_boundary < 3 {
        return Err(Error::DegenerateBoundary(format!("{n_boundary} boundary samples requested")));
    }
    let shape = curve_shape(domain)?;
    let samples = shape.sample(n_boundary);
    Ok(BoundaryCurve { shape, samples })
}

/// Planar boundary of the domain: `n_boundary` samples with Euclidean curvature and outward normal.
pub fn planarize(domain: &DomainSpec, n_boundary: usize) -> Result<BoundaryCurve> {
    let curve = planarize_unchecked(domain, n_boundary)?;
    for (index, s) in curve.samples.iter().enumerate() {
        let radius = s.point.norm();
        if radius > 1.0 + DISK_TOLERANCE {
            return Err(Error::NotInDisk { index, radius });
        }
    }
    Ok(curve)
}
