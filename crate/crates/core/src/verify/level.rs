use serde::Serialize;
use std::collections::HashMap;
use std::fmt::Write as _;

use super::hessian::{covariant_chart_hessian, covariant_hessian, HessianField, LocalFit};
use crate::domain::TriangleMesh;
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::geometry::{conformal_factor, PlanarPoint};
use crate::solver::EIGEN_BAND;

/// Default level fractions of `max u`.
pub const DEFAULT_LEVEL_FRACTIONS: [f64; 5] = [0.1, 0.25, 0.5, 0.75, 0.9];
/// Gradient floor, relative to the largest recovered gradient, for a regular value.
const REGULAR_RTOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LevelSample {
    pub point: PlanarPoint,
    pub kappa_g: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelResult {
    pub c: f64,
    pub min_kappa_g: f64,
    pub convex: bool,
    pub samples: usize,
    #[serde(skip)]
    pub curve: Vec<LevelSample>,
}

type EdgeKey = (usize, usize);

fn key(a: usize, b: usize) -> EdgeKey {
    (a.min(b), a.max(b))
}

/// Closed (or, when touching the boundary, open) polylines of `{u = c}` as
/// sequences of crossed edges.
fn level_chains(mesh: &TriangleMesh, u: &[f64], c: f64) -> Vec<Vec<EdgeKey>> {
    let mut adjacency: HashMap<EdgeKey, Vec<EdgeKey>> = HashMap::new();
    for tri in &mesh.triangles {
        let crossed: Vec<EdgeKey> = (0..3)
            .map(|k| (tri[k], tri[(k + 1) % 3]))
            .filter(|&(a, b)| (u[a] >= c) != (u[b] >= c))
            .map(|(a, b)| key(a, b))
            .collect();
        if crossed.len() == 2 {
            adjacency.entry(crossed[0]).or_default().push(crossed[1]);
            adjacency.entry(crossed[1]).or_default().push(crossed[0]);
        }
    }
    let mut keys: Vec<EdgeKey> = adjacency.keys().copied().collect();
    keys.sort_unstable();
    let mut visited: HashMap<EdgeKey, bool> = keys.iter().map(|&k| (k, false)).collect();
    // start open chains at their ends so they are walked in one piece
    keys.sort_by_key(|k| adjacency[k].len() != 1);
    let mut chains = Vec::new();
    for start in keys {
        if visited[&start] {
            continue;
        }
        let mut chain = vec![start];
        visited.insert(start, true);
        let mut current = start;
        while let Some(&next) = adjacency[&current].iter().find(|n| !visited[*n]) {
            visited.insert(next, true);
            chain.push(next);
            current = next;
        }
        chains.push(chain);
    }
    chains
}

fn crossing(mesh: &TriangleMesh, u: &[f64], c: f64, e: EdgeKey) -> (PlanarPoint, f64) {
    let (a, b) = e;
    let t = (c - u[a]) / (u[b] - u[a]);
    let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
    (PlanarPoint::new(pa.x + t * (pb.x - pa.x), pa.y + t * (pb.y - pa.y)), t)
}

/// Derivatives at a point of edge `(a, b)`, blended from the endpoint fits.
fn fit_on_edge(mesh: &TriangleMesh, fits: &[Option<LocalFit>], e: EdgeKey, q: PlanarPoint, t: f64) -> Option<LocalFit> {
    let (a, b) = e;
    let fa = fits[a].map(|f| f.shifted(mesh.vertices[a], q));
    let fb = fits[b].map(|f| f.shifted(mesh.vertices[b], q));
    match (fa, fb) {
        (Some(x), Some(y)) => Some(x.blend(&y, t)),
        (x, y) => x.or(y),
    }
}

/// Geodesic curvature of a level curve at `q`: `-H(tau, tau) / |grad u|_g`.
pub fn level_curve_curvature(q: PlanarPoint, fit: &LocalFit) -> f64 {
    let g = fit.grad;
    let gn = g[0].hypot(g[1]);
    let t = [-g[1] / gn, g[0] / gn];
    let h = covariant_chart_hessian(q, fit);
    let htt = h[0][0] * t[0] * t[0] + 2.0 * h[0][1] * t[0] * t[1] + h[1][1] * t[1] * t[1];
    -htt / (conformal_factor(q).sqrt() * gn)
}

/// Samples of `{u = c}` with their geodesic curvature, oriented counterclockwise.
pub fn level_curvature(mesh: &TriangleMesh, u: &ScalarField, c: f64) -> Result<Vec<LevelSample>> {
    let hu = covariant_hessian(mesh, u)?;
    level_curvature_with(mesh, u, &hu, c)
}

pub fn level_curvature_with(mesh: &TriangleMesh, u: &ScalarField, hu: &HessianField, c: f64) -> Result<Vec<LevelSample>> {
    let max = u.max();
    if !(c < max) {
        return Err(Error::EmptyLevel { c, max });
    }
    let chains = level_chains(mesh, &u.values, c);
    if chains.is_empty() {
        return Err(Error::EmptyLevel { c, max });
    }
    let grad_scale = hu.samples.iter().flatten().map(|s| s.grad_norm).fold(0.0, f64::max);
    let mut out = Vec::new();
    let mut grad_min = f64::INFINITY;
    for chain in chains {
        let mut pts = Vec::with_capacity(chain.len());
        for &e in &chain {
            let (q, t) = crossing(mesh, &u.values, c, e);
            let fit = fit_on_edge(mesh, &hu.fits, e, q, t).ok_or(Error::NotRegularValue { c, grad_min: 0.0 })?;
            grad_min = grad_min.min(fit.grad[0].hypot(fit.grad[1]) / conformal_factor(q).sqrt());
            pts.push(LevelSample { point: q, kappa_g: level_curve_curvature(q, &fit) });
        }
        let area: f64 = (0..pts.len())
            .map(|k| {
                let (a, b) = (pts[k].point, pts[(k + 1) % pts.len()].point);
                a.x * b.y - a.y * b.x
            })
            .sum();
        if area < 0.0 {
            pts.reverse();
        }
        out.extend(pts);
    }
    if !(grad_min > REGULAR_RTOL * grad_scale) {
        return Err(Error::NotRegularValue { c, grad_min });
    }
    Ok(out)
}

/// Level curvature at `fractions * max u`.
pub fn level_results(mesh: &TriangleMesh, u: &ScalarField, hu: &HessianField, fractions: &[f64]) -> Result<Vec<LevelResult>> {
    let max = u.max();
    fractions
        .iter()
        .map(|&f| {
            let c = f * max;
            let curve = level_curvature_with(mesh, u, hu, c)?;
            let min = curve.iter().map(|s| s.kappa_g).fold(f64::INFINITY, f64::min);
            Ok(LevelResult { c, min_kappa_g: min, convex: min > 0.0, samples: curve.len(), curve })
        })
        .collect()
}

/// Level samples as CSV with columns `c,X,Y,kappa_g`.
pub fn level_csv(levels: &[LevelResult]) -> String {
    let mut s = String::from("c,X,Y,kappa_g\n");
    for l in levels {
        for p in &l.curve {
            let _ = writeln!(s, "{:.16e},{:.16e},{:.16e},{:.16e}", l.c, p.point.x, p.point.y, p.kappa_g);
        }
    }
    s
}

/// Checks that the vertex set `{u >= c}` equals `{v >= g(c)}` for `p <= 1`
/// and `{v <= g(c)}` for `p > 1`, with `g` the power transform.
pub fn superlevel_duality(u: &ScalarField, v: &ScalarField, p: f64, c: f64) -> bool {
    let gc = if (p - 1.0).abs() <= EIGEN_BAND { c.ln() } else { c.powf(0.5 * (1.0 - p)) };
    u.values.iter().zip(&v.values).all(|(&a, &b)| {
        if !b.is_finite() {
            // boundary vertices: u = 0 is below every positive level
            return a < c;
        }
        let inside_v = if p > 1.0 + EIGEN_BAND { b <= gc } else { b >= gc };
        (a >= c) == inside_v
    })
}
