use std::collections::HashSet;
use std::fmt::Write as _;

use delaunator::{triangulate, Point};

use super::{check_simple, BoundaryCurve};
use crate::error::{Error, Result};
use crate::geometry::PlanarPoint;

const MIN_ANGLE_DEG: f64 = 20.0;
const MAX_EDGE_FACTOR: f64 = 1.5;
const MAX_ROUNDS: usize = 12;
const SMOOTHING_SWEEPS: usize = 4;

/// Planar triangulation of the chart image of a domain.
///
/// Vertices `0..boundary_vertices.len()` are not required to be the boundary;
/// use `boundary_vertices` / `is_boundary` for that.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    pub vertices: Vec<PlanarPoint>,
    /// Counterclockwise vertex triples.
    pub triangles: Vec<[usize; 3]>,
    /// Boundary vertex indices in counterclockwise order.
    pub boundary_vertices: Vec<usize>,
    pub boundary_kappa_e: Vec<f64>,
    pub boundary_normals: Vec<[f64; 2]>,
    /// Target edge length.
    pub h: f64,
    neighbors: Vec<Vec<usize>>,
    is_boundary: Vec<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshQuality {
    pub min_angle_deg: f64,
    pub max_edge: f64,
    pub min_area: f64,
}

impl TriangleMesh {
    pub fn from_parts(
        vertices: Vec<PlanarPoint>,
        triangles: Vec<[usize; 3]>,
        boundary_vertices: Vec<usize>,
        boundary_kappa_e: Vec<f64>,
        boundary_normals: Vec<[f64; 2]>,
        h: f64,
    ) -> Result<Self> {
        let nv = vertices.len();
        if boundary_kappa_e.len() != boundary_vertices.len() || boundary_normals.len() != boundary_vertices.len() {
            return Err(Error::Parse("boundary metadata length mismatch".into()));
        }
        let mut is_boundary = vec![false; nv];
        for &b in &boundary_vertices {
            if b >= nv {
                return Err(Error::Parse(format!("boundary index {b} out of range")));
            }
            is_boundary[b] = true;
        }
        let mut sets: Vec<HashSet<usize>> = vec![HashSet::new(); nv];
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&i| i >= nv) {
                return Err(Error::Parse(format!("triangle {t} references a missing vertex")));
            }
            let area = signed_area(&vertices, tri);
            if !(area > 0.0) {
                return Err(Error::MeshFailure(format!("triangle {t} has non-positive area {area:e}")));
            }
            for k in 0..3 {
                sets[tri[k]].insert(tri[(k + 1) % 3]);
                sets[tri[k]].insert(tri[(k + 2) % 3]);
            }
        }
        let neighbors = sets
            .into_iter()
            .map(|s| {
                let mut v: Vec<usize> = s.into_iter().collect();
                v.sort_unstable();
                v
            })
            .collect();
        Ok(TriangleMesh { vertices, triangles, boundary_vertices, boundary_kappa_e, boundary_normals, h, neighbors, is_boundary })
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn is_boundary(&self, i: usize) -> bool {
        self.is_boundary[i]
    }

    pub fn interior_vertices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n_vertices()).filter(|&i| !self.is_boundary[i])
    }

    /// Vertices within `rings` edge hops of `i`, excluding `i`.
    pub fn ring(&self, i: usize, rings: usize) -> Vec<usize> {
        let mut seen = vec![i];
        let mut frontier = vec![i];
        for _ in 0..rings {
            let mut next = Vec::new();
            for &v in &frontier {
                for &w in &self.neighbors[v] {
                    if !seen.contains(&w) {
                        seen.push(w);
                        next.push(w);
                    }
                }
            }
            frontier = next;
        }
        seen.remove(0);
        seen
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (i, nb) in self.neighbors.iter().enumerate() {
            for &j in nb {
                if i < j {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        signed_area(&self.vertices, &self.triangles[t])
    }

    pub fn area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    /// `V - E + F`, equal to one for a disk-type mesh.
    pub fn euler_characteristic(&self) -> i64 {
        self.n_vertices() as i64 - self.edges().len() as i64 + self.triangles.len() as i64
    }

    pub fn quality(&self) -> MeshQuality {
        quality_of(&self.vertices, &self.triangles)
    }

    /// Number of connected components of the vertex graph.
    pub fn components(&self) -> usize {
        let n = self.n_vertices();
        let mut label = vec![usize::MAX; n];
        let mut count = 0;
        for s in 0..n {
            if label[s] != usize::MAX {
                continue;
            }
            let mut stack = vec![s];
            label[s] = count;
            while let Some(v) = stack.pop() {
                for &w in &self.neighbors[v] {
                    if label[w] == usize::MAX {
                        label[w] = count;
                        stack.push(w);
                    }
                }
            }
            count += 1;
        }
        count
    }
}

fn signed_area(v: &[PlanarPoint], t: &[usize; 3]) -> f64 {
    let (a, b, c) = (v[t[0]], v[t[1]], v[t[2]]);
    0.5 * ((b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x))
}

fn quality_of(v: &[PlanarPoint], tris: &[[usize; 3]]) -> MeshQuality {
    let mut q = MeshQuality { min_angle_deg: 180.0, max_edge: 0.0, min_area: f64::INFINITY };
    for t in tris {
        let p = [v[t[0]], v[t[1]], v[t[2]]];
        let l = [p[1].dist(&p[2]), p[2].dist(&p[0]), p[0].dist(&p[1])];
        for k in 0..3 {
            let (a, b, c) = (l[k], l[(k + 1) % 3], l[(k + 2) % 3]);
            let cos = ((b * b + c * c - a * a) / (2.0 * b * c)).clamp(-1.0, 1.0);
            q.min_angle_deg = q.min_angle_deg.min(cos.acos().to_degrees());
            q.max_edge = q.max_edge.max(a);
        }
        q.min_area = q.min_area.min(signed_area(v, t));
    }
    q
}

fn point_in_polygon(q: PlanarPoint, poly: &[PlanarPoint]) -> bool {
    let n = poly.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (poly[i], poly[j]);
        if (a.y > q.y) != (b.y > q.y) && q.x < (b.x - a.x) * (q.y - a.y) / (b.y - a.y) + a.x {
            inside = !inside;
        }
        j = i;
    }
    inside
}

fn distance_to_polygon(q: PlanarPoint, poly: &[PlanarPoint]) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            let (dx, dy) = (b.x - a.x, b.y - a.y);
            let t = (((q.x - a.x) * dx + (q.y - a.y) * dy) / (dx * dx + dy * dy)).clamp(0.0, 1.0);
            q.dist(&PlanarPoint::new(a.x + t * dx, a.y + t * dy))
        })
        .fold(f64::INFINITY, f64::min)
}

fn delaunay(points: &[PlanarPoint], boundary: &[PlanarPoint]) -> Vec<[usize; 3]> {
    let pts: Vec<Point> = points.iter().map(|p| Point { x: p.x, y: p.y }).collect();
    let tri = triangulate(&pts);
    let mut out = Vec::with_capacity(tri.triangles.len() / 3);
    for t in tri.triangles.chunks_exact(3) {
        let mut t = [t[0], t[1], t[2]];
        let area = signed_area(points, &t);
        if area.abs() < 1e-15 {
            continue;
        }
        if area < 0.0 {
            t.swap(1, 2);
        }
        let (a, b, c) = (points[t[0]], points[t[1]], points[t[2]]);
        let centroid = PlanarPoint::new((a.x + b.x + c.x) / 3.0, (a.y + b.y + c.y) / 3.0);
        if point_in_polygon(centroid, boundary) {
            out.push(t);
        }
    }
    out
}

fn laplacian_smooth(points: &mut [PlanarPoint], tris: &[[usize; 3]], n_fixed: usize, sweeps: usize) {
    let n = points.len();
    let mut nb: Vec<Vec<usize>> = vec![Vec::new(); n];
    for t in tris {
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            if !nb[a].contains(&b) {
                nb[a].push(b);
            }
            if !nb[b].contains(&a) {
                nb[b].push(a);
            }
        }
    }
    for _ in 0..sweeps {
        for i in n_fixed..n {
            if nb[i].is_empty() {
                continue;
            }
            let m = nb[i].len() as f64;
            let sx: f64 = nb[i].iter().map(|&j| points[j].x).sum();
            let sy: f64 = nb[i].iter().map(|&j| points[j].y).sum();
            points[i] = PlanarPoint::new(sx / m, sy / m);
        }
    }
}

/// Quasi-uniform triangulation of the region bounded by `curve` with target edge length `h`.
///
/// Boundary vertices are arclength-equispaced samples of the curve, interior
/// vertices start on a hexagonal lattice and are relaxed by Laplacian smoothing
/// between Delaunay passes until every angle is at least 20 degrees and every
/// edge at most `1.5 h`.
pub fn generate_mesh(curve: &BoundaryCurve, h: f64) -> Result<TriangleMesh> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::MeshFailure(format!("invalid target edge length {h}")));
    }
    let length = curve.shape.length();
    let nb = ((length / h).ceil() as usize).max(12);
    let samples = curve.shape.sample(nb);
    let boundary: Vec<PlanarPoint> = samples.iter().map(|s| s.point).collect();
    check_simple(&boundary)?;

    let (mut xmin, mut xmax, mut ymin, mut ymax) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for p in &boundary {
        xmin = xmin.min(p.x);
        xmax = xmax.max(p.x);
        ymin = ymin.min(p.y);
        ymax = ymax.max(p.y);
    }
    let mut points = boundary.clone();
    let dy = h * 3f64.sqrt() / 2.0;
    let rows = ((ymax - ymin) / dy).ceil() as i64 + 1;
    let cols = ((xmax - xmin) / h).ceil() as i64 + 2;
    // centre the lattice on the bounding box so symmetric domains get symmetric lattices
    let yc = 0.5 * (ymin + ymax);
    let xc = 0.5 * (xmin + xmax);
    for j in -rows..=rows {
        let y = yc + j as f64 * dy;
        let shift = if j.rem_euclid(2) == 1 { 0.5 * h } else { 0.0 };
        for i in -cols..=cols {
            let q = PlanarPoint::new(xc + i as f64 * h + shift, y);
            if point_in_polygon(q, &boundary) && distance_to_polygon(q, &boundary) > 0.55 * h {
                points.push(q);
            }
        }
    }

    let mut tris = delaunay(&points, &boundary);
    let mut ok = false;
    for _ in 0..MAX_ROUNDS {
        laplacian_smooth(&mut points, &tris, nb, SMOOTHING_SWEEPS);
        tris = delaunay(&points, &boundary);
        let q = quality_of(&points, &tris);
        if q.min_angle_deg >= MIN_ANGLE_DEG + 5.0 && q.max_edge <= MAX_EDGE_FACTOR * h {
            ok = true;
            break;
        }
    }
    let q = quality_of(&points, &tris);
    if !ok && (q.min_angle_deg < MIN_ANGLE_DEG || q.max_edge > MAX_EDGE_FACTOR * h) {
        return Err(Error::MeshFailure(format!(
            "quality targets not reached: min angle {:.2} deg, max edge {:.4} (h = {h})",
            q.min_angle_deg, q.max_edge
        )));
    }

    let mesh = TriangleMesh::from_parts(
        points,
        tris,
        (0..nb).collect(),
        samples.iter().map(|s| s.kappa_e).collect(),
        samples.iter().map(|s| s.normal).collect(),
        h,
    )?;
    for i in 0..nb {
        if !mesh.neighbors(i).contains(&((i + 1) % nb)) {
            return Err(Error::MeshFailure(format!("boundary edge ({i}, {}) not recovered", (i + 1) % nb)));
        }
    }
    if mesh.interior_vertices().any(|i| mesh.neighbors(i).is_empty()) {
        return Err(Error::MeshFailure("isolated interior vertex".into()));
    }
    if mesh.euler_characteristic() != 1 || mesh.components() != 1 {
        return Err(Error::MeshFailure("mesh is not a single disk".into()));
    }
    Ok(mesh)
}

fn fmt_f(x: f64) -> String {
    format!("{x:.16e}")
}

/// Text serialization: counts line, vertices, triangles, boundary records.
pub fn write_mesh(mesh: &TriangleMesh) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{} {} {}", mesh.n_vertices(), mesh.triangles.len(), mesh.boundary_vertices.len());
    for v in &mesh.vertices {
        let _ = writeln!(s, "{} {}", fmt_f(v.x), fmt_f(v.y));
    }
    for t in &mesh.triangles {
        let _ = writeln!(s, "{} {} {}", t[0], t[1], t[2]);
    }
    for (k, &b) in mesh.boundary_vertices.iter().enumerate() {
        let n = mesh.boundary_normals[k];
        let _ = writeln!(s, "{} {} {} {}", b, fmt_f(mesh.boundary_kappa_e[k]), fmt_f(n[0]), fmt_f(n[1]));
    }
    s
}

pub fn read_mesh(text: &str) -> Result<TriangleMesh> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let bad = |line: usize, msg: &str| Error::Parse(format!("line {}: {msg}", line + 1));
    let (ln, header) = lines.next().ok_or_else(|| Error::Parse("empty mesh file".into()))?;
    let counts: Vec<usize> =
        header.split_whitespace().map(|t| t.parse().map_err(|_| bad(ln, "expected integer counts"))).collect::<Result<_>>()?;
    let [nv, nt, nb] = counts[..] else {
        return Err(bad(ln, "expected three counts"));
    };
    let mut fields = |n: usize| -> Result<Vec<(usize, Vec<String>)>> {
        (0..n)
            .map(|_| {
                let (ln, l) = lines.next().ok_or_else(|| Error::Parse("unexpected end of mesh file".into()))?;
                Ok((ln, l.split_whitespace().map(str::to_owned).collect()))
            })
            .collect()
    };
    let parse_f = |ln: usize, s: &str| s.parse::<f64>().map_err(|_| bad(ln, "bad float"));
    let parse_u = |ln: usize, s: &str| s.parse::<usize>().map_err(|_| bad(ln, "bad index"));
    let mut vertices = Vec::with_capacity(nv);
    for (ln, f) in fields(nv)? {
        if f.len() != 2 {
            return Err(bad(ln, "vertex line needs 2 fields"));
        }
        vertices.push(PlanarPoint::new(parse_f(ln, &f[0])?, parse_f(ln, &f[1])?));
    }
    let mut triangles = Vec::with_capacity(nt);
    for (ln, f) in fields(nt)? {
        if f.len() != 3 {
            return Err(bad(ln, "triangle line needs 3 fields"));
        }
        triangles.push([parse_u(ln, &f[0])?, parse_u(ln, &f[1])?, parse_u(ln, &f[2])?]);
    }
    let (mut bidx, mut kappa, mut normals) = (Vec::new(), Vec::new(), Vec::new());
    for (ln, f) in fields(nb)? {
        if f.len() != 4 {
            return Err(bad(ln, "boundary line needs 4 fields"));
        }
        bidx.push(parse_u(ln, &f[0])?);
        kappa.push(parse_f(ln, &f[1])?);
        normals.push([parse_f(ln, &f[2])?, parse_f(ln, &f[3])?]);
    }
    let edges: f64 = triangles
        .iter()
        .flat_map(|t: &[usize; 3]| (0..3).map(move |k| (t[k], t[(k + 1) % 3])))
        .filter(|&(a, b)| a < nv && b < nv)
        .map(|(a, b)| vertices[a].dist(&vertices[b]))
        .sum();
    let h = if triangles.is_empty() { 0.0 } else { edges / (3 * triangles.len()) as f64 };
    TriangleMesh::from_parts(vertices, triangles, bidx, kappa, normals, h)
}
