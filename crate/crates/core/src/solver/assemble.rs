use super::sparse::CsrMatrix;
use crate::domain::TriangleMesh;
use crate::geometry::{conformal_factor, PlanarPoint};

/// Barycentric coordinates of the interior 3-point rule (weights 1/3), exact for quadratics.
const QUAD_POINTS: [[f64; 3]; 3] =
    [[2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0], [1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0], [1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0]];

/// Piecewise-linear finite element matrices on a mesh.
///
/// The `*_full` matrices act on every vertex; `stiffness` and `mass_rho` are
/// their restrictions to the free (non-boundary) vertices, which is how the
/// homogeneous Dirichlet condition is imposed.
#[derive(Debug, Clone)]
pub struct FemSystem {
    pub stiffness_full: CsrMatrix,
    pub mass_rho_full: CsrMatrix,
    pub mass_full: CsrMatrix,
    pub stiffness: CsrMatrix,
    pub mass_rho: CsrMatrix,
    pub mass: CsrMatrix,
    /// Free vertex indices in increasing order.
    pub free: Vec<usize>,
}

impl FemSystem {
    pub fn n_free(&self) -> usize {
        self.free.len()
    }

    /// Free-vertex values of a full nodal vector.
    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        self.free.iter().map(|&i| full[i]).collect()
    }

    /// Full nodal vector with zeros on the boundary.
    pub fn extend(&self, free_values: &[f64], n_vertices: usize) -> Vec<f64> {
        let mut out = vec![0.0; n_vertices];
        for (k, &i) in self.free.iter().enumerate() {
            out[i] = free_values[k];
        }
        out
    }

    /// Free rows of `mass_rho_full * f` for a full nodal vector `f`.
    pub fn weighted_load(&self, f_full: &[f64]) -> Vec<f64> {
        let y = self.mass_rho_full.mul(f_full);
        self.restrict(&y)
    }
}

type Local = [[f64; 3]; 3];

/// Element stiffness, weighted mass and plain mass.
fn local_matrices(p: [PlanarPoint; 3]) -> (Local, Local, Local) {
    let area = 0.5 * ((p[1].x - p[0].x) * (p[2].y - p[0].y) - (p[1].y - p[0].y) * (p[2].x - p[0].x));
    let grads: [[f64; 2]; 3] = std::array::from_fn(|i| {
        let (j, k) = ((i + 1) % 3, (i + 2) % 3);
        [(p[j].y - p[k].y) / (2.0 * area), (p[k].x - p[j].x) / (2.0 * area)]
    });
    let rho2: [f64; 3] = std::array::from_fn(|q| {
        let l = QUAD_POINTS[q];
        conformal_factor(PlanarPoint::new(
            l[0] * p[0].x + l[1] * p[1].x + l[2] * p[2].x,
            l[0] * p[0].y + l[1] * p[1].y + l[2] * p[2].y,
        ))
    });
    let mut k = [[0.0; 3]; 3];
    let mut m = [[0.0; 3]; 3];
    let mut mr = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            k[i][j] = area * (grads[i][0] * grads[j][0] + grads[i][1] * grads[j][1]);
            m[i][j] = area / 12.0 * if i == j { 2.0 } else { 1.0 };
            mr[i][j] = (0..3).map(|q| area / 3.0 * rho2[q] * QUAD_POINTS[q][i] * QUAD_POINTS[q][j]).sum();
        }
    }
    (k, m, mr)
}

/// Stiffness (Euclidean Laplacian), conformally weighted mass, and plain mass matrices.
pub fn assemble(mesh: &TriangleMesh) -> FemSystem {
    let n = mesh.n_vertices();
    let cap = 9 * mesh.triangles.len();
    let (mut kt, mut mt, mut rt) = (Vec::with_capacity(cap), Vec::with_capacity(cap), Vec::with_capacity(cap));
    for tri in &mesh.triangles {
        let p = [mesh.vertices[tri[0]], mesh.vertices[tri[1]], mesh.vertices[tri[2]]];
        let (k, m, mr) = local_matrices(p);
        for i in 0..3 {
            for j in 0..3 {
                kt.push((tri[i], tri[j], k[i][j]));
                mt.push((tri[i], tri[j], m[i][j]));
                rt.push((tri[i], tri[j], mr[i][j]));
            }
        }
    }
    let stiffness_full = CsrMatrix::from_triplets(n, kt);
    let mass_full = CsrMatrix::from_triplets(n, mt);
    let mass_rho_full = CsrMatrix::from_triplets(n, rt);
    let free: Vec<usize> = mesh.interior_vertices().collect();
    FemSystem {
        stiffness: stiffness_full.restrict(&free),
        mass_rho: mass_rho_full.restrict(&free),
        mass: mass_full.restrict(&free),
        stiffness_full,
        mass_rho_full,
        mass_full,
        free,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{generate_mesh, planarize, DomainSpec};
    use crate::solver::sparse::dot;
    use std::f64::consts::{FRAC_PI_3, FRAC_PI_4, PI};

    fn mesh(r: f64, h: f64) -> TriangleMesh {
        generate_mesh(&planarize(&DomainSpec::ball(r), 64).unwrap(), h).unwrap()
    }

    #[test]
    fn matrices_are_symmetric_and_constants_are_harmonic() {
        let m = mesh(FRAC_PI_4, 0.04);
        let s = assemble(&m);
        assert!(s.stiffness_full.asymmetry() < 1e-12);
        assert!(s.mass_rho_full.asymmetry() < 1e-12);
        assert!(s.mass_full.asymmetry() < 1e-12);
        let ones = vec![1.0; m.n_vertices()];
        let k1 = s.stiffness_full.mul(&ones);
        // each row of K sums to zero; constants lie in the kernel of the full stiffness
        assert!(k1.iter().all(|v| v.abs() < 1e-12));
        assert!(s.stiffness_full.quadratic_form(&ones).abs() < 1e-12);
    }

    #[test]
    fn masses_integrate_areas() {
        for r in [FRAC_PI_4, FRAC_PI_3, PI / 2.0] {
            let m = mesh(r, 0.03);
            let s = assemble(&m);
            let ones = vec![1.0; m.n_vertices()];
            let t = (r / 2.0).tan();
            let planar = dot(&ones, &s.mass_full.mul(&ones));
            assert!((planar / (PI * t * t) - 1.0).abs() < 0.02, "{planar}");
            let sphere = dot(&ones, &s.mass_rho_full.mul(&ones));
            assert!((sphere / (2.0 * PI * (1.0 - r.cos())) - 1.0).abs() < 0.02, "{sphere}");
        }
    }

    #[test]
    fn reduced_stiffness_is_positive_definite() {
        let m = mesh(0.6, 0.06);
        let s = assemble(&m);
        for seed in 0..5u64 {
            let x: Vec<f64> = (0..s.n_free()).map(|i| ((i as u64 * 2654435761 + seed) % 1000) as f64 / 1000.0 - 0.4).collect();
            assert!(s.stiffness.quadratic_form(&x) > 0.0);
            assert!(s.mass_rho.quadratic_form(&x) > 0.0);
        }
    }
}
