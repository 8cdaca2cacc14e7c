//! Finite element solves of `-Delta u = u^p` in the stereographic chart.
//!
//! In the chart the problem becomes `-Delta_E u = rho^2 u^p`, discretized as
//! `K u = M_rho f(u)` with piecewise-linear elements.

mod assemble;
mod sparse;

pub use assemble::{assemble, FemSystem};
pub use sparse::{cg_solve, cg_solve_from, dot, norm2, CgStats, CsrMatrix};

use crate::clock::Stopwatch;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

use crate::domain::TriangleMesh;
use crate::error::{Error, Result};
use crate::field::{Normalization, Quantity, ScalarField};
use crate::geometry::stereo_lift;

/// Exponents closer than this to 1 are treated as the eigenvalue problem.
pub const EIGEN_BAND: f64 = 1e-6;
/// Largest exponent with certified behaviour.
pub const CERTIFIED_MAX_P: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    /// Relative residual tolerance for linear and nonlinear solves.
    pub tol: f64,
    /// Relative sup-norm update at which fixed-point iterations stop.
    pub tol_fix: f64,
    pub max_outer: usize,
    pub cg_tol: f64,
    pub cg_max_iter: usize,
    /// Damping for `p < 1`.
    pub omega_sublinear: f64,
    /// Damping for `p > 1`.
    pub omega_superlinear: f64,
    /// Largest exponent increment during continuation from `p = 1`.
    pub continuation_step: f64,
    /// Permits `p > 3`, with results marked uncertified.
    pub experimental: bool,
    /// Relative change of the Rayleigh quotient that ends inverse iteration.
    pub eigen_tol: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            tol: 1e-8,
            tol_fix: 1e-10,
            max_outer: 500,
            cg_tol: 1e-12,
            cg_max_iter: 20_000,
            omega_sublinear: 0.8,
            omega_superlinear: 1.0,
            continuation_step: 0.1,
            experimental: false,
            eigen_tol: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport {
    pub p: f64,
    pub max_value: f64,
    pub iterations: usize,
    pub residual_norm: f64,
    pub lambda: Option<f64>,
    /// Seconds; excluded from deterministic outputs by the CLI.
    #[serde(skip)]
    pub wall_time: f64,
    pub certified: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenSolution {
    pub lambda: f64,
    pub field: ScalarField,
    pub report: SolveReport,
}

/// One exponent of a sweep; failures are recorded, not propagated.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepEntry {
    pub p: f64,
    pub report: Option<SolveReport>,
    /// `sup |u_p / max u_p - u_1|` over vertices.
    pub diagnostic: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sweep {
    pub lambda1: f64,
    pub entries: Vec<SweepEntry>,
    #[serde(skip)]
    pub fields: Vec<Option<ScalarField>>,
}

/// `u_+^p` with `0^0 = 1`, so that `p = 0` is the torsion problem.
fn power_source(u: f64, p: f64) -> f64 {
    if p == 0.0 {
        1.0
    } else if u > 0.0 {
        u.powf(p)
    } else {
        0.0
    }
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Assembled problem on one mesh.
pub struct Solver<'a> {
    mesh: &'a TriangleMesh,
    system: FemSystem,
    settings: SolverSettings,
}

impl<'a> Solver<'a> {
    pub fn new(mesh: &'a TriangleMesh, settings: SolverSettings) -> Self {
        Solver { mesh, system: assemble(mesh), settings }
    }

    pub fn mesh(&self) -> &TriangleMesh {
        self.mesh
    }

    pub fn system(&self) -> &FemSystem {
        &self.system
    }

    pub fn settings(&self) -> &SolverSettings {
        &self.settings
    }

    fn linear_solve(&self, b: &[f64], x: &mut [f64], tol: f64) -> Result<CgStats> {
        cg_solve_from(&self.system.stiffness, b, x, tol, self.settings.cg_max_iter)
    }

    fn field(&self, free: &[f64], quantity: Quantity, p: f64, normalization: Normalization) -> ScalarField {
        ScalarField::new(self.system.extend(free, self.mesh.n_vertices()), quantity, p).with_normalization(normalization)
    }

    fn check_positive(&self, free: &[f64]) -> Result<()> {
        match free.iter().enumerate().find(|(_, &v)| !(v > 0.0)) {
            Some((k, &v)) => Err(Error::NonPositive { vertex: self.system.free[k], value: v }),
            None => Ok(()),
        }
    }

    /// Relative residual `|K u - M_rho f(u)| / |M_rho f(u)|` on free vertices.
    pub fn nonlinear_residual(&self, u: &ScalarField, p: f64) -> f64 {
        let f: Vec<f64> = u.values.iter().map(|&x| power_source(x, p)).collect();
        let load = self.system.weighted_load(&f);
        let ku = self.system.stiffness.mul(&self.system.restrict(&u.values));
        let r: Vec<f64> = ku.iter().zip(&load).map(|(a, b)| a - b).collect();
        norm2(&r) / norm2(&load)
    }

    /// Torsion function: `-Delta u = 1`, i.e. `K u = M_rho 1`.
    pub fn solve_torsion(&self) -> Result<(ScalarField, SolveReport)> {
        let start = Stopwatch::start();
        let load = self.system.weighted_load(&vec![1.0; self.mesh.n_vertices()]);
        let mut u = vec![0.0; self.system.n_free()];
        let stats = self.linear_solve(&load, &mut u, self.settings.cg_tol.min(self.settings.tol))?;
        self.check_positive(&u)?;
        let field = self.field(&u, Quantity::U, 0.0, Normalization::None);
        let report = SolveReport {
            p: 0.0,
            max_value: field.max(),
            iterations: stats.iterations,
            residual_norm: stats.relative_residual,
            lambda: None,
            wall_time: start.seconds(),
            certified: true,
        };
        Ok((field, report))
    }

    /// Normalized fixed-point iteration for `K u = M_rho u_+^p`, `p != 1`.
    ///
    /// The solution is carried as `u = A w` with `max w = 1`. Each step applies
    /// `K^{-1} M_rho (.)^p` to the shape `w`, damps, renormalizes, and takes the
    /// amplitude from the Nehari identity `u^T K u = u^T M_rho f(u)`. By
    /// homogeneity the shape update does not depend on `A`, so the slowly
    /// contracting amplitude mode of plain Picard iteration never appears and
    /// very large amplitudes (p close to 1) stay representable until the end.
    fn fixed_point(&self, p: f64, init_free: &[f64], omega: f64) -> Result<(Vec<f64>, f64, usize, f64)> {
        let n = self.mesh.n_vertices();
        let nehari_log_amplitude = |w: &[f64]| -> Result<f64> {
            let full = self.system.extend(w, n);
            let f: Vec<f64> = full.iter().map(|&x| power_source(x, p)).collect();
            let num = dot(w, &self.system.weighted_load(&f));
            let den = self.system.stiffness.quadratic_form(w);
            if !(num > 0.0 && den > 0.0) {
                return Err(Error::NoConvergence { iterations: 0, residual: f64::NAN });
            }
            Ok((num / den).ln() / (1.0 - p))
        };
        let scale = sup(init_free);
        if !(scale > 0.0) || init_free.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidDomain("initial guess must be finite with a positive maximum".into()));
        }
        let mut w: Vec<f64> = init_free.iter().map(|v| (v / scale).max(0.0)).collect();
        let mut log_a = nehari_log_amplitude(&w)?;
        let mut psi = w.clone();
        let mut update = f64::INFINITY;
        for it in 1..=self.settings.max_outer {
            let full = self.system.extend(&w, n);
            let f: Vec<f64> = full.iter().map(|&x| power_source(x, p)).collect();
            let load = self.system.weighted_load(&f);
            self.linear_solve(&load, &mut psi, self.settings.cg_tol)?;
            let psi_max = sup(&psi);
            if !(psi_max > 0.0) {
                return Err(Error::NoConvergence { iterations: it, residual: f64::NAN });
            }
            let mut w_new: Vec<f64> = w.iter().zip(&psi).map(|(a, b)| (1.0 - omega) * a + omega * b / psi_max).collect();
            let m = sup(&w_new);
            w_new.iter_mut().for_each(|x| *x /= m);
            let log_a_new = nehari_log_amplitude(&w_new)?;
            // relative sup change of u = A w, measured against the new iterate
            let ratio = (log_a - log_a_new).exp();
            update = w_new.iter().zip(&w).map(|(a, b)| (a - ratio * b).abs()).fold(0.0, f64::max);
            w = w_new;
            log_a = log_a_new;
            // keep the next CG start on the scale of the next solution
            let s = sup(&psi);
            psi.iter_mut().for_each(|x| *x /= s);
            if update < self.settings.tol_fix {
                return Ok((w, log_a, it, update));
            }
        }
        Err(Error::NoConvergence { iterations: self.settings.max_outer, residual: update })
    }

    fn finish_fixed_point(
        &self,
        p: f64,
        w: Vec<f64>,
        log_a: f64,
        iterations: usize,
        start: Stopwatch,
        certified: bool,
    ) -> Result<(ScalarField, SolveReport)> {
        let a = log_a.exp();
        if !a.is_finite() || a == 0.0 {
            return Err(Error::NoConvergence { iterations, residual: f64::INFINITY });
        }
        let u: Vec<f64> = w.iter().map(|x| a * x).collect();
        self.check_positive(&u)?;
        let field = self.field(&u, Quantity::U, p, Normalization::None);
        let residual = self.nonlinear_residual(&field, p);
        if !(residual <= self.settings.tol) {
            return Err(Error::NoConvergence { iterations, residual });
        }
        let report = SolveReport {
            p,
            max_value: field.max(),
            iterations,
            residual_norm: residual,
            lambda: None,
            wall_time: start.seconds(),
            certified,
        };
        Ok((field, report))
    }

    /// Sublinear problem `0 <= p < 1`; the default start is the torsion function.
    pub fn solve_sublinear(&self, p: f64, init: Option<&ScalarField>) -> Result<(ScalarField, SolveReport)> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::InvalidExponent(p));
        }
        let start = Stopwatch::start();
        let init_free = match init {
            Some(f) => {
                self.check_field(f)?;
                self.system.restrict(&f.values)
            }
            None => self.system.restrict(&self.solve_torsion()?.0.values),
        };
        let (w, log_a, it, _) = self.fixed_point(p, &init_free, self.settings.omega_sublinear)?;
        self.finish_fixed_point(p, w, log_a, it, start, true)
    }

    fn check_field(&self, f: &ScalarField) -> Result<()> {
        if f.len() != self.mesh.n_vertices() {
            return Err(Error::FieldMismatch { values: f.len(), vertices: self.mesh.n_vertices() });
        }
        Ok(())
    }

    /// First Dirichlet eigenpair by inverse power iteration, normalized to `max u_1 = 1`.
    pub fn solve_eigen(&self) -> Result<EigenSolution> {
        let start = Stopwatch::start();
        let k = &self.system.stiffness;
        let m = &self.system.mass_rho;
        let mut x = self.system.restrict(&self.solve_torsion()?.0.values);
        let rayleigh = |x: &[f64]| k.quadratic_form(x) / m.quadratic_form(x);
        let mut lambda = rayleigh(&x);
        let mut residual = 1.0f64;
        let mut y = vec![0.0; x.len()];
        for it in 1..=self.settings.max_outer {
            let b = m.mul(&x);
            for (yi, xi) in y.iter_mut().zip(&x) {
                *yi = xi / lambda;
            }
            let inner = (1e-2 * residual).clamp(1e-14, 1e-6);
            self.linear_solve(&b, &mut y, inner)?;
            let norm = m.quadratic_form(&y).sqrt();
            x = y.iter().map(|v| v / norm).collect();
            let lambda_new = rayleigh(&x);
            let kx = k.mul(&x);
            let mx = m.mul(&x);
            let r: Vec<f64> = kx.iter().zip(&mx).map(|(a, b)| a - lambda_new * b).collect();
            residual = norm2(&r) / (lambda_new * norm2(&mx));
            let change = (lambda_new - lambda).abs() / lambda_new;
            lambda = lambda_new;
            if change < self.settings.eigen_tol && residual < self.settings.tol {
                let peak = x.iter().copied().fold(0.0f64, |a, b| if b.abs() > a.abs() { b } else { a });
                let u: Vec<f64> = x.iter().map(|v| v / peak).collect();
                self.check_positive(&u)?;
                let lambda = rayleigh(&u);
                let field = self.field(&u, Quantity::Eigenfunction, 1.0, Normalization::UnitMax);
                let report = SolveReport {
                    p: 1.0,
                    max_value: field.max(),
                    iterations: it,
                    residual_norm: residual,
                    lambda: Some(lambda),
                    wall_time: start.seconds(),
                    certified: true,
                };
                return Ok(EigenSolution { lambda, field, report });
            }
        }
        Err(Error::NoConvergence { iterations: self.settings.max_outer, residual })
    }

    /// Superlinear problem `1 < p <= 3`, started from the first eigenfunction.
    ///
    /// With `continuation` the exponent is raised from 1 in steps of at most
    /// `continuation_step`, each solve warm-starting the next.
    pub fn solve_superlinear(&self, p: f64, continuation: bool) -> Result<(ScalarField, SolveReport)> {
        self.check_superlinear(p)?;
        let eigen = self.solve_eigen()?;
        self.solve_superlinear_from(p, &eigen.field, 1.0, continuation)
    }

    fn check_superlinear(&self, p: f64) -> Result<bool> {
        if !(p > 1.0) || !p.is_finite() {
            return Err(Error::InvalidExponent(p));
        }
        if p > CERTIFIED_MAX_P {
            if !self.settings.experimental {
                return Err(Error::Uncertified { p });
            }
            return Ok(false);
        }
        Ok(true)
    }

    /// Superlinear solve warm-started from `init`, a solution (or eigenfunction) at exponent `from`.
    pub fn solve_superlinear_from(
        &self,
        p: f64,
        init: &ScalarField,
        from: f64,
        continuation: bool,
    ) -> Result<(ScalarField, SolveReport)> {
        let certified = self.check_superlinear(p)?;
        self.check_field(init)?;
        let start = Stopwatch::start();
        let omega = self.settings.omega_superlinear;
        let mut current = self.system.restrict(&init.values);
        let mut total = 0;
        if continuation {
            let steps = ((p - from) / self.settings.continuation_step).ceil().max(1.0) as usize;
            for s in 1..steps {
                let q = from + (p - from) * s as f64 / steps as f64;
                let (w, _, it, _) = self.fixed_point(q, &current, omega)?;
                total += it;
                current = w;
            }
        }
        let (w, log_a, it, _) = self.fixed_point(p, &current, omega)?;
        self.finish_fixed_point(p, w, log_a, total + it, start, certified)
    }

    /// Dispatches on the exponent: torsion, sublinear, eigen, or superlinear with continuation.
    pub fn solve(&self, p: f64) -> Result<(ScalarField, SolveReport)> {
        if !p.is_finite() || p < 0.0 {
            return Err(Error::InvalidExponent(p));
        }
        if p == 0.0 {
            self.solve_torsion()
        } else if (p - 1.0).abs() < EIGEN_BAND {
            let e = self.solve_eigen()?;
            Ok((e.field, e.report))
        } else if p < 1.0 {
            self.solve_sublinear(p, None)
        } else {
            self.solve_superlinear(p, true)
        }
    }

    /// Solves for each exponent and reports `D(p) = sup |u_p / max u_p - u_1|`.
    ///
    /// Exponents are processed outward from 1 on each side so every solve is
    /// warm-started from its neighbour; results come back in input order.
    pub fn sweep_p(&self, p_list: &[f64]) -> Result<Sweep> {
        let eigen = self.solve_eigen()?;
        let u1 = &eigen.field;
        let n = p_list.len();
        let mut entries: Vec<Option<SweepEntry>> = vec![None; n];
        let mut fields: Vec<Option<ScalarField>> = vec![None; n];
        let mut record = |k: usize, res: Result<(ScalarField, SolveReport)>| match res {
            Ok((field, report)) => {
                let d = field.normalized().sup_distance(u1);
                entries[k] = Some(SweepEntry { p: p_list[k], report: Some(report), diagnostic: Some(d), error: None });
                fields[k] = Some(field);
            }
            Err(e) => {
                entries[k] = Some(SweepEntry { p: p_list[k], report: None, diagnostic: None, error: Some(e.to_string()) });
            }
        };
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| (p_list[a] - 1.0).abs().total_cmp(&(p_list[b] - 1.0).abs()));
        let mut below: Option<ScalarField> = None;
        let mut above: (ScalarField, f64) = (u1.clone(), 1.0);
        for k in order {
            let p = p_list[k];
            let res = if !p.is_finite() || p < 0.0 {
                Err(Error::InvalidExponent(p))
            } else if (p - 1.0).abs() < EIGEN_BAND {
                Ok((u1.clone(), eigen.report.clone()))
            } else if p == 0.0 {
                self.solve_torsion()
            } else if p < 1.0 {
                self.solve_sublinear(p, Some(below.as_ref().unwrap_or(u1)))
            } else {
                self.solve_superlinear_from(p, &above.0, above.1, true)
            };
            if let Ok((f, _)) = &res {
                if p < 1.0 {
                    below = Some(f.clone());
                } else if p > 1.0 {
                    above = (f.clone(), p);
                }
            }
            record(k, res);
        }
        Ok(Sweep { lambda1: eigen.lambda, entries: entries.into_iter().map(Option::unwrap).collect(), fields })
    }
}

/// Field dump with columns `X,Y,z_sphere,u,quantity,p`, one row per vertex.
pub fn field_csv(mesh: &TriangleMesh, field: &ScalarField) -> Result<String> {
    if field.len() != mesh.n_vertices() {
        return Err(Error::FieldMismatch { values: field.len(), vertices: mesh.n_vertices() });
    }
    let mut s = String::from("X,Y,z_sphere,u,quantity,p\n");
    for (q, v) in mesh.vertices.iter().zip(&field.values) {
        let z = stereo_lift(*q).z;
        let _ = writeln!(s, "{:.16e},{:.16e},{:.16e},{:.16e},{},{}", q.x, q.y, z, v, field.quantity.as_str(), field.p);
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{generate_mesh, planarize, DomainSpec};
    use crate::geometry::PlanarPoint;
    use crate::oracle::{compare, radial_shoot, torsion_closed_form};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, FRAC_PI_4};

    fn ball(r: f64, h: f64) -> TriangleMesh {
        generate_mesh(&planarize(&DomainSpec::ball(r), 64).unwrap(), h).unwrap()
    }

    const ORIGIN: PlanarPoint = PlanarPoint { x: 0.0, y: 0.0 };

    #[test]
    fn torsion_on_balls() {
        let m = ball(FRAC_PI_3, 0.02);
        let s = Solver::new(&m, SolverSettings::default());
        let (u, rep) = s.solve_torsion().unwrap();
        assert!((rep.max_value - (4.0f64 / 3.0).ln()).abs() < 2e-3, "{}", rep.max_value);
        assert!(rep.residual_norm <= 1e-8);
        for i in m.interior_vertices() {
            assert!(u.values[i] > 0.0);
        }
        for &b in &m.boundary_vertices {
            assert_eq!(u.values[b], 0.0);
        }
        let c = compare(&m, &u, &torsion_closed_form(FRAC_PI_3).unwrap(), ORIGIN).unwrap();
        assert!(c.sup_err < 2e-3, "{c:?}");

        let m = ball(FRAC_PI_2, 0.02);
        let s = Solver::new(&m, SolverSettings::default());
        let (_, rep) = s.solve_torsion().unwrap();
        assert!((rep.max_value - 2f64.ln()).abs() < 5e-3, "{}", rep.max_value);
    }

    #[test]
    fn sublinear_p0_is_torsion() {
        let m = ball(FRAC_PI_4, 0.05);
        let s = Solver::new(&m, SolverSettings::default());
        let (t, _) = s.solve_torsion().unwrap();
        let (u, _) = s.solve_sublinear(0.0, None).unwrap();
        assert!(u.sup_distance(&t) < 1e-8 * t.max());
    }

    #[test]
    fn sublinear_uniqueness_and_oracle() {
        let m = ball(FRAC_PI_4, 0.03);
        let s = Solver::new(&m, SolverSettings::default());
        let (a, rep) = s.solve_sublinear(0.5, None).unwrap();
        let mut ones = ScalarField::new(vec![0.0; m.n_vertices()], Quantity::U, 0.5);
        for i in m.interior_vertices() {
            ones.values[i] = 1.0;
        }
        let (b, _) = s.solve_sublinear(0.5, Some(&ones)).unwrap();
        assert!(a.sup_distance(&b) <= 1e-8, "{}", a.sup_distance(&b));
        assert!(rep.residual_norm <= 1e-8);
        let radial = radial_shoot(FRAC_PI_4, 0.5).unwrap();
        let c = compare(&m, &a, &radial, ORIGIN).unwrap();
        assert!(c.sup_err <= 5e-3 * a.max(), "{c:?}");
    }

    #[test]
    fn eigen_hemisphere() {
        let m = ball(FRAC_PI_2, 0.02);
        let s = Solver::new(&m, SolverSettings::default());
        let e = s.solve_eigen().unwrap();
        assert!((e.lambda - 2.0).abs() < 5e-3, "{}", e.lambda);
        assert!((e.field.max() - 1.0).abs() < 1e-15);
        for (q, v) in m.vertices.iter().zip(&e.field.values) {
            let z = (1.0 - q.norm_sq()) / (1.0 + q.norm_sq());
            assert!((v - z).abs() < 5e-3);
        }
        // the reported eigenvalue is the Rayleigh quotient of the returned vector
        let x = s.system().restrict(&e.field.values);
        let rq = s.system().stiffness.quadratic_form(&x) / s.system().mass_rho.quadratic_form(&x);
        assert!((rq / e.lambda - 1.0).abs() < 1e-10);
    }

    #[test]
    fn eigen_small_ball() {
        let m = ball(0.1, 0.0015);
        let s = Solver::new(&m, SolverSettings::default());
        let e = s.solve_eigen().unwrap();
        assert!((e.lambda / 578.32 - 1.0).abs() < 0.01, "{}", e.lambda);
        let shot = radial_shoot(0.1, 1.0).unwrap().lambda.unwrap();
        assert!((e.lambda / shot - 1.0).abs() < 0.01);
    }

    #[test]
    fn rayleigh_minimality() {
        let m = ball(FRAC_PI_4, 0.05);
        let s = Solver::new(&m, SolverSettings::default());
        let e = s.solve_eigen().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let y: Vec<f64> = (0..s.system().n_free()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let q = s.system().stiffness.quadratic_form(&y) / s.system().mass_rho.quadratic_form(&y);
            assert!(q >= e.lambda - 1e-8);
        }
    }

    #[test]
    fn superlinear_matches_radial_oracle() {
        let m = ball(FRAC_PI_4, 0.02);
        let s = Solver::new(&m, SolverSettings::default());
        let (u, rep) = s.solve_superlinear(2.0, true).unwrap();
        assert!(rep.residual_norm <= 1e-8);
        let radial = radial_shoot(FRAC_PI_4, 2.0).unwrap();
        let c = compare(&m, &u, &radial, ORIGIN).unwrap();
        assert!(c.sup_err <= 5e-3 * u.max(), "{c:?}");
    }

    #[test]
    fn near_one_approaches_eigenfunction() {
        let m = ball(FRAC_PI_4, 0.04);
        let s = Solver::new(&m, SolverSettings::default());
        let e = s.solve_eigen().unwrap();
        let (u, _) = s.solve_superlinear(1.01, false).unwrap();
        assert!(u.normalized().sup_distance(&e.field) <= 0.05);
    }

    #[test]
    fn uncertified_exponent_needs_flag() {
        let m = ball(FRAC_PI_4, 0.08);
        let s = Solver::new(&m, SolverSettings::default());
        assert_eq!(s.solve_superlinear(3.5, true).unwrap_err(), Error::Uncertified { p: 3.5 });
        let settings = SolverSettings { experimental: true, ..Default::default() };
        let s = Solver::new(&m, settings);
        let (_, rep) = s.solve_superlinear(3.5, true).unwrap();
        assert!(!rep.certified);
    }

    #[test]
    fn sweep_diagnostics_shrink_towards_one() {
        let m = ball(FRAC_PI_4, 0.04);
        let s = Solver::new(&m, SolverSettings::default());
        let sweep = s.sweep_p(&[0.9, 0.99, 1.0, 1.01, 1.1, 3.5]).unwrap();
        let d: Vec<Option<f64>> = sweep.entries.iter().map(|e| e.diagnostic).collect();
        assert!(d[1].unwrap() < d[0].unwrap());
        assert_eq!(d[2], Some(0.0));
        assert!(d[3].unwrap() < d[4].unwrap());
        assert!(sweep.entries[5].error.is_some());
    }

    #[test]
    fn radial_symmetry_on_annuli() {
        let m = ball(FRAC_PI_4, 0.03);
        let s = Solver::new(&m, SolverSettings::default());
        let (u, _) = s.solve_sublinear(0.5, None).unwrap();
        let c = stereo_lift(ORIGIN);
        for k in 1..8 {
            let (lo, hi) = (k as f64 * 0.09, k as f64 * 0.09 + 0.01);
            let vals: Vec<f64> = (0..m.n_vertices())
                .filter(|&i| {
                    let d = crate::geometry::geodesic_distance(c, stereo_lift(m.vertices[i]));
                    d >= lo && d < hi
                })
                .map(|i| u.values[i])
                .collect();
            if vals.len() < 3 {
                continue;
            }
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            let sd = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64).sqrt();
            assert!(sd / mean <= 1e-2, "annulus {k}: {}", sd / mean);
        }
    }

    #[test]
    fn field_csv_layout() {
        let m = ball(FRAC_PI_4, 0.1);
        let s = Solver::new(&m, SolverSettings::default());
        let (u, _) = s.solve_torsion().unwrap();
        let csv = field_csv(&m, &u).unwrap();
        assert_eq!(csv.lines().next().unwrap(), "X,Y,z_sphere,u,quantity,p");
        assert_eq!(csv.lines().count(), m.n_vertices() + 1);
    }
}
