//! Radial ground truth on geodesic balls centred at the south pole.
//!
//! A radial function `u(r)` of the geodesic distance `r` satisfies
//! `Delta u = u'' + cot(r) u'`, and its covariant Hessian has the radial
//! eigenvalue `u''` and the tangential eigenvalue `u' cot(r)`.

pub mod ode;

use serde::Serialize;
use std::fmt::Write as _;

use crate::domain::TriangleMesh;
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::geometry::{conformal_factor, geodesic_distance, stereo_lift, PlanarPoint};
use ode::{integrate, Tolerance};

/// Number of grid intervals on `[0, R]`.
pub const GRID_INTERVALS: usize = 2000;
/// Starting radius of the integration; the series start removes the `cot r` singularity.
pub const SERIES_START: f64 = 1e-6;
const ODE_TOL: Tolerance = Tolerance { rtol: 1e-13, atol: 1e-16 };
const MAX_SHOOTING_ITERATIONS: usize = 300;
/// First zero of the Bessel function `J_0`.
pub const BESSEL_J0_ZERO: f64 = 2.404_825_557_695_773;

/// Radial profile `u(r)` on `[0, R]`, with `u(R) = 0` and `u'(0) = 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadialSolution {
    pub radius: f64,
    pub p: f64,
    pub r: Vec<f64>,
    pub u: Vec<f64>,
    pub du: Vec<f64>,
    /// First Dirichlet eigenvalue, for `p = 1`.
    pub lambda: Option<f64>,
}

fn nonlinearity(u: f64, p: f64) -> f64 {
    if p == 0.0 {
        1.0
    } else if u > 0.0 {
        u.powf(p)
    } else {
        0.0
    }
}

impl RadialSolution {
    /// Right-hand side `g(u)` in `u'' + cot(r) u' + g(u) = 0`.
    fn source(&self, u: f64) -> f64 {
        match self.lambda {
            Some(l) => l * u,
            None => nonlinearity(u, self.p),
        }
    }

    fn locate(&self, r: f64) -> (usize, f64) {
        let n = self.r.len() - 1;
        let dr = self.radius / n as f64;
        let k = ((r / dr).floor() as usize).min(n - 1);
        (k, (r - self.r[k]) / dr)
    }

    /// Cubic Hermite interpolation of `u` at radius `r` (clamped to `[0, R]`).
    pub fn value(&self, r: f64) -> f64 {
        let r = r.clamp(0.0, self.radius);
        let (k, t) = self.locate(r);
        let dr = self.r[k + 1] - self.r[k];
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.u[k] + h10 * dr * self.du[k] + h01 * self.u[k + 1] + h11 * dr * self.du[k + 1]
    }

    pub fn derivative(&self, r: f64) -> f64 {
        let r = r.clamp(0.0, self.radius);
        let (k, t) = self.locate(r);
        let dr = self.r[k + 1] - self.r[k];
        let t2 = t * t;
        let d00 = 6.0 * t2 - 6.0 * t;
        let d10 = 3.0 * t2 - 4.0 * t + 1.0;
        let d01 = -6.0 * t2 + 6.0 * t;
        let d11 = 3.0 * t2 - 2.0 * t;
        (d00 * self.u[k] + d01 * self.u[k + 1]) / dr + d10 * self.du[k] + d11 * self.du[k + 1]
    }

    /// `u''` from the equation itself.
    pub fn second_derivative(&self, r: f64) -> f64 {
        let u = self.value(r);
        if r < 1e-8 {
            return -0.5 * self.source(u);
        }
        -self.derivative(r) / r.tan() - self.source(u)
    }

    pub fn max_value(&self) -> f64 {
        self.u[0]
    }

    /// Radial and tangential covariant Hessian eigenvalues of `v = u^((1-p)/2)`
    /// (or `log u` when `p = 1`) at radius `r in (0, R)`.
    pub fn transform_hessian_eigs(&self, r: f64) -> (f64, f64) {
        let (u, du, ddu) = (self.value(r), self.derivative(r), self.second_derivative(r));
        let (dv, ddv) = if (self.p - 1.0).abs() <= 1e-6 {
            (du / u, ddu / u - (du / u).powi(2))
        } else {
            let a = 0.5 * (1.0 - self.p);
            (a * u.powf(a - 1.0) * du, a * u.powf(a - 1.0) * ddu + a * (a - 1.0) * u.powf(a - 2.0) * du * du)
        };
        let tangential = if r < 1e-8 { ddv } else { dv / r.tan() };
        (ddv, tangential)
    }

    /// CSV dump: a `#` header recording `R`, `p` and `lambda`, then `r,u,u_prime` rows.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        let lambda = self.lambda.map_or("none".to_string(), |l| format!("{l:.16e}"));
        let _ = writeln!(s, "# R={:.16e}, p={:.16e}, lambda={}", self.radius, self.p, lambda);
        s.push_str("r,u,u_prime\n");
        for k in 0..self.r.len() {
            let _ = writeln!(s, "{:.16e},{:.16e},{:.16e}", self.r[k], self.u[k], self.du[k]);
        }
        s
    }
}

/// Exact radial torsion function `u(r) = 2 ln(cos(r/2) / cos(R/2))`.
pub fn torsion_closed_form(radius: f64) -> Result<RadialSolution> {
    if !(radius > 0.0 && radius < std::f64::consts::PI) {
        return Err(Error::InvalidDomain(format!("radius {radius} outside (0, pi)")));
    }
    let n = GRID_INTERVALS;
    let r: Vec<f64> = (0..=n).map(|k| radius * k as f64 / n as f64).collect();
    let c = (radius / 2.0).cos();
    let u = r.iter().map(|&x| 2.0 * ((x / 2.0).cos() / c).ln()).collect();
    let du = r.iter().map(|&x| -(x / 2.0).tan()).collect();
    Ok(RadialSolution { radius, p: 0.0, r, u, du, lambda: None })
}

/// Integrates `u'' + cot(r) u' + g(u) = 0` from the centre with `u(0) = m`
/// and returns the grid profile, or only `u(R)` when `grid` is false.
fn shoot_profile(radius: f64, m: f64, g: &dyn Fn(f64) -> f64, grid: bool) -> Option<(Vec<f64>, Vec<f64>)> {
    let rhs = |r: f64, y: &[f64; 2]| [y[1], -y[1] / r.tan() - g(y[0])];
    let eps = SERIES_START;
    let g0 = g(m);
    let mut y = [m - g0 * eps * eps / 4.0, -g0 * eps / 2.0];
    let tol = Tolerance { rtol: ODE_TOL.rtol, atol: ODE_TOL.atol * m.abs() };
    if !grid {
        let y = integrate(&rhs, eps, radius, y, tol, 1e-4)?;
        return Some((vec![y[0]], vec![y[1]]));
    }
    let n = GRID_INTERVALS;
    let mut u = Vec::with_capacity(n + 1);
    let mut du = Vec::with_capacity(n + 1);
    u.push(m);
    du.push(0.0);
    let mut r0 = eps;
    for k in 1..=n {
        let r1 = radius * k as f64 / n as f64;
        y = integrate(&rhs, r0, r1, y, tol, (r1 - r0) / 4.0)?;
        u.push(y[0]);
        du.push(y[1]);
        r0 = r1;
    }
    Some((u, du))
}

/// Illinois-modified regula falsi on a sign-changing bracket.
fn illinois(
    f: &dyn Fn(f64) -> Option<f64>,
    mut a: f64,
    mut b: f64,
    mut fa: f64,
    mut fb: f64,
    done: &dyn Fn(f64, f64) -> bool,
) -> Result<f64> {
    let mut side = 0i8;
    for _ in 0..MAX_SHOOTING_ITERATIONS {
        let c = (a * fb - b * fa) / (fb - fa);
        let c = if c.is_finite() && c > a.min(b) && c < a.max(b) { c } else { 0.5 * (a + b) };
        let fc = f(c).ok_or_else(|| Error::ShootingFailed(format!("integration failed at parameter {c}")))?;
        if done(c, fc) {
            return Ok(c);
        }
        if fc.signum() == fb.signum() {
            b = c;
            fb = fc;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        } else {
            a = c;
            fa = fc;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        }
        if (b - a).abs() <= 1e-15 * a.abs().max(b.abs()) {
            return Ok(if fa.abs() < fb.abs() { a } else { b });
        }
    }
    Err(Error::ShootingFailed("bracket did not converge".into()))
}

/// Radial Lane-Emden profile on the ball of radius `R`, or for `p = 1` the
/// first Dirichlet eigenpair normalized by `u(0) = 1`.
pub fn radial_shoot(radius: f64, p: f64) -> Result<RadialSolution> {
    if !(radius > 0.0 && radius < std::f64::consts::FRAC_PI_2 + 1e-12) {
        return Err(Error::InvalidDomain(format!("radius {radius} outside (0, pi/2]")));
    }
    if !(0.0..=4.0).contains(&p) {
        return Err(Error::InvalidExponent(p));
    }
    let n = GRID_INTERVALS;
    let r: Vec<f64> = (0..=n).map(|k| radius * k as f64 / n as f64).collect();
    if (p - 1.0).abs() <= 1e-6 {
        let end = |lambda: f64| shoot_profile(radius, 1.0, &|u| lambda * u, false).map(|(u, _)| u[0]);
        // spherical caps have a smaller first eigenvalue than the Euclidean disk of equal radius
        let mut hi = 1.05 * (BESSEL_J0_ZERO / radius).powi(2) + 1.0;
        let mut fhi = end(hi).ok_or_else(|| Error::ShootingFailed("eigen bracket".into()))?;
        let mut tries = 0;
        while fhi >= 0.0 {
            hi *= 1.5;
            fhi = end(hi).ok_or_else(|| Error::ShootingFailed("eigen bracket".into()))?;
            tries += 1;
            if tries > 20 {
                return Err(Error::ShootingFailed("no sign change for the eigenvalue".into()));
            }
        }
        let lambda = illinois(&end, 0.0, hi, 1.0, fhi, &|_, f| f.abs() <= 1e-12)?;
        let (u, du) = shoot_profile(radius, 1.0, &|u| lambda * u, true)
            .ok_or_else(|| Error::ShootingFailed("profile integration".into()))?;
        return Ok(RadialSolution { radius, p: 1.0, r, u, du, lambda: Some(lambda) });
    }
    let g = move |u: f64| nonlinearity(u, p);
    let end = |m: f64| shoot_profile(radius, m, &g, false).map(|(u, _)| u[0]);
    let scan = |lo: f64, decades: usize| -> Result<Option<(f64, f64, f64, f64)>> {
        let mut prev: Option<(f64, f64)> = None;
        for k in 0..=6 * decades {
            let m = lo * 10f64.powf(k as f64 / 6.0);
            let fm = end(m).ok_or_else(|| Error::ShootingFailed(format!("integration failed at m = {m}")))?;
            if let Some((mp, fp)) = prev {
                if fp.signum() != fm.signum() {
                    return Ok(Some((mp, m, fp, fm)));
                }
            }
            prev = Some((m, fm));
        }
        Ok(None)
    };
    // geometric scan for a sign change of u(R; m) over m in [1e-6, 1e3]; near
    // p = 1 the amplitude behaves like lambda_1^(1/(p-1)) and can leave that
    // window, so fall back to six decades around that estimate
    let bracket = match scan(1e-6, 9)? {
        Some(b) => Some(b),
        None => {
            let lambda = radial_shoot(radius, 1.0)?.lambda.unwrap_or(1.0);
            let estimate = lambda.powf(1.0 / (p - 1.0));
            if estimate.is_finite() && estimate > 0.0 {
                scan(estimate * 1e-3, 6)?
            } else {
                None
            }
        }
    };
    let (a, b, fa, fb) = bracket.ok_or_else(|| Error::ShootingFailed(format!("no bracket for p = {p}")))?;
    let m = illinois(&end, a, b, fa, fb, &|m, f| f.abs() <= 1e-11 * m)?;
    let (u, du) = shoot_profile(radius, m, &g, true).ok_or_else(|| Error::ShootingFailed("profile integration".into()))?;
    Ok(RadialSolution { radius, p, r, u, du, lambda: None })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Comparison {
    pub sup_err: f64,
    pub l2_err: f64,
    pub rel_sup_err: f64,
}

/// Compares a mesh field against the radial profile evaluated at each vertex's
/// geodesic distance from the lift of `center`.
///
/// `l2_err` is the spherical-area weighted L2 norm of the difference, using
/// lumped vertex areas.
pub fn compare(mesh: &TriangleMesh, field: &ScalarField, radial: &RadialSolution, center: PlanarPoint) -> Result<Comparison> {
    if field.len() != mesh.n_vertices() {
        return Err(Error::FieldMismatch { values: field.len(), vertices: mesh.n_vertices() });
    }
    let c = stereo_lift(center);
    let dist = |i: usize| geodesic_distance(c, stereo_lift(mesh.vertices[i]));
    for &b in &mesh.boundary_vertices {
        let d = dist(b);
        if (d - radial.radius).abs() > 2.0 * mesh.h {
            return Err(Error::DomainMismatch(format!(
                "boundary vertex {b} at radius {d:.6} differs from R = {:.6}",
                radial.radius
            )));
        }
    }
    let mut weights = vec![0.0; mesh.n_vertices()];
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let a = mesh.triangle_area(t) / 3.0;
        for &i in tri {
            weights[i] += a * conformal_factor(mesh.vertices[i]);
        }
    }
    let (mut sup, mut l2) = (0.0f64, 0.0);
    for (i, w) in weights.iter().enumerate() {
        let e = (field.values[i] - radial.value(dist(i))).abs();
        sup = sup.max(e);
        l2 += w * e * e;
    }
    let scale = radial.max_value().abs().max(field.max().abs());
    Ok(Comparison { sup_err: sup, l2_err: l2.sqrt(), rel_sup_err: sup / scale })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, FRAC_PI_4};

    #[test]
    fn torsion_values() {
        let t = torsion_closed_form(FRAC_PI_3).unwrap();
        assert!((t.max_value() - (4.0f64 / 3.0).ln()).abs() < 1e-14);
        assert!((t.max_value() - 0.2876821).abs() < 1e-7);
        let t2 = torsion_closed_form(FRAC_PI_2).unwrap();
        // 2 ln(1 / cos(pi/4)) = ln 2
        assert!((t2.max_value() - 2f64.ln()).abs() < 1e-14);
        assert!(t.u.last().unwrap().abs() < 1e-15);
        assert_eq!(t.du[0], 0.0);
        // residual u'' + cot r u' + 1 with u'' by central differences of the exact formula
        let f = |x: f64| 2.0 * ((x / 2.0).cos() / (FRAC_PI_3 / 2.0).cos()).ln();
        for k in 1..20 {
            let r = FRAC_PI_3 * k as f64 / 20.0;
            let e = 1e-4;
            let upp = (f(r + e) - 2.0 * f(r) + f(r - e)) / (e * e);
            let up = -(r / 2.0).tan();
            assert!((upp + up / r.tan() + 1.0).abs() < 1e-6);
            // the stored derivative satisfies the equation exactly
            assert!((t.second_derivative(r) - (-0.5 / (r / 2.0).cos().powi(2))).abs() < 1e-10);
        }
    }

    #[test]
    fn shooting_reproduces_torsion() {
        let s = radial_shoot(FRAC_PI_3, 0.0).unwrap();
        let t = torsion_closed_form(FRAC_PI_3).unwrap();
        let worst = s.u.iter().zip(&t.u).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(worst < 1e-9, "{worst}");
    }

    #[test]
    fn hemisphere_eigenpair() {
        let s = radial_shoot(FRAC_PI_2, 1.0).unwrap();
        assert!((s.lambda.unwrap() - 2.0).abs() < 1e-8, "{:?}", s.lambda);
        for k in 0..s.r.len() {
            assert!((s.u[k] - s.r[k].cos()).abs() < 1e-7);
        }
    }

    #[test]
    fn small_ball_eigenvalue_is_nearly_euclidean() {
        let s = radial_shoot(0.1, 1.0).unwrap();
        let euclid = (BESSEL_J0_ZERO / 0.1).powi(2);
        assert!((euclid - 578.32).abs() < 0.01);
        assert!((s.lambda.unwrap() / euclid - 1.0).abs() < 0.005);
    }

    #[test]
    fn eigenvalue_decreases_with_radius() {
        let radii = [0.3, 0.6, 0.9, 1.2, FRAC_PI_2];
        let l: Vec<f64> = radii.iter().map(|&r| radial_shoot(r, 1.0).unwrap().lambda.unwrap()).collect();
        assert!(l.windows(2).all(|w| w[1] < w[0]), "{l:?}");
    }

    #[test]
    fn profiles_are_decreasing_with_zero_boundary() {
        for p in [0.5, 2.0, 3.0, 4.0] {
            let s = radial_shoot(FRAC_PI_4, p).unwrap();
            assert!(s.u.last().unwrap().abs() <= 1e-10 * s.max_value(), "p={p}");
            assert!(s.u.windows(2).all(|w| w[1] < w[0]), "p={p}");
            assert!(s.derivative(0.0).abs() < 1e-8);
            assert!(s.max_value() > 0.0);
        }
    }

    #[test]
    fn profiles_satisfy_the_ode() {
        for p in [0.5, 2.0] {
            let s = radial_shoot(FRAC_PI_4, p).unwrap();
            let e = 1e-3;
            for k in 1..10 {
                let r = FRAC_PI_4 * k as f64 / 10.0;
                let upp = (s.value(r + e) - 2.0 * s.value(r) + s.value(r - e)) / (e * e);
                let res = upp + s.derivative(r) / r.tan() + s.value(r).powf(p);
                assert!(res.abs() < 1e-5 * s.max_value().powf(p.max(1.0)), "p={p} r={r} res={res}");
            }
        }
    }

    #[test]
    fn transformed_profiles_have_the_expected_signs() {
        let delta = 0.15;
        for (p, sign) in [(0.0, -1.0), (0.5, -1.0), (1.0, -1.0), (2.0, 1.0), (3.0, 1.0)] {
            let s = radial_shoot(FRAC_PI_4, p).unwrap();
            for k in 1..200 {
                let r = (FRAC_PI_4 - delta) * k as f64 / 200.0;
                let (radial, tangential) = s.transform_hessian_eigs(r);
                assert!(sign * radial > 0.0 && sign * tangential > 0.0, "p={p} r={r} {radial} {tangential}");
            }
        }
    }

    #[test]
    fn amplitude_far_below_the_default_window() {
        // m ~ lambda_1^(1/(p-1)) ~ 1e-10 here
        let s = radial_shoot(FRAC_PI_4, 0.9).unwrap();
        assert!(s.max_value() < 1e-6 && s.max_value() > 0.0);
        assert!(s.u.last().unwrap().abs() <= 1e-10 * s.max_value());
    }

    #[test]
    fn invalid_inputs() {
        assert!(radial_shoot(2.0, 1.0).is_err());
        assert!(radial_shoot(0.5, -0.5).is_err());
        assert!(torsion_closed_form(0.0).is_err());
    }

    #[test]
    fn csv_header_records_parameters() {
        let s = radial_shoot(0.5, 1.0).unwrap();
        let csv = s.to_csv();
        let mut lines = csv.lines();
        assert!(lines.next().unwrap().starts_with("# R=5.0000000000000000e-1, p=1.0000000000000000e0, lambda="));
        assert_eq!(lines.next().unwrap(), "r,u,u_prime");
        assert_eq!(csv.lines().count(), GRID_INTERVALS + 3);
    }
}
