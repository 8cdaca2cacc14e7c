//! Browser front end: mesh a convex spherical domain, solve `-Laplace u = u^p`,
//! extract level curves with their geodesic curvature and sweep the distance
//! to the first eigenfunction.

use lane_emden::domain::{generate_mesh, planarize, DomainSpec, TriangleMesh};
use lane_emden::field::ScalarField;
use lane_emden::geometry::{check_uniform_convexity, ConvexityVerdict};
use lane_emden::solver::{SolveReport, Solver, SolverSettings};
use lane_emden::verify::{covariant_hessian, level_results};
use lane_emden::{Error, Result};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Coarsest and finest mesh sizes the page offers; finer meshes stall the tab.
const H_RANGE: (f64, f64) = (0.02, 0.2);
const BOUNDARY_SAMPLES: usize = 256;

#[derive(Serialize)]
struct LevelCurve {
    c: f64,
    min_kappa_g: f64,
    convex: bool,
    /// `[x, y, kappa_g]` per sample.
    points: Vec<[f64; 3]>,
}

#[derive(Serialize)]
struct SweepPoint {
    p: f64,
    distance: Option<f64>,
    error: Option<String>,
}

#[derive(Serialize)]
struct SweepSummary {
    lambda1: f64,
    points: Vec<SweepPoint>,
}

fn js_err(e: Error) -> JsError {
    JsError::new(&e.to_string())
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("plain data serializes")
}

/// A meshed domain and its most recent solution.
#[wasm_bindgen]
pub struct Lab {
    mesh: TriangleMesh,
    solution: Option<(ScalarField, SolveReport)>,
}

impl Lab {
    /// `kind` is `"ball"` (radius `a`) or `"ellipse"` (semi-axes `a`, `b`).
    pub fn create(kind: &str, a: f64, b: f64, h: f64) -> Result<Lab> {
        let domain = match kind {
            "ball" => DomainSpec::ball(a),
            "ellipse" => DomainSpec::ellipse(a, b),
            other => return Err(Error::InvalidDomain(format!("unknown domain kind {other:?}"))),
        };
        if !(h >= H_RANGE.0 && h <= H_RANGE.1) {
            return Err(Error::InvalidDomain(format!("h = {h} outside [{}, {}]", H_RANGE.0, H_RANGE.1)));
        }
        let convexity = check_uniform_convexity(&domain, BOUNDARY_SAMPLES)?;
        if convexity.verdict == ConvexityVerdict::NotConvex {
            return Err(Error::NotConvex { kappa_min: convexity.kappa_min });
        }
        let mesh = generate_mesh(&planarize(&domain, BOUNDARY_SAMPLES)?, h)?;
        Ok(Lab { mesh, solution: None })
    }

    pub fn try_solve(&mut self, p: f64) -> Result<&ScalarField> {
        let settings = SolverSettings { experimental: true, ..SolverSettings::default() };
        let solved = Solver::new(&self.mesh, settings).solve(p)?;
        Ok(&self.solution.insert(solved).0)
    }

    pub fn try_levels(&self, fractions: &[f64]) -> Result<String> {
        let (u, _) = self.solution.as_ref().ok_or_else(|| Error::InvalidDomain("solve before extracting levels".into()))?;
        let hu = covariant_hessian(&self.mesh, u)?;
        let curves: Vec<LevelCurve> = level_results(&self.mesh, u, &hu, fractions)?
            .into_iter()
            .map(|l| LevelCurve {
                c: l.c,
                min_kappa_g: l.min_kappa_g,
                convex: l.convex,
                points: l.curve.iter().map(|s| [s.point.x, s.point.y, s.kappa_g]).collect(),
            })
            .collect();
        Ok(to_json(&curves))
    }

    pub fn try_sweep(&self, p_list: &[f64]) -> Result<String> {
        let sweep = Solver::new(&self.mesh, SolverSettings::default()).sweep_p(p_list)?;
        let points = sweep.entries.into_iter().map(|e| SweepPoint { p: e.p, distance: e.diagnostic, error: e.error }).collect();
        Ok(to_json(&SweepSummary { lambda1: sweep.lambda1, points }))
    }
}

#[wasm_bindgen]
impl Lab {
    #[wasm_bindgen(constructor)]
    pub fn new(kind: &str, a: f64, b: f64, h: f64) -> std::result::Result<Lab, JsError> {
        Lab::create(kind, a, b, h).map_err(js_err)
    }

    /// Chart coordinates, interleaved `x0, y0, x1, y1, ...`.
    pub fn vertices(&self) -> Vec<f64> {
        self.mesh.vertices.iter().flat_map(|q| [q.x, q.y]).collect()
    }

    pub fn triangles(&self) -> Vec<u32> {
        self.mesh.triangles.iter().flat_map(|t| t.map(|i| i as u32)).collect()
    }

    /// Solves for exponent `p` and returns the nodal values.
    pub fn solve(&mut self, p: f64) -> std::result::Result<Vec<f64>, JsError> {
        self.try_solve(p).map(|u| u.values.clone()).map_err(js_err)
    }

    /// JSON summary of the last solve.
    pub fn report(&self) -> Option<String> {
        self.solution.as_ref().map(|(_, r)| to_json(r))
    }

    /// Level curves `{u = f max u}` of the last solution as JSON, with `kappa_g` per sample.
    pub fn levels(&self, fractions: Vec<f64>) -> std::result::Result<String, JsError> {
        self.try_levels(&fractions).map_err(js_err)
    }

    /// `D(p) = sup |u_p / max u_p - u_1|` for each exponent, as JSON.
    pub fn sweep(&self, p_list: Vec<f64>) -> std::result::Result<String, JsError> {
        self.try_sweep(&p_list).map_err(js_err)
    }
}
