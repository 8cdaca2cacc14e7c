//! Geometric checks on solved fields: covariant Hessians of the power
//! transform, definiteness and rank, level-set curvature, critical points and
//! sign conditions near the boundary.

pub mod critical;
pub mod definiteness;
pub mod hessian;
pub mod layer;
pub mod level;
pub mod residual;

pub use critical::{critical_points, critical_points_with, CriticalPoint, CriticalType};
pub use definiteness::{
    definiteness_report, definiteness_report_with, included_vertices, Definiteness, DefinitenessReport, RankSummary,
    DEFINITENESS_RTOL,
};
pub use hessian::{
    covariant_chart_hessian, covariant_hessian, covariant_hessian_with, fit_derivatives, power_transform, transform_hessian,
    FitOrder, HessianField, HessianSample, LocalFit,
};
pub use layer::{boundary_layer_check, BoundaryLayerReport};
pub use level::{
    level_csv, level_curvature, level_curvature_with, level_results, superlevel_duality, LevelResult, LevelSample,
    DEFAULT_LEVEL_FRACTIONS,
};
pub use residual::{discrete_laplace_beltrami, pde_residual, pde_residual_with, trace_identity, vertex_weights, Residuals};

use serde::{Deserialize, Serialize};

use crate::domain::TriangleMesh;
use crate::error::Result;
use crate::field::ScalarField;
use crate::solver::EIGEN_BAND;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyOptions {
    /// Interior statistics skip vertices closer than this to the boundary; `None` means `3h`.
    pub exclusion_margin: Option<f64>,
    pub level_fractions: Vec<f64>,
    /// Width of the boundary band; `None` skips the boundary-layer check.
    pub delta: Option<f64>,
    pub fit_order: FitOrder,
    /// `eps_def` as a fraction of `max |H|`.
    pub definiteness_rtol: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            exclusion_margin: None,
            level_fractions: DEFAULT_LEVEL_FRACTIONS.to_vec(),
            delta: None,
            fit_order: FitOrder::default(),
            definiteness_rtol: DEFINITENESS_RTOL,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    Power,
    Log,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub schema_version: u32,
    pub p: f64,
    pub transform: Transform,
    pub exclusion_margin: f64,
    pub definiteness: Definiteness,
    pub expected_definiteness: Definiteness,
    pub eps_def: f64,
    pub included_vertices: usize,
    pub min_abs_eig: f64,
    pub min_abs_phi: f64,
    pub max_trace: f64,
    pub min_trace: f64,
    pub rank_field_summary: RankSummary,
    pub level_set_results: Vec<LevelResult>,
    pub critical_points: Vec<CriticalPoint>,
    pub boundary_layer: Option<BoundaryLayerReport>,
    pub residuals: Residuals,
    pub superlevel_duality: bool,
    pub passed: bool,
}

/// Sign of the transform's Hessian that the theory predicts for exponent `p`.
pub fn expected_definiteness(p: f64) -> Definiteness {
    if p > 1.0 + EIGEN_BAND {
        Definiteness::PositiveDefinite
    } else {
        Definiteness::NegativeDefinite
    }
}

/// Runs every check on a solved field `u` at exponent `p`; `lambda` is required for `p = 1`.
pub fn verify(
    mesh: &TriangleMesh,
    u: &ScalarField,
    p: f64,
    lambda: Option<f64>,
    options: &VerifyOptions,
) -> Result<VerificationReport> {
    let log = (p - 1.0).abs() <= EIGEN_BAND;
    let margin = options.exclusion_margin.unwrap_or(3.0 * mesh.h);
    let v = power_transform(mesh, u, p)?;
    let hu = covariant_hessian_with(mesh, u, options.fit_order)?;
    let hv = transform_hessian(mesh, u, &hu, p);
    let def = definiteness_report_with(mesh, &hv, margin, options.definiteness_rtol)?;
    let levels = level_results(mesh, u, &hu, &options.level_fractions)?;
    let crit = critical_points_with(mesh, &hu, options.definiteness_rtol);
    let layer = match options.delta {
        Some(d) => Some(boundary_layer_check(mesh, &hu, &hv, p, d)?),
        None => None,
    };
    let lam = if log { lambda.ok_or(crate::Error::InvalidExponent(p))? } else { 0.0 };
    let residuals = residual::pde_residual_from(mesh, u, &v, &hu, &hv, p, lam, margin)?;
    let duality = options.level_fractions.iter().all(|f| superlevel_duality(u, &v, p, f * u.max()));
    let expected = expected_definiteness(p);
    let definiteness_ok = if log {
        def.max_trace < 0.0 && matches!(def.definiteness, Definiteness::NegativeDefinite | Definiteness::SemidefiniteMarginal)
    } else {
        def.definiteness == expected && def.rank_field_summary.rank2 == def.included
    };
    let passed = definiteness_ok
        && levels.iter().all(|l| l.convex)
        && crit.len() == 1
        && crit[0].kind == CriticalType::Max
        && layer.as_ref().is_none_or(|l| l.passed())
        && duality;
    Ok(VerificationReport {
        schema_version: SCHEMA_VERSION,
        p,
        transform: if log { Transform::Log } else { Transform::Power },
        exclusion_margin: margin,
        definiteness: def.definiteness,
        expected_definiteness: expected,
        eps_def: def.eps_def,
        included_vertices: def.included,
        min_abs_eig: def.min_abs_eig,
        min_abs_phi: def.min_abs_phi,
        max_trace: def.max_trace,
        min_trace: def.min_trace,
        rank_field_summary: def.rank_field_summary,
        level_set_results: levels,
        critical_points: crit,
        boundary_layer: layer,
        residuals,
        superlevel_duality: duality,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{generate_mesh, planarize, DomainSpec};
    use crate::solver::{Solver, SolverSettings};
    use std::f64::consts::FRAC_PI_4;

    #[test]
    fn ball_torsion_and_superlinear_verdicts() {
        let m = generate_mesh(&planarize(&DomainSpec::ball(FRAC_PI_4), 64).unwrap(), 0.03).unwrap();
        let s = Solver::new(&m, SolverSettings::default());
        let (u0, _) = s.solve_torsion().unwrap();
        let r0 = verify(&m, &u0, 0.0, None, &VerifyOptions::default()).unwrap();
        assert_eq!(r0.definiteness, Definiteness::NegativeDefinite);
        assert!(r0.passed, "{r0:?}");
        assert!(r0.critical_points[0].location.norm() < 2.0 * m.h);
        let (u2, _) = s.solve_superlinear(2.0, true).unwrap();
        let r2 = verify(&m, &u2, 2.0, None, &VerifyOptions::default()).unwrap();
        assert_eq!(r2.definiteness, Definiteness::PositiveDefinite);
        assert!(r2.passed, "{r2:?}");
        let json = serde_json::to_value(&r2).unwrap();
        assert_eq!(json["schema_version"], 1);
        assert_eq!(json["critical_points"][0]["type"], "max");
    }
}
