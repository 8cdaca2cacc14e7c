use serde::{Deserialize, Serialize};

use super::hessian::HessianField;
use crate::domain::{boundary_distance, TriangleMesh};
use crate::error::{Error, Result};

/// Relative floor for strictness decisions, scaled by `max |H|`.
pub const DEFINITENESS_RTOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Definiteness {
    NegativeDefinite,
    PositiveDefinite,
    Indefinite,
    SemidefiniteMarginal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct RankSummary {
    pub rank0: usize,
    pub rank1: usize,
    pub rank2: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DefinitenessReport {
    pub definiteness: Definiteness,
    pub eps_def: f64,
    pub included: usize,
    pub min_abs_eig: f64,
    pub min_abs_phi: f64,
    pub max_trace: f64,
    pub min_trace: f64,
    pub rank_field_summary: RankSummary,
}

/// Vertices at least `margin` from the boundary that carry a Hessian sample.
pub fn included_vertices(mesh: &TriangleMesh, hessian: &HessianField, margin: f64) -> Vec<usize> {
    let dist = boundary_distance(mesh);
    mesh.interior_vertices().filter(|&i| dist.values[i] >= margin && hessian.samples[i].is_some()).collect()
}

/// Classifies the Hessian field over vertices at least `margin` from the boundary.
pub fn definiteness_report(mesh: &TriangleMesh, hessian: &HessianField, margin: f64) -> Result<DefinitenessReport> {
    definiteness_report_with(mesh, hessian, margin, DEFINITENESS_RTOL)
}

/// As [`definiteness_report`] with `eps_def = rtol max |H|`.
pub fn definiteness_report_with(
    mesh: &TriangleMesh,
    hessian: &HessianField,
    margin: f64,
    rtol: f64,
) -> Result<DefinitenessReport> {
    let included = included_vertices(mesh, hessian, margin);
    if included.is_empty() {
        return Err(Error::EmptyInterior);
    }
    let samples: Vec<_> = included.iter().map(|&i| hessian.samples[i].unwrap()).collect();
    let scale = samples.iter().map(|s| s.max_abs()).fold(0.0, f64::max);
    let eps = rtol * scale;
    let eps2 = eps * eps;
    let mut ranks = RankSummary::default();
    let (mut neg, mut pos, mut semi_neg, mut semi_pos) = (0, 0, 0, 0);
    for s in &samples {
        if s.phi.abs() > eps2 {
            ranks.rank2 += 1;
        } else if s.trace.abs() > eps {
            ranks.rank1 += 1;
        } else {
            ranks.rank0 += 1;
        }
        if s.trace < -eps && s.phi > eps2 {
            neg += 1;
        } else if s.trace > eps && s.phi > eps2 {
            pos += 1;
        }
        if s.eig_max <= eps {
            semi_neg += 1;
        }
        if s.eig_min >= -eps {
            semi_pos += 1;
        }
    }
    let n = samples.len();
    let definiteness = if neg == n {
        Definiteness::NegativeDefinite
    } else if pos == n {
        Definiteness::PositiveDefinite
    } else if semi_neg == n || semi_pos == n {
        Definiteness::SemidefiniteMarginal
    } else {
        Definiteness::Indefinite
    };
    Ok(DefinitenessReport {
        definiteness,
        eps_def: eps,
        included: n,
        min_abs_eig: samples.iter().map(|s| s.eig_min.abs().min(s.eig_max.abs())).fold(f64::INFINITY, f64::min),
        min_abs_phi: samples.iter().map(|s| s.phi.abs()).fold(f64::INFINITY, f64::min),
        max_trace: samples.iter().map(|s| s.trace).fold(f64::NEG_INFINITY, f64::max),
        min_trace: samples.iter().map(|s| s.trace).fold(f64::INFINITY, f64::min),
        rank_field_summary: ranks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{generate_mesh, planarize, DomainSpec};
    use crate::verify::hessian::{HessianSample, LocalFit};

    fn field(mesh: &TriangleMesh, s: HessianSample) -> HessianField {
        HessianField {
            fits: vec![Some(LocalFit { grad: [0.0; 2], hess: [[0.0; 2]; 2] }); mesh.n_vertices()],
            samples: vec![Some(s); mesh.n_vertices()],
        }
    }

    #[test]
    fn verdicts() {
        let m = generate_mesh(&planarize(&DomainSpec::ball(0.6), 64).unwrap(), 0.06).unwrap();
        let margin = 3.0 * m.h;
        let r = definiteness_report(&m, &field(&m, HessianSample::from_components(-1.0, 0.1, -2.0, 0.0)), margin).unwrap();
        assert_eq!(r.definiteness, Definiteness::NegativeDefinite);
        assert_eq!(r.rank_field_summary.rank2, r.included);
        let r = definiteness_report(&m, &field(&m, HessianSample::from_components(1.0, 0.0, 2.0, 0.0)), margin).unwrap();
        assert_eq!(r.definiteness, Definiteness::PositiveDefinite);
        let r = definiteness_report(&m, &field(&m, HessianSample::from_components(1.0, 0.0, -2.0, 0.0)), margin).unwrap();
        assert_eq!(r.definiteness, Definiteness::Indefinite);
        let r = definiteness_report(&m, &field(&m, HessianSample::from_components(-1.0, 0.0, 0.0, 0.0)), margin).unwrap();
        assert_eq!(r.definiteness, Definiteness::SemidefiniteMarginal);
        assert_eq!(r.rank_field_summary.rank1, r.included);
        assert!(matches!(
            definiteness_report(&m, &field(&m, HessianSample::from_components(-1.0, 0.0, -1.0, 0.0)), 10.0),
            Err(Error::EmptyInterior)
        ));
    }
}
