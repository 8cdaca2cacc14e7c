use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::domain::DomainSpec;
use crate::error::{Error, Result};
use crate::geometry::{PlanarPoint, SpherePoint};
use crate::solver::{SolverSettings, CERTIFIED_MAX_P};
use crate::verify::{FitOrder, VerifyOptions};

pub const DEFAULT_H: f64 = 0.05;
pub const MAX_H: f64 = 0.2;
pub const DEFAULT_SEED: u64 = 0;
pub const DEFAULT_P_LIST: [f64; 4] = [0.9, 0.99, 1.01, 1.1];

/// Fully resolved run configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub domain: DomainSpec,
    pub h: f64,
    pub p: Option<f64>,
    pub p_list: Vec<f64>,
    pub solver: SolverSettings,
    pub verify: VerifyOptions,
    /// Seeds the randomized self-checks.
    pub seed: u64,
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
enum DomainKind {
    Ball,
    Ellipse,
    Curve,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDomain {
    kind: DomainKind,
    #[serde(rename = "R")]
    radius: Option<f64>,
    center: Option<[f64; 3]>,
    a: Option<f64>,
    b: Option<f64>,
    points: Option<Vec<[f64; 2]>>,
    h: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    p: Option<f64>,
    p_list: Option<Vec<f64>>,
    tol: Option<f64>,
    tol_fix: Option<f64>,
    tol_lin: Option<f64>,
    max_outer: Option<usize>,
    cg_max_iter: Option<usize>,
    omega_sublinear: Option<f64>,
    omega_superlinear: Option<f64>,
    continuation_step: Option<f64>,
    eigen_tol: Option<f64>,
    experimental: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawVerify {
    exclusion_margin: Option<f64>,
    delta: Option<f64>,
    level_fractions: Option<Vec<f64>>,
    epsilon_def: Option<f64>,
    fit_order: Option<FitOrder>,
    seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    domain: RawDomain,
    #[serde(default)]
    solver: RawSolver,
    #[serde(default)]
    verify: RawVerify,
    #[serde(default)]
    output: RawOutput,
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn require(name: &str, v: Option<f64>, kind: &str) -> Result<f64> {
    v.ok_or_else(|| config_err(format!("[domain] {name} is required for kind = \"{kind}\"")))
}

fn reject_extra(kind: &str, keys: &[(&str, bool)]) -> Result<()> {
    match keys.iter().find(|(_, present)| *present) {
        Some((k, _)) => Err(config_err(format!("[domain] {k} does not apply to kind = \"{kind}\""))),
        None => Ok(()),
    }
}

fn domain_spec(d: &RawDomain) -> Result<DomainSpec> {
    match d.kind {
        DomainKind::Ball => {
            reject_extra("ball", &[("a", d.a.is_some()), ("b", d.b.is_some()), ("points", d.points.is_some())])?;
            let radius = require("R", d.radius, "ball")?;
            let center = match d.center {
                Some(c) => {
                    let n = (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt();
                    if !(n > 0.0) || !n.is_finite() {
                        return Err(config_err("[domain] center must be a non-zero vector"));
                    }
                    SpherePoint::from_vector(c)
                }
                None => SpherePoint::SOUTH_POLE,
            };
            Ok(DomainSpec::GeodesicBall { center, radius })
        }
        DomainKind::Ellipse => {
            reject_extra(
                "ellipse",
                &[("R", d.radius.is_some()), ("center", d.center.is_some()), ("points", d.points.is_some())],
            )?;
            Ok(DomainSpec::ellipse(require("a", d.a, "ellipse")?, require("b", d.b, "ellipse")?))
        }
        DomainKind::Curve => {
            reject_extra(
                "curve",
                &[("R", d.radius.is_some()), ("center", d.center.is_some()), ("a", d.a.is_some()), ("b", d.b.is_some())],
            )?;
            let pts = d.points.as_ref().ok_or_else(|| config_err("[domain] points is required for kind = \"curve\""))?;
            Ok(DomainSpec::PlanarConvexCurve { samples: pts.iter().map(|p| PlanarPoint::new(p[0], p[1])).collect() })
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(config_err(format!("{name} must be positive, got {v}")))
    }
}

fn check_p(name: &str, p: f64, experimental: bool) -> Result<()> {
    if !(p >= 0.0) || !p.is_finite() {
        return Err(config_err(format!("{name} must be a finite value >= 0, got {p}")));
    }
    if p > CERTIFIED_MAX_P && !experimental {
        return Err(config_err(format!("{name} = {p} exceeds {CERTIFIED_MAX_P}; pass --experimental-p")));
    }
    Ok(())
}

impl RunConfig {
    /// Checks every range constraint; called after command-line overrides.
    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0 && self.h <= MAX_H) {
            return Err(config_err(format!("h must lie in (0, {MAX_H}], got {}", self.h)));
        }
        let s = &self.solver;
        for (name, v) in [
            ("[solver] tol", s.tol),
            ("[solver] tol_fix", s.tol_fix),
            ("[solver] tol_lin", s.cg_tol),
            ("[solver] eigen_tol", s.eigen_tol),
            ("[solver] continuation_step", s.continuation_step),
            ("[solver] omega_sublinear", s.omega_sublinear),
            ("[solver] omega_superlinear", s.omega_superlinear),
            ("[verify] epsilon_def", self.verify.definiteness_rtol),
        ] {
            positive(name, v)?;
        }
        if s.omega_sublinear > 1.0 || s.omega_superlinear > 1.0 {
            return Err(config_err("damping factors must not exceed 1"));
        }
        if s.max_outer == 0 || s.cg_max_iter == 0 {
            return Err(config_err("iteration limits must be positive"));
        }
        if let Some(p) = self.p {
            check_p("p", p, s.experimental)?;
        }
        if self.p_list.is_empty() {
            return Err(config_err("[solver] p_list must not be empty"));
        }
        for &p in &self.p_list {
            check_p("p_list entry", p, s.experimental)?;
        }
        if let Some(m) = self.verify.exclusion_margin {
            if !(m >= 2.0 * self.h) {
                return Err(config_err(format!("[verify] exclusion_margin {m} is below 2h = {}", 2.0 * self.h)));
            }
        }
        if let Some(d) = self.verify.delta {
            positive("[verify] delta", d)?;
        }
        if self.verify.level_fractions.is_empty() || self.verify.level_fractions.iter().any(|&f| !(f > 0.0 && f < 1.0)) {
            return Err(config_err("[verify] level_fractions must be a non-empty list of values in (0, 1)"));
        }
        Ok(())
    }
}

/// Parses the sectioned TOML configuration, filling defaults and validating ranges.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let config = parse_unvalidated(text)?;
    config.validate()?;
    Ok(config)
}

/// Parsing without the range checks, for callers that apply overrides first.
pub(crate) fn parse_unvalidated(text: &str) -> Result<RunConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| config_err(e.to_string().trim_end().to_owned()))?;
    let domain = domain_spec(&raw.domain)?;
    let rs = raw.solver;
    let mut solver = SolverSettings::default();
    macro_rules! set {
        ($dst:expr, $src:expr) => {
            if let Some(v) = $src {
                $dst = v;
            }
        };
    }
    set!(solver.tol, rs.tol);
    set!(solver.tol_fix, rs.tol_fix);
    set!(solver.cg_tol, rs.tol_lin);
    set!(solver.max_outer, rs.max_outer);
    set!(solver.cg_max_iter, rs.cg_max_iter);
    set!(solver.omega_sublinear, rs.omega_sublinear);
    set!(solver.omega_superlinear, rs.omega_superlinear);
    set!(solver.continuation_step, rs.continuation_step);
    set!(solver.eigen_tol, rs.eigen_tol);
    set!(solver.experimental, rs.experimental);
    let rv = raw.verify;
    let mut verify = VerifyOptions { exclusion_margin: rv.exclusion_margin, delta: rv.delta, ..VerifyOptions::default() };
    set!(verify.level_fractions, rv.level_fractions);
    set!(verify.fit_order, rv.fit_order);
    set!(verify.definiteness_rtol, rv.epsilon_def);
    Ok(RunConfig {
        domain,
        h: raw.domain.h.unwrap_or(DEFAULT_H),
        p: rs.p,
        p_list: rs.p_list.unwrap_or_else(|| DEFAULT_P_LIST.to_vec()),
        solver,
        verify,
        seed: rv.seed.unwrap_or(DEFAULT_SEED),
        output_dir: raw.output.dir.unwrap_or_else(|| PathBuf::from("out")),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[domain]\nkind = \"ball\"\nR = 0.7853981633974483\nh = 0.05\n";

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.domain, DomainSpec::ball(std::f64::consts::FRAC_PI_4));
        assert_eq!(c.h, 0.05);
        assert_eq!(c.solver, SolverSettings::default());
        assert_eq!(c.verify, VerifyOptions::default());
        assert_eq!(c.p_list, DEFAULT_P_LIST);
        assert_eq!(c.output_dir, PathBuf::from("out"));
    }

    #[test]
    fn full_config() {
        let text = r#"
[domain]
kind = "ellipse"
a = 0.7853981633974483
b = 0.5235987755982988
h = 0.03

[solver]
p = 0.5
tol_fix = 1e-9
tol_lin = 1e-11
max_outer = 300

[verify]
exclusion_margin = 0.1
delta = 0.15
level_fractions = [0.2, 0.8]
epsilon_def = 1e-7
fit_order = "quadratic"
seed = 42

[output]
dir = "results"
"#;
        let c = parse_config(text).unwrap();
        assert_eq!(c.p, Some(0.5));
        assert_eq!(c.solver.tol_fix, 1e-9);
        assert_eq!(c.solver.cg_tol, 1e-11);
        assert_eq!(c.solver.max_outer, 300);
        assert_eq!(c.verify.level_fractions, vec![0.2, 0.8]);
        assert_eq!(c.verify.fit_order, FitOrder::Quadratic);
        assert_eq!(c.verify.definiteness_rtol, 1e-7);
        assert_eq!(c.seed, 42);
        assert_eq!(c.output_dir, PathBuf::from("results"));
    }

    #[test]
    fn rejects_bad_input() {
        let neg = format!("{MINIMAL}[solver]\np = -0.5\n");
        assert!(matches!(parse_config(&neg), Err(Error::Config(m)) if m.contains("p must be")));
        let dup = format!("{MINIMAL}h = 0.02\n");
        let Err(Error::Config(m)) = parse_config(&dup) else { panic!("duplicate accepted") };
        assert!(m.contains("duplicate key") && m.contains('h'), "{m}");
        let unknown = format!("{MINIMAL}[verify]\nbogus = 1\n");
        let Err(Error::Config(m)) = parse_config(&unknown) else { panic!("unknown key accepted") };
        assert!(m.contains("bogus") && m.contains("line"), "{m}");
        let big_h = MINIMAL.replace("h = 0.05", "h = 0.5");
        assert!(matches!(parse_config(&big_h), Err(Error::Config(_))));
        let wrong_key = MINIMAL.replace("R = ", "a = 1.0\nR = ");
        assert!(matches!(parse_config(&wrong_key), Err(Error::Config(m)) if m.contains("does not apply")));
        let uncertified = format!("{MINIMAL}[solver]\np = 4.0\n");
        assert!(parse_config(&uncertified).is_err());
        assert!(parse_config(&format!("{MINIMAL}[solver]\np = 4.0\nexperimental = true\n")).is_ok());
        assert!(matches!(parse_config("[domain]\nkind = \"ball\"\n"), Err(Error::Config(m)) if m.contains("R is required")));
    }

    #[test]
    fn parsing_is_deterministic() {
        assert_eq!(parse_config(MINIMAL).unwrap(), parse_config(MINIMAL).unwrap());
    }
}
