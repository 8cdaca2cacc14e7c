use std::fs::{self, OpenOptions};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::config::RunConfig;
use crate::domain::{generate_mesh, planarize, write_mesh, DomainSpec, TriangleMesh};
use crate::error::{Error, Result};
use crate::field::{Quantity, ScalarField};
use crate::geometry::{check_uniform_convexity, ConvexityCheck, ConvexityVerdict, PlanarPoint};
use crate::oracle::{compare, radial_shoot, torsion_closed_form, Comparison};
use crate::solver::{field_csv, SolveReport, Solver, SweepEntry, EIGEN_BAND};
use crate::verify::{level_csv, power_transform, verify, SCHEMA_VERSION};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_VERDICT: i32 = 2;
pub const EXIT_CONFIG: i32 = 64;

/// Boundary samples used for the convexity gate and planarization.
const BOUNDARY_SAMPLES: usize = 512;
const LOCK_NAME: &str = ".lane-emden.lock";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Mesh,
    Solve,
    Eigen,
    Verify,
    Sweep,
    Oracle,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Mesh => "mesh",
            Command::Solve => "solve",
            Command::Eigen => "eigen",
            Command::Verify => "verify",
            Command::Sweep => "sweep",
            Command::Oracle => "oracle",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Passed,
    Failed,
}

/// Exit code for the result of [`run`].
pub fn exit_code(result: &Result<Verdict>) -> i32 {
    match result {
        Ok(Verdict::Passed) => EXIT_OK,
        Ok(Verdict::Failed) => EXIT_VERDICT,
        Err(Error::Config(_)) => EXIT_CONFIG,
        Err(_) => EXIT_ERROR,
    }
}

/// Exclusive claim on an output directory, released on drop.
struct OutputLock(PathBuf);

impl OutputLock {
    fn acquire(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        let path = dir.join(LOCK_NAME);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(OutputLock(path)),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                Err(Error::Io(format!("{} is locked by another run (remove {} if stale)", dir.display(), path.display())))
            }
            Err(e) => Err(e.into()),
        }
    }
}

impl Drop for OutputLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.0);
    }
}

#[derive(Serialize)]
struct Timing {
    phase: String,
    seconds: f64,
}

struct Ctx<'a> {
    config: &'a RunConfig,
    dir: &'a Path,
    log: &'a dyn Fn(&str),
    timings: Vec<Timing>,
}

impl Ctx<'_> {
    fn timed<T>(&mut self, phase: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        (self.log)(&format!("{phase} ..."));
        let t = Instant::now();
        let out = f();
        self.timings.push(Timing { phase: phase.to_owned(), seconds: t.elapsed().as_secs_f64() });
        out
    }

    fn write(&self, name: &str, contents: &str) -> Result<()> {
        fs::write(self.dir.join(name), contents)?;
        Ok(())
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
        s.push('\n');
        self.write(name, &s)
    }

    fn p(&self) -> Result<f64> {
        self.config.p.ok_or_else(|| Error::Config("no exponent: set [solver] p or pass --p".into()))
    }

    fn mesh(&mut self) -> Result<(TriangleMesh, ConvexityCheck)> {
        let domain = self.config.domain.clone();
        let h = self.config.h;
        self.timed("mesh", || {
            let convexity = check_uniform_convexity(&domain, BOUNDARY_SAMPLES)?;
            if convexity.verdict == ConvexityVerdict::NotConvex {
                return Err(Error::NotConvex { kappa_min: convexity.kappa_min });
            }
            let mesh = generate_mesh(&planarize(&domain, BOUNDARY_SAMPLES)?, h)?;
            Ok((mesh, convexity))
        })
    }
}

#[derive(Serialize)]
struct MeshReport {
    schema_version: u32,
    vertices: usize,
    triangles: usize,
    boundary_vertices: usize,
    h: f64,
    min_angle_deg: f64,
    max_edge: f64,
    convexity: ConvexityCheck,
}

#[derive(Serialize)]
struct SolveOutput<'a> {
    schema_version: u32,
    solve: &'a SolveReport,
}

#[derive(Serialize)]
struct SelfChecks {
    seed: u64,
    /// Sup distance between solutions from the default and a random start (`0 < p < 1`).
    uniqueness_gap: Option<f64>,
}

#[derive(Serialize)]
struct SweepReport<'a> {
    schema_version: u32,
    lambda1: f64,
    entries: &'a [SweepEntry],
    /// `D(p)` shrinks as `p` approaches 1 from below.
    monotone_below: bool,
    monotone_above: bool,
}

#[derive(Serialize)]
struct OracleEntry {
    p: f64,
    fem_max: f64,
    radial_max: f64,
    fem_lambda: Option<f64>,
    radial_lambda: Option<f64>,
    comparison: Comparison,
}

#[derive(Serialize)]
struct OracleReport {
    schema_version: u32,
    radius: f64,
    entries: Vec<OracleEntry>,
}

/// `true` when `D` decreases as `p` moves towards 1 on each side.
fn monotone_towards_one(entries: &[SweepEntry], below: bool) -> bool {
    let mut side: Vec<(f64, f64)> = entries
        .iter()
        .filter(|e| if below { e.p < 1.0 - EIGEN_BAND } else { e.p > 1.0 + EIGEN_BAND })
        .filter_map(|e| e.diagnostic.map(|d| ((e.p - 1.0).abs(), d)))
        .collect();
    side.sort_by(|a, b| a.0.total_cmp(&b.0));
    side.windows(2).all(|w| w[0].1 < w[1].1)
}

fn tag(p: f64) -> String {
    format!("p{p}")
}

/// Executes one subcommand, writing artifacts into the configured output directory.
///
/// `report.json` and the CSV files depend only on the configuration; wall
/// times go to `timings.json`.
pub fn run(command: Command, config: &RunConfig, log: &dyn Fn(&str)) -> Result<Verdict> {
    config.validate()?;
    if matches!(command, Command::Solve | Command::Verify) && config.p.is_none() {
        return Err(Error::Config("no exponent: set [solver] p or pass --p".into()));
    }
    let dir = config.output_dir.as_path();
    let _lock = OutputLock::acquire(dir)?;
    let mut ctx = Ctx { config, dir, log, timings: Vec::new() };
    let verdict = dispatch(command, &mut ctx)?;
    ctx.write_json("timings.json", &ctx.timings)?;
    Ok(verdict)
}

fn dispatch(command: Command, ctx: &mut Ctx) -> Result<Verdict> {
    let config = ctx.config;
    let (mesh, convexity) = ctx.mesh()?;
    ctx.write("mesh.txt", &write_mesh(&mesh))?;
    if command == Command::Mesh {
        let q = mesh.quality();
        ctx.write_json(
            "report.json",
            &MeshReport {
                schema_version: SCHEMA_VERSION,
                vertices: mesh.n_vertices(),
                triangles: mesh.triangles.len(),
                boundary_vertices: mesh.boundary_vertices.len(),
                h: mesh.h,
                min_angle_deg: q.min_angle_deg,
                max_edge: q.max_edge,
                convexity,
            },
        )?;
        return Ok(Verdict::Passed);
    }
    let solver = ctx.timed("assemble", || Ok(Solver::new(&mesh, config.solver.clone())))?;
    match command {
        Command::Mesh => unreachable!(),
        Command::Solve => {
            let p = ctx.p()?;
            let (u, report) = ctx.timed("solve", || solver.solve(p))?;
            ctx.write("field_u.csv", &field_csv(&mesh, &u)?)?;
            ctx.write_json("report.json", &SolveOutput { schema_version: SCHEMA_VERSION, solve: &report })?;
            Ok(Verdict::Passed)
        }
        Command::Eigen => {
            let e = ctx.timed("eigen", || solver.solve_eigen())?;
            ctx.write("field_u1.csv", &field_csv(&mesh, &e.field)?)?;
            ctx.write_json("report.json", &SolveOutput { schema_version: SCHEMA_VERSION, solve: &e.report })?;
            Ok(Verdict::Passed)
        }
        Command::Verify => {
            let p = ctx.p()?;
            let (u, solve_report) = ctx.timed("solve", || solver.solve(p))?;
            let report = ctx.timed("verify", || verify(&mesh, &u, p, solve_report.lambda, &config.verify))?;
            let gap = if p > 0.0 && p < 1.0 - EIGEN_BAND {
                ctx.timed("uniqueness", || {
                    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
                    let init = ScalarField::new(
                        (0..mesh.n_vertices()).map(|i| if mesh.is_boundary(i) { 0.0 } else { rng.gen_range(0.1..1.0) }).collect(),
                        Quantity::U,
                        p,
                    );
                    let (w, _) = solver.solve_sublinear(p, Some(&init))?;
                    Ok(Some(w.sup_distance(&u)))
                })?
            } else {
                None
            };
            ctx.write("field_u.csv", &field_csv(&mesh, &u)?)?;
            ctx.write("field_v.csv", &field_csv(&mesh, &power_transform(&mesh, &u, p)?)?)?;
            ctx.write("levels.csv", &level_csv(&report.level_set_results))?;
            ctx.write_json("solve.json", &SolveOutput { schema_version: SCHEMA_VERSION, solve: &solve_report })?;
            ctx.write_json("checks.json", &SelfChecks { seed: config.seed, uniqueness_gap: gap })?;
            ctx.write_json("report.json", &report)?;
            (ctx.log)(&format!("definiteness {:?}, passed = {}", report.definiteness, report.passed));
            Ok(if report.passed { Verdict::Passed } else { Verdict::Failed })
        }
        Command::Sweep => {
            let sweep = ctx.timed("sweep", || solver.sweep_p(&config.p_list))?;
            for (e, f) in sweep.entries.iter().zip(&sweep.fields) {
                if let Some(f) = f {
                    ctx.write(&format!("field_u_{}.csv", tag(e.p)), &field_csv(&mesh, f)?)?;
                }
            }
            let report = SweepReport {
                schema_version: SCHEMA_VERSION,
                lambda1: sweep.lambda1,
                entries: &sweep.entries,
                monotone_below: monotone_towards_one(&sweep.entries, true),
                monotone_above: monotone_towards_one(&sweep.entries, false),
            };
            ctx.write_json("report.json", &report)?;
            if let Some(e) = sweep.entries.iter().find(|e| e.error.is_some()) {
                return Err(Error::Io(format!("sweep failed at p = {}: {}", e.p, e.error.as_deref().unwrap_or(""))));
            }
            Ok(if report.monotone_below && report.monotone_above { Verdict::Passed } else { Verdict::Failed })
        }
        Command::Oracle => {
            let DomainSpec::GeodesicBall { radius, .. } = config.domain else {
                return Err(Error::DomainMismatch("the radial oracle needs kind = \"ball\"".into()));
            };
            let ps = config.p.map_or_else(|| config.p_list.clone(), |p| vec![p]);
            let mut entries = Vec::new();
            for p in ps {
                let radial = ctx.timed(&format!("radial {}", tag(p)), || {
                    if p == 0.0 {
                        torsion_closed_form(radius)
                    } else {
                        radial_shoot(radius, p)
                    }
                })?;
                let (u, report) = ctx.timed(&format!("solve {}", tag(p)), || solver.solve(p))?;
                let comparison = compare(&mesh, &u, &radial, PlanarPoint::new(0.0, 0.0))?;
                ctx.write(&format!("radial_{}.csv", tag(p)), &radial.to_csv())?;
                ctx.write(&format!("field_u_{}.csv", tag(p)), &field_csv(&mesh, &u)?)?;
                entries.push(OracleEntry {
                    p,
                    fem_max: u.max(),
                    radial_max: radial.max_value(),
                    fem_lambda: report.lambda,
                    radial_lambda: radial.lambda,
                    comparison,
                });
            }
            ctx.write_json("report.json", &OracleReport { schema_version: SCHEMA_VERSION, radius, entries })?;
            Ok(Verdict::Passed)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cli::config::parse_config;

    fn config(dir: &Path, extra: &str) -> RunConfig {
        let text = format!(
            "[domain]\nkind = \"ball\"\nR = 0.7853981633974483\nh = 0.08\n{extra}\n[output]\ndir = \"{}\"\n",
            dir.display()
        );
        parse_config(&text).unwrap()
    }

    #[test]
    fn solve_writes_report_and_releases_lock() {
        let tmp = tempfile::tempdir().unwrap();
        let c = config(tmp.path(), "[solver]\np = 2.0");
        assert_eq!(run(Command::Solve, &c, &|_| {}).unwrap(), Verdict::Passed);
        let report: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(tmp.path().join("report.json")).unwrap()).unwrap();
        assert_eq!(report["schema_version"], 1);
        assert!(report["solve"]["max_value"].as_f64().unwrap() > 0.0);
        assert!(tmp.path().join("field_u.csv").exists() && tmp.path().join("timings.json").exists());
        assert!(!tmp.path().join(LOCK_NAME).exists());
    }

    #[test]
    fn locked_directory_is_refused() {
        let tmp = tempfile::tempdir().unwrap();
        let c = config(tmp.path(), "");
        let _held = OutputLock::acquire(tmp.path()).unwrap();
        let r = run(Command::Mesh, &c, &|_| {});
        assert!(matches!(&r, Err(Error::Io(m)) if m.contains("locked")));
        assert_eq!(exit_code(&r), EXIT_ERROR);
    }

    #[test]
    fn missing_exponent_is_a_config_error() {
        let tmp = tempfile::tempdir().unwrap();
        let r = run(Command::Solve, &config(tmp.path(), ""), &|_| {});
        assert_eq!(exit_code(&r), EXIT_CONFIG);
    }

    #[test]
    fn monotonicity_of_diagnostics() {
        let e = |p: f64, d: f64| SweepEntry { p, report: None, diagnostic: Some(d), error: None };
        let good = [e(0.9, 0.1), e(0.99, 0.01), e(1.01, 0.01), e(1.1, 0.1)];
        assert!(monotone_towards_one(&good, true) && monotone_towards_one(&good, false));
        let bad = [e(0.9, 0.01), e(0.99, 0.1)];
        assert!(!monotone_towards_one(&bad, true));
    }
}
