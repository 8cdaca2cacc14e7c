use std::path::PathBuf;

use clap::{Parser, Subcommand};

use super::config::parse_unvalidated;
use super::run::{exit_code, run, Command, EXIT_CONFIG, EXIT_OK};
use crate::error::Error;

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "LANE_EMDEN_THREADS";

#[derive(Debug, Parser)]
#[command(name = "lane-emden", version, about = "Lane-Emden problems on convex spherical domains")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Cmd,
    /// TOML configuration with [domain], [solver], [verify] and [output] sections.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory, overriding [output] dir.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Exponent, overriding [solver] p.
    #[arg(long, global = true, value_name = "VALUE", allow_negative_numbers = true)]
    pub p: Option<f64>,
    /// Target edge length, overriding [domain] h.
    #[arg(long, global = true, value_name = "VALUE")]
    pub h: Option<f64>,
    /// Suppress progress messages.
    #[arg(long, global = true)]
    pub quiet: bool,
    /// Allow exponents above 3 (results are marked uncertified).
    #[arg(long = "experimental-p", global = true)]
    pub experimental_p: bool,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Cmd {
    /// Triangulate the domain.
    Mesh,
    /// Solve for one exponent.
    Solve,
    /// First Dirichlet eigenpair.
    Eigen,
    /// Solve and run every geometric check.
    Verify,
    /// Solve over p_list and report the distance to the eigenfunction.
    Sweep,
    /// Compare against radial solutions on a geodesic ball.
    Oracle,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Mesh => Command::Mesh,
            Cmd::Solve => Command::Solve,
            Cmd::Eigen => Command::Eigen,
            Cmd::Verify => Command::Verify,
            Cmd::Sweep => Command::Sweep,
            Cmd::Oracle => Command::Oracle,
        }
    }
}

fn configure_threads() -> Result<(), Error> {
    let Ok(raw) = std::env::var(THREADS_ENV) else { return Ok(()) };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Config(format!("{THREADS_ENV} must be a positive integer, got {raw:?}")))?;
    #[cfg(feature = "parallel")]
    {
        // a second initialization in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    #[cfg(not(feature = "parallel"))]
    let _ = n;
    Ok(())
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let quiet = cli.quiet;
    let result = (|| {
        configure_threads()?;
        let path = cli.config.as_ref().ok_or_else(|| Error::Config("--config PATH is required".into()))?;
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut config = parse_unvalidated(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        if let Some(p) = cli.p {
            config.p = Some(p);
        }
        if let Some(h) = cli.h {
            config.h = h;
        }
        if let Some(out) = &cli.out {
            config.output_dir = out.clone();
        }
        config.solver.experimental |= cli.experimental_p;
        config.validate().map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        let log = |msg: &str| {
            if !quiet {
                eprintln!("[{}] {msg}", Command::from(cli.command).name());
            }
        };
        run(cli.command.into(), &config, &log)
    })();
    let code = exit_code(&result);
    if let Err(e) = &result {
        eprintln!("error: {e}");
    }
    code
}
