//! Command dispatch for the `fracdelay` binary.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::certify::contraction_certificate;
use crate::config::Problem;
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::oracle::solve_reference_on;
use crate::q_lattice::QTable;
use crate::solver::{default_grid, estimate_lipschitz, solve_linear_on, solve_semilinear_with, SolverConfig};
use crate::system::DelaySystem;
use crate::trajectory::Trajectory;

/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "FRACDELAY_THREADS";

#[derive(Debug, Parser)]
#[command(name = "fracdelay", version, about = "Neutral fractional multi-delay systems: explicit solutions and certificates")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    ClosedForm,
    Picard,
    Oracle,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve on the default grid and write a CSV trajectory.
    Solve {
        config: PathBuf,
        /// Defaults to closed-form for linear systems and picard otherwise.
        #[arg(long, value_enum)]
        method: Option<MethodArg>,
        /// Output CSV; a `.meta` sidecar is written next to it. Stdout if absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Named coefficient variant from `[variants.*]`.
        #[arg(long)]
        variant: Option<String>,
    },
    /// Print the contraction / Ulam–Hyers certificate.
    Certify {
        config: PathBuf,
        #[arg(long)]
        variant: Option<String>,
        /// Overrides `forcing.lipschitz`.
        #[arg(long)]
        lipschitz: Option<f64>,
    },
    /// Error of the oracle against a reference method at several resolutions.
    Compare {
        config: PathBuf,
        /// Oracle nodes per unit of μ, e.g. `256,512,1024`.
        #[arg(long, value_delimiter = ',', required = true)]
        resolutions: Vec<usize>,
        /// Method compared with the representation-based reference.
        #[arg(long, value_enum, default_value = "oracle")]
        against: MethodArg,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        variant: Option<String>,
    },
    /// Dump the coefficient lattice as CSV.
    Table {
        config: PathBuf,
        /// Highest level to tabulate.
        #[arg(long, default_value_t = 4)]
        levels: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        variant: Option<String>,
    },
}

/// Exit status of a command.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok = 0,
    ConfigError = 1,
    NotConverged = 2,
}

/// Runs a parsed command, reporting errors on stderr.
pub fn run(cli: Cli) -> Status {
    match dispatch(cli.command) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_convergence() {
                Status::NotConverged
            } else {
                Status::ConfigError
            }
        }
    }
}

fn output(out: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn meta_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".meta");
    PathBuf::from(s)
}

fn reference_method(sys: &DelaySystem) -> MethodArg {
    if sys.is_linear() {
        MethodArg::ClosedForm
    } else {
        MethodArg::Picard
    }
}

fn solve_with(problem: &Problem, method: MethodArg, grid: Option<TimeGrid>) -> Result<Trajectory> {
    let sys = &problem.system;
    match method {
        MethodArg::ClosedForm => {
            let grid = match grid {
                Some(g) => g,
                None => default_grid(sys, &problem.solver)?,
            };
            solve_linear_on(sys, &problem.solver, grid)
        }
        MethodArg::Picard => {
            let mut cfg: SolverConfig = problem.solver.clone();
            if let Some(g) = &grid {
                if let Some(per_unit) = per_unit_of(sys, g) {
                    cfg.grid_per_unit = per_unit;
                }
            }
            let report = solve_semilinear_with(sys, &cfg, &problem.certificate)?;
            if let Some(w) = &report.warning {
                eprintln!("warning: {w}");
            }
            Ok(report.trajectory)
        }
        MethodArg::Oracle => {
            let grid = match grid {
                Some(g) => g,
                None => TimeGrid::build(&sys.mu, &sys.coeffs.delays, sys.horizon, problem.oracle.steps_per_unit)?,
            };
            solve_reference_on(sys, &problem.oracle, grid)
        }
    }
}

// Picard builds its own grid; recover the density from a supplied one.
fn per_unit_of(sys: &DelaySystem, g: &TimeGrid) -> Option<usize> {
    let span = sys.mu.eval(sys.horizon) - sys.mu.eval(0.0);
    let steps = g.len() - g.zero_index() - 1;
    (span > 0.0).then(|| ((steps as f64) / span).round().max(1.0) as usize)
}

fn dispatch(cmd: Command) -> Result<Status> {
    match cmd {
        Command::Solve { config, method, out, variant } => {
            let problem = Problem::load(&config, variant.as_deref())?;
            let method = method.unwrap_or_else(|| reference_method(&problem.system));
            if method == MethodArg::ClosedForm && !problem.system.is_linear() {
                return Err(Error::config("forcing.f", "closed-form needs a forcing independent of w1..wn; use --method picard"));
            }
            let traj = solve_with(&problem, method, None)?;
            let mut w = output(out.as_deref())?;
            traj.write_csv(&mut w)?;
            w.flush()?;
            if let Some(p) = &out {
                let mut m = BufWriter::new(File::create(meta_path(p))?);
                writeln!(m, "config = {}", config.display())?;
                if let Some(v) = &problem.variant {
                    writeln!(m, "variant = {v}")?;
                }
                traj.write_meta(&mut m)?;
                m.flush()?;
            }
            if !traj.all_converged() {
                eprintln!("warning: series truncation did not converge at every node");
                return Ok(Status::NotConverged);
            }
            Ok(Status::Ok)
        }
        Command::Certify { config, variant, lipschitz } => {
            let problem = Problem::load(&config, variant.as_deref())?;
            let sys = &problem.system;
            let (l, estimated) = match lipschitz.or(sys.lipschitz) {
                Some(l) => (l, false),
                None if sys.is_linear() => (0.0, false),
                None => {
                    let frozen = sys.with_forcing(frozen_forcing(sys)?);
                    let guess = solve_linear_on(&frozen, &problem.solver, default_grid(&frozen, &problem.solver)?)?;
                    (estimate_lipschitz(sys, &guess)?, true)
                }
            };
            if !(l >= 0.0) || !l.is_finite() {
                return Err(Error::config("forcing.lipschitz", format!("{l} is not a nonnegative number")));
            }
            let cert = contraction_certificate(sys, l, &problem.certificate)?;
            println!("{cert}");
            println!("lipschitz_estimated: {estimated}");
            if !cert.unique {
                eprintln!("warning: rho = {:.6} >= 1; uniqueness is not certified", cert.rho);
            }
            Ok(Status::Ok)
        }
        Command::Compare { config, resolutions, against, out, variant } => {
            let problem = Problem::load(&config, variant.as_deref())?;
            let sys = &problem.system;
            if resolutions.is_empty() || resolutions.contains(&0) {
                return Err(Error::config("--resolutions", "resolutions must be positive"));
            }
            let reference_kind = reference_method(sys);
            let reference = solve_with(&problem, reference_kind, None)?;
            let base = problem.solver.grid_per_unit;
            let mut w = output(out.as_deref())?;
            writeln!(w, "resolution,points,sup_error,rel_error")?;
            for &res in &resolutions {
                let factor = res.div_ceil(base).max(1);
                let grid = reference.grid.refined(&sys.mu, &sys.coeffs.delays, factor)?;
                let other = if against == reference_kind {
                    reference.clone()
                } else {
                    let g = if against == MethodArg::Picard { reference.grid.clone() } else { grid };
                    solve_with(&problem, against, Some(g))?
                };
                let err = reference.sup_diff_on_common_nodes(&other)?;
                let rel = err / (1.0 + reference.sup_norm());
                writeln!(w, "{res},{},{err:.16e},{rel:.16e}", other.grid.len())?;
            }
            w.flush()?;
            Ok(Status::Ok)
        }
        Command::Table { config, levels, out, variant } => {
            let problem = Problem::load(&config, variant.as_deref())?;
            let sys = &problem.system;
            let table = QTable::build_with(&sys.coeffs, levels, sys.horizon, problem.solver.boundary)?;
            let mut w = output(out.as_deref())?;
            table.write_csv(&mut w)?;
            w.flush()?;
            Ok(Status::Ok)
        }
    }
}

// ℸ(t, φ(0)): a state-free forcing for the initial guess of the Lipschitz probe.
fn frozen_forcing(sys: &DelaySystem) -> Result<Vec<crate::expr::Expr>> {
    let phi0 = sys.phi(0.0)?;
    Ok(sys.forcing.iter().map(|e| e.substitute_state(phi0.as_slice())).collect())
}
