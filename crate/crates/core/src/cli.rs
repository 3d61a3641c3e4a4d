//! Command-line front end: `flock <command> --config <path> [--out <dir>]`.
//!
//! Exit status is 0 on success, 1 when the numerics fail and 2 for invalid
//! input or filesystem errors.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::config::{parse_config_with, Command, RunConfig, ScenarioSpec};
use crate::convergence::{cauchy_table, run_family};
use crate::diagnostics::diagnose;
use crate::error::{Error, Result};
use crate::integrator::solve_piecewise;
use crate::io;
use crate::kernels::WeightKernel;
use crate::twobody::{
    bounded_weight_floor_check, classify, critical_velocity, level_time_bound_check, stick_time,
    TwoBodyOutcome, TwoBodyProblem,
};

#[derive(Debug, Parser)]
#[command(name = "flock", version, about = "Cucker-Smale flocking with singular weights")]
pub struct Cli {
    #[command(subcommand)]
    pub command: CliCommand,
}

#[derive(Debug, Clone, clap::Args)]
pub struct CommonArgs {
    /// Run configuration file.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; overrides `[run] output`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum CliCommand {
    /// Integrate the scenario and write the trajectory and events.
    Simulate(CommonArgs),
    /// Closed-form two-body analysis.
    Twobody(CommonArgs),
    /// Solve the regularized family for each n in `n_list`.
    Converge(CommonArgs),
    /// Integrate and check the structural properties.
    Diagnose(CommonArgs),
}

impl CliCommand {
    fn split(&self) -> (Command, &CommonArgs) {
        match self {
            CliCommand::Simulate(a) => (Command::Simulate, a),
            CliCommand::Twobody(a) => (Command::Twobody, a),
            CliCommand::Converge(a) => (Command::Converge, a),
            CliCommand::Diagnose(a) => (Command::Diagnose, a),
        }
    }
}

pub const DEFAULT_OUT: &str = "out";

pub fn exit_code(err: &Error) -> i32 {
    if err.is_numerical() {
        1
    } else {
        2
    }
}

pub fn load_config(path: &Path, command: Command) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config_with(&text, Some(command))
}

fn simulate(cfg: &RunConfig, dir: &Path, with_diagnostics: bool) -> Result<()> {
    let sys = cfg.build_system()?;
    let traj = solve_piecewise(&sys, &cfg.solver)?;
    io::serialize_trajectory(&traj, &cfg.to_text(), dir)?;
    if with_diagnostics {
        let report = diagnose(&traj)?;
        io::write_file(&dir.join(io::DIAGNOSTICS_FILE), &io::diagnostics_text(&report, &traj))?;
        io::write_file(&dir.join(io::R_SERIES_FILE), &io::r_series_csv(&report.r_series))?;
    }
    Ok(())
}

fn converge(cfg: &RunConfig, dir: &Path) -> Result<()> {
    let sys = cfg.build_system()?;
    let n_list = cfg
        .n_list
        .as_deref()
        .ok_or_else(|| Error::validation("n_list", "required for converge"))?;
    let family = run_family(&sys, n_list, &cfg.solver)?;
    let report = cauchy_table(&family, n_list)?;
    io::ensure_dir(dir)?;
    io::write_file(&dir.join(io::CONVERGENCE_FILE), &io::convergence_csv(&report))?;
    io::write_file(&dir.join(io::META_FILE), &cfg.to_text())
}

fn twobody(cfg: &RunConfig, dir: &Path) -> Result<()> {
    let ScenarioSpec::TwoBody { phi0, dphi0 } = cfg.scenario else {
        return Err(Error::validation("kind", "twobody needs a twobody scenario"));
    };
    let mut s = String::new();
    let _ = writeln!(s, "phi0 = {phi0}");
    let _ = writeln!(s, "dphi0 = {dphi0}");
    let mut levels = None;
    match cfg.kernel {
        WeightKernel::CuckerSmale { k, beta } => {
            let floor = bounded_weight_floor_check(phi0, dphi0, k, beta, cfg.solver.t_end)?;
            let _ = writeln!(s, "kernel = cucker_smale");
            let _ = writeln!(s, "floor_min_ratio = {}", floor.min_ratio);
            let _ = writeln!(s, "floor_ok = {}", floor.ok);
        }
        WeightKernel::Singular { alpha } | WeightKernel::Regularized { alpha, .. } => {
            let problem = TwoBodyProblem::new(phi0, dphi0, alpha)?;
            let outcome = classify(&problem)?;
            let _ = writeln!(s, "alpha = {alpha}");
            let _ = writeln!(s, "energy = {}", problem.energy());
            let _ = writeln!(s, "critical_velocity = {}", critical_velocity(phi0, alpha)?);
            let _ = writeln!(s, "stick_time = {}", stick_time(phi0, alpha)?);
            let _ = writeln!(s, "outcome = {}", outcome.name());
            match outcome {
                TwoBodyOutcome::StickFiniteTime { t0 } => {
                    let _ = writeln!(s, "t0 = {t0}");
                }
                TwoBodyOutcome::CollideNonstick { impact_speed, t_hit } => {
                    let _ = writeln!(s, "impact_speed = {impact_speed}");
                    let _ = writeln!(s, "t_hit = {t_hit}");
                }
                TwoBodyOutcome::NoCollision { phi_limit } => {
                    let _ = writeln!(s, "phi_limit = {phi_limit}");
                }
            }
            let records = level_time_bound_check(phi0, alpha, 20)?;
            let violations = records.iter().filter(|r| !r.ok).count();
            let _ = writeln!(s, "level_bound_violations = {violations}");
            let mut csv = String::from("n,t_n,real_gap,gap,bound,ok\n");
            for r in &records {
                let _ = writeln!(csv, "{},{},{},{},{},{}", r.n, r.t_n, r.real_gap, r.gap, r.bound, r.ok);
            }
            levels = Some(csv);
        }
    }
    io::ensure_dir(dir)?;
    io::write_file(&dir.join(io::TWOBODY_FILE), &s)?;
    if let Some(csv) = levels {
        io::write_file(&dir.join(io::LEVELS_FILE), &csv)?;
    }
    io::write_file(&dir.join(io::META_FILE), &cfg.to_text())
}

pub fn run_command(cfg: &RunConfig, dir: &Path) -> Result<()> {
    match cfg.command {
        Command::Simulate => simulate(cfg, dir, false),
        Command::Diagnose => simulate(cfg, dir, true),
        Command::Converge => converge(cfg, dir),
        Command::Twobody => twobody(cfg, dir),
    }
}

/// Parses arguments, runs, and returns the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let (command, common) = cli.command.split();
    let result = load_config(&common.config, command).and_then(|cfg| {
        let dir = common
            .out
            .clone()
            .or_else(|| cfg.output.clone())
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
        run_command(&cfg, &dir)
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("flock: {e}");
            exit_code(&e)
        }
    }
}
