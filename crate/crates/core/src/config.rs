//! Run configuration in a line-oriented `key = value` format.
//!
//! ```text
//! # critical two-body run
//! [run]
//! command = simulate
//!
//! [scenario]
//! kind = twobody
//! phi0 = 1
//! dphi0 = -4
//!
//! [kernel]
//! type = singular
//! alpha = 0.5
//!
//! [solver]
//! t_end = 1
//! ```
//!
//! Sections: `run` (command, output), `scenario` (kind = inline | random |
//! twobody, normalization, and the kind's fields), `kernel` (type = singular |
//! regularized | cucker_smale), `solver` and `converge` (n_list). Lists are
//! comma-separated. `#` starts a comment.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use crate::convergence::check_n_list;
use crate::dynamics::{Normalization, ParticleSystem};
use crate::error::{Error, Result};
use crate::integrator::SolverConfig;
use crate::kernels::WeightKernel;
use crate::scenario::{random_system, two_body_system};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Twobody,
    Converge,
    Diagnose,
}

impl Command {
    pub fn as_str(&self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Twobody => "twobody",
            Command::Converge => "converge",
            Command::Diagnose => "diagnose",
        }
    }
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "simulate" => Ok(Command::Simulate),
            "twobody" => Ok(Command::Twobody),
            "converge" => Ok(Command::Converge),
            "diagnose" => Ok(Command::Diagnose),
            other => Err(Error::validation("command", format!("unknown command `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ScenarioSpec {
    Inline {
        n: usize,
        dim: usize,
        x: Vec<f64>,
        v: Vec<f64>,
    },
    Random {
        n: usize,
        dim: usize,
        seed: u64,
        box_size: f64,
        speed: f64,
    },
    TwoBody {
        phi0: f64,
        dphi0: f64,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub output: Option<PathBuf>,
    pub scenario: ScenarioSpec,
    pub normalization: Normalization,
    pub kernel: WeightKernel,
    pub solver: SolverConfig,
    pub n_list: Option<Vec<u64>>,
}

const SECTIONS: &[(&str, &[&str])] = &[
    ("run", &["command", "output"]),
    (
        "scenario",
        &[
            "kind", "normalization", "phi0", "dphi0", "particles", "dim", "x", "v", "seed", "box",
            "speed",
        ],
    ),
    ("kernel", &["type", "alpha", "n", "k", "beta"]),
    (
        "solver",
        &[
            "rel_tol", "abs_tol", "d_stick", "v_stick", "n_reg", "max_segments", "t_end", "sample_dt",
        ],
    ),
    ("converge", &["n_list"]),
];

type Table = BTreeMap<(String, String), String>;

fn tokenize(text: &str) -> Result<Table> {
    let mut table = Table::new();
    let mut section: Option<String> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let parse_err = |msg: String| Error::Parse { line: line_no, msg };
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| parse_err(format!("malformed section header `{line}`")))?
                .trim();
            if !SECTIONS.iter().any(|(s, _)| *s == name) {
                return Err(parse_err(format!("unknown section [{name}]")));
            }
            section = Some(name.to_string());
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| parse_err(format!("expected `key = value`, got `{line}`")))?;
        let (key, value) = (key.trim(), value.trim());
        let sec = section
            .as_deref()
            .ok_or_else(|| parse_err(format!("key `{key}` outside any section")))?;
        let allowed = SECTIONS.iter().find(|(s, _)| *s == sec).map(|(_, k)| *k).unwrap_or(&[]);
        if !allowed.contains(&key) {
            return Err(parse_err(format!("unknown key `{key}` in [{sec}]")));
        }
        if value.is_empty() {
            return Err(parse_err(format!("empty value for `{key}`")));
        }
        if table
            .insert((sec.to_string(), key.to_string()), value.to_string())
            .is_some()
        {
            return Err(parse_err(format!("duplicate key `{key}` in [{sec}]")));
        }
    }
    Ok(table)
}

struct Reader<'a> {
    table: &'a Table,
}

impl Reader<'_> {
    fn raw(&self, sec: &str, key: &str) -> Option<&str> {
        self.table.get(&(sec.to_string(), key.to_string())).map(String::as_str)
    }

    fn parse<T: FromStr>(&self, sec: &str, key: &str) -> Result<Option<T>> {
        match self.raw(sec, key) {
            None => Ok(None),
            Some(s) => s
                .parse()
                .map(Some)
                .map_err(|_| Error::validation(key, format!("cannot parse `{s}`"))),
        }
    }

    fn require<T: FromStr>(&self, sec: &str, key: &str) -> Result<T> {
        self.parse(sec, key)?
            .ok_or_else(|| Error::validation(key, format!("required in [{sec}]")))
    }

    fn list<T: FromStr>(&self, sec: &str, key: &str) -> Result<Option<Vec<T>>> {
        let Some(s) = self.raw(sec, key) else {
            return Ok(None);
        };
        s.split(',')
            .map(|p| {
                let p = p.trim();
                p.parse()
                    .map_err(|_| Error::validation(key, format!("cannot parse list entry `{p}`")))
            })
            .collect::<Result<Vec<T>>>()
            .map(Some)
    }
}

fn rename_kernel_error(e: Error, key: &str) -> Error {
    match e {
        Error::InvalidKernel(msg) => Error::validation(key, msg),
        other => other,
    }
}

fn parse_kernel(r: &Reader) -> Result<WeightKernel> {
    let kind: String = r.parse("kernel", "type")?.unwrap_or_else(|| "singular".into());
    match kind.as_str() {
        "singular" => {
            let alpha: f64 = r.require("kernel", "alpha")?;
            WeightKernel::singular(alpha).map_err(|e| rename_kernel_error(e, "alpha"))
        }
        "regularized" => {
            let alpha: f64 = r.require("kernel", "alpha")?;
            let n: u64 = r.require("kernel", "n")?;
            WeightKernel::singular(alpha).map_err(|e| rename_kernel_error(e, "alpha"))?;
            WeightKernel::regularized(alpha, n).map_err(|e| rename_kernel_error(e, "n"))
        }
        "cucker_smale" => {
            let k: f64 = r.require("kernel", "k")?;
            let beta: f64 = r.require("kernel", "beta")?;
            WeightKernel::cucker_smale(k, 1.0).map_err(|e| rename_kernel_error(e, "k"))?;
            WeightKernel::cucker_smale(k, beta).map_err(|e| rename_kernel_error(e, "beta"))
        }
        other => Err(Error::validation("type", format!("unknown kernel type `{other}`"))),
    }
}

fn parse_scenario(r: &Reader) -> Result<ScenarioSpec> {
    let kind: String = r.require("scenario", "kind")?;
    let check_counts = |n: usize, dim: usize| -> Result<()> {
        if n == 0 {
            return Err(Error::validation("particles", "must be at least 1"));
        }
        if dim == 0 {
            return Err(Error::validation("dim", "must be at least 1"));
        }
        Ok(())
    };
    match kind.as_str() {
        "inline" => {
            let n: usize = r.require("scenario", "particles")?;
            let dim: usize = r.require("scenario", "dim")?;
            check_counts(n, dim)?;
            let x: Vec<f64> = r.list("scenario", "x")?.ok_or_else(|| Error::validation("x", "required"))?;
            let v: Vec<f64> = r.list("scenario", "v")?.ok_or_else(|| Error::validation("v", "required"))?;
            if x.len() != n * dim {
                return Err(Error::validation("x", format!("expected {} entries, got {}", n * dim, x.len())));
            }
            if v.len() != n * dim {
                return Err(Error::validation("v", format!("expected {} entries, got {}", n * dim, v.len())));
            }
            if x.iter().any(|c| !c.is_finite()) {
                return Err(Error::validation("x", "entries must be finite"));
            }
            if v.iter().any(|c| !c.is_finite()) {
                return Err(Error::validation("v", "entries must be finite"));
            }
            Ok(ScenarioSpec::Inline { n, dim, x, v })
        }
        "random" => {
            let n: usize = r.require("scenario", "particles")?;
            let dim: usize = r.require("scenario", "dim")?;
            check_counts(n, dim)?;
            let seed: u64 = r.require("scenario", "seed")?;
            let box_size: f64 = r.parse("scenario", "box")?.unwrap_or(1.0);
            let speed: f64 = r.parse("scenario", "speed")?.unwrap_or(1.0);
            if !(box_size.is_finite() && box_size > 0.0) {
                return Err(Error::validation("box", "must be positive"));
            }
            if !(speed.is_finite() && speed >= 0.0) {
                return Err(Error::validation("speed", "must be nonnegative"));
            }
            Ok(ScenarioSpec::Random {
                n,
                dim,
                seed,
                box_size,
                speed,
            })
        }
        "twobody" => {
            let phi0: f64 = r.require("scenario", "phi0")?;
            let dphi0: f64 = r.require("scenario", "dphi0")?;
            if !(phi0.is_finite() && phi0 > 0.0) {
                return Err(Error::validation("phi0", "must be positive"));
            }
            if !dphi0.is_finite() {
                return Err(Error::validation("dphi0", "must be finite"));
            }
            Ok(ScenarioSpec::TwoBody { phi0, dphi0 })
        }
        other => Err(Error::validation("kind", format!("unknown scenario kind `{other}`"))),
    }
}

fn parse_solver(r: &Reader) -> Result<SolverConfig> {
    let d = SolverConfig::default();
    let s = SolverConfig {
        rel_tol: r.parse("solver", "rel_tol")?.unwrap_or(d.rel_tol),
        abs_tol: r.parse("solver", "abs_tol")?.unwrap_or(d.abs_tol),
        d_stick: r.parse("solver", "d_stick")?.unwrap_or(d.d_stick),
        v_stick: r.parse("solver", "v_stick")?.unwrap_or(d.v_stick),
        n_reg: r.parse("solver", "n_reg")?.unwrap_or(d.n_reg),
        max_segments: r.parse("solver", "max_segments")?.unwrap_or(d.max_segments),
        t_end: r.parse("solver", "t_end")?.unwrap_or(d.t_end),
        sample_dt: r.parse("solver", "sample_dt")?.unwrap_or(d.sample_dt),
    };
    s.validate()?;
    Ok(s)
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    parse_config_with(text, None)
}

/// Parses a configuration. `command` overrides a missing `[run] command`;
/// when both are given they must agree.
pub fn parse_config_with(text: &str, command: Option<Command>) -> Result<RunConfig> {
    let table = tokenize(text)?;
    let r = Reader { table: &table };
    let file_command: Option<String> = r.parse("run", "command")?;
    let file_command = file_command.map(|s| s.parse::<Command>()).transpose()?;
    let command = match (file_command, command) {
        (Some(a), Some(b)) if a != b => {
            return Err(Error::validation(
                "command",
                format!("config says `{}` but `{}` was requested", a.as_str(), b.as_str()),
            ))
        }
        (Some(a), _) => a,
        (None, Some(b)) => b,
        (None, None) => return Err(Error::validation("command", "no command given")),
    };
    let output: Option<PathBuf> = r.raw("run", "output").map(PathBuf::from);
    let scenario = parse_scenario(&r)?;
    let normalization = match r.raw("scenario", "normalization") {
        Some("mean") => Normalization::Mean,
        Some("sum") => Normalization::Sum,
        Some(other) => {
            return Err(Error::validation(
                "normalization",
                format!("expected `mean` or `sum`, got `{other}`"),
            ))
        }
        None => match scenario {
            ScenarioSpec::TwoBody { .. } => Normalization::Sum,
            _ => Normalization::Mean,
        },
    };
    let kernel = parse_kernel(&r)?;
    let solver = parse_solver(&r)?;
    let n_list: Option<Vec<u64>> = r.list("converge", "n_list")?;
    if let Some(list) = &n_list {
        check_n_list(list)?;
    }
    match command {
        Command::Converge => {
            if n_list.is_none() {
                return Err(Error::validation("n_list", "required for converge"));
            }
            if kernel.alpha().is_none() {
                return Err(Error::validation("type", "converge needs a singular or regularized kernel"));
            }
        }
        Command::Twobody => {
            if !matches!(scenario, ScenarioSpec::TwoBody { .. }) {
                return Err(Error::validation("kind", "twobody needs a twobody scenario"));
            }
        }
        Command::Simulate | Command::Diagnose => {}
    }
    Ok(RunConfig {
        command,
        output,
        scenario,
        normalization,
        kernel,
        solver,
        n_list,
    })
}

fn join<T: std::fmt::Display>(items: &[T]) -> String {
    items.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(", ")
}

impl RunConfig {
    pub fn build_system(&self) -> Result<ParticleSystem> {
        let sys = match &self.scenario {
            ScenarioSpec::Inline { n, dim, x, v } => {
                ParticleSystem::make_system(*n, *dim, x.clone(), v.clone(), self.kernel)?
            }
            ScenarioSpec::Random {
                n,
                dim,
                seed,
                box_size,
                speed,
            } => random_system(*n, *dim, self.kernel, *seed, *box_size, *speed)?,
            ScenarioSpec::TwoBody { phi0, dphi0 } => two_body_system(*phi0, *dphi0, self.kernel)?,
        };
        Ok(sys.with_normalization(self.normalization))
    }

    /// The resolved configuration in the input format, defaults included.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "[run]\ncommand = {}", self.command.as_str());
        if let Some(o) = &self.output {
            let _ = writeln!(s, "output = {}", o.display());
        }
        s.push_str("\n[scenario]\n");
        match &self.scenario {
            ScenarioSpec::Inline { n, dim, x, v } => {
                let _ = writeln!(s, "kind = inline\nparticles = {n}\ndim = {dim}");
                let _ = writeln!(s, "x = {}\nv = {}", join(x), join(v));
            }
            ScenarioSpec::Random {
                n,
                dim,
                seed,
                box_size,
                speed,
            } => {
                let _ = writeln!(
                    s,
                    "kind = random\nparticles = {n}\ndim = {dim}\nseed = {seed}\nbox = {box_size}\nspeed = {speed}"
                );
            }
            ScenarioSpec::TwoBody { phi0, dphi0 } => {
                let _ = writeln!(s, "kind = twobody\nphi0 = {phi0}\ndphi0 = {dphi0}");
            }
        }
        let norm = match self.normalization {
            Normalization::Mean => "mean",
            Normalization::Sum => "sum",
        };
        let _ = writeln!(s, "normalization = {norm}");
        s.push_str("\n[kernel]\n");
        match self.kernel {
            WeightKernel::Singular { alpha } => {
                let _ = writeln!(s, "type = singular\nalpha = {alpha}");
            }
            WeightKernel::Regularized { alpha, n } => {
                let _ = writeln!(s, "type = regularized\nalpha = {alpha}\nn = {n}");
            }
            WeightKernel::CuckerSmale { k, beta } => {
                let _ = writeln!(s, "type = cucker_smale\nk = {k}\nbeta = {beta}");
            }
        }
        let c = &self.solver;
        let _ = writeln!(
            s,
            "\n[solver]\nrel_tol = {}\nabs_tol = {}\nd_stick = {}\nv_stick = {}\nn_reg = {}\nmax_segments = {}\nt_end = {}\nsample_dt = {}",
            c.rel_tol, c.abs_tol, c.d_stick, c.v_stick, c.n_reg, c.max_segments, c.t_end, c.sample_dt
        );
        if let Some(list) = &self.n_list {
            let _ = writeln!(s, "\n[converge]\nn_list = {}", join(list));
        }
        s
    }
}
