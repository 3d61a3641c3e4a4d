//! Output files.
//!
//! Numbers are written with Rust's shortest round-trip formatting, so parsing
//! a written value gives back the same `f64` bit for bit.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::convergence::ConvergenceReport;
use crate::diagnostics::DiagnosticsReport;
use crate::error::{Error, Result};
use crate::integrator::{CollisionEvent, EventKind, PiecewiseTrajectory};

pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const EVENTS_FILE: &str = "events.jsonl";
pub const META_FILE: &str = "meta.txt";
pub const DIAGNOSTICS_FILE: &str = "diagnostics.txt";
pub const R_SERIES_FILE: &str = "r_series.csv";
pub const CONVERGENCE_FILE: &str = "convergence.csv";
pub const TWOBODY_FILE: &str = "twobody.txt";
pub const LEVELS_FILE: &str = "level_times.csv";

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub fn trajectory_header(n: usize, dim: usize) -> String {
    let mut cols = vec!["t".to_string()];
    for name in ["x", "v"] {
        for i in 1..=n {
            for c in 1..=dim {
                cols.push(format!("{name}_{i}_{c}"));
            }
        }
    }
    cols.join(",")
}

pub fn trajectory_csv(traj: &PiecewiseTrajectory) -> String {
    let mut out = trajectory_header(traj.n, traj.dim);
    out.push('\n');
    for s in traj.samples() {
        let _ = write!(out, "{}", s.t);
        for value in s.x.iter().chain(&s.v) {
            let _ = write!(out, ",{value}");
        }
        out.push('\n');
    }
    out
}

/// One record of `events.jsonl`. Group indices are 1-based.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub t_event: f64,
    pub group: Vec<usize>,
    pub kind: EventKind,
    pub rel_speed: f64,
    pub min_dist: f64,
}

impl From<&CollisionEvent> for EventRecord {
    fn from(e: &CollisionEvent) -> Self {
        EventRecord {
            t_event: e.t_event,
            group: e.group.iter().map(|i| i + 1).collect(),
            kind: e.kind,
            rel_speed: e.rel_speed,
            min_dist: e.min_dist,
        }
    }
}

pub fn events_jsonl(events: &[CollisionEvent]) -> String {
    let mut out = String::new();
    for e in events {
        let line = serde_json::to_string(&EventRecord::from(e)).expect("event records serialize");
        out.push_str(&line);
        out.push('\n');
    }
    out
}

/// Writes `trajectory.csv`, `events.jsonl` and `meta.txt` into `dir`.
pub fn serialize_trajectory(traj: &PiecewiseTrajectory, meta: &str, dir: &Path) -> Result<Vec<PathBuf>> {
    ensure_dir(dir)?;
    let files = [
        (TRAJECTORY_FILE, trajectory_csv(traj)),
        (EVENTS_FILE, events_jsonl(&traj.events)),
        (META_FILE, meta.to_string()),
    ];
    let mut written = Vec::new();
    for (name, body) in files {
        let path = dir.join(name);
        write_file(&path, &body)?;
        written.push(path);
    }
    Ok(written)
}

/// Parsed `trajectory.csv`: the header and one row of values per sample.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

pub fn parse_trajectory_csv(text: &str) -> Result<TrajectoryTable> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::Parse {
        line: 1,
        msg: "missing header".into(),
    })?;
    let columns: Vec<String> = header.split(',').map(str::to_string).collect();
    let mut rows = Vec::new();
    for (k, line) in lines.enumerate() {
        let row = line
            .split(',')
            .map(|f| {
                f.parse::<f64>().map_err(|_| Error::Parse {
                    line: k + 2,
                    msg: format!("bad number `{f}`"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if row.len() != columns.len() {
            return Err(Error::Parse {
                line: k + 2,
                msg: format!("expected {} fields, got {}", columns.len(), row.len()),
            });
        }
        rows.push(row);
    }
    Ok(TrajectoryTable { columns, rows })
}

pub fn parse_events_jsonl(text: &str) -> Result<Vec<EventRecord>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(k, l)| {
            serde_json::from_str(l).map_err(|e| Error::Parse {
                line: k + 1,
                msg: e.to_string(),
            })
        })
        .collect()
}

pub fn diagnostics_text(report: &DiagnosticsReport, traj: &PiecewiseTrajectory) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "mean_velocity_drift = {}", report.mean_velocity_drift);
    let _ = writeln!(s, "r_violation = {}", report.r_violation);
    let _ = writeln!(s, "ordered_sum_violation = {}", report.ordered_sum_violation);
    let _ = writeln!(s, "velocity_bound_margin = {}", report.velocity_bound_margin);
    let _ = writeln!(s, "events = {}", traj.events.len());
    let _ = writeln!(s, "sticking_events = {}", traj.sticking_count());
    match &report.holder {
        Some(h) => {
            let _ = writeln!(s, "holder_exponent = {}", h.exponent);
            let _ = writeln!(s, "holder_residual = {}", h.residual);
            let _ = writeln!(s, "holder_samples = {}", h.samples);
        }
        None => {
            let _ = writeln!(s, "holder_exponent = none");
        }
    }
    for p in &report.integrability {
        let (i, j) = (p.pair.0 + 1, p.pair.1 + 1);
        let _ = writeln!(s, "integrability_{i}_{j} = {}", p.class.as_str());
        let _ = writeln!(s, "integral_{i}_{j} = {}", p.estimate);
        let _ = writeln!(s, "probe_end_{i}_{j} = {}", p.t_upper);
    }
    s
}

/// Parses a flat `key = value` document.
pub fn parse_key_values(text: &str) -> Result<Vec<(String, String)>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(k, l)| {
            l.split_once(" = ")
                .map(|(a, b)| (a.to_string(), b.to_string()))
                .ok_or_else(|| Error::Parse {
                    line: k + 1,
                    msg: format!("expected `key = value`, got `{l}`"),
                })
        })
        .collect()
}

pub fn r_series_csv(series: &[(f64, f64)]) -> String {
    let mut s = String::from("t,r\n");
    for (t, r) in series {
        let _ = writeln!(s, "{t},{r}");
    }
    s
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn convergence_csv(report: &ConvergenceReport) -> String {
    let mut s = String::from("n,sup_dx,sup_dv,reference_gap_x,reference_gap_v\n");
    for k in 0..report.n_list.len() {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            report.n_list[k],
            opt(report.sup_dx[k]),
            opt(report.sup_dv[k]),
            report.reference_gap_x[k],
            report.reference_gap_v[k]
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::ParticleSystem;
    use crate::integrator::{solve_piecewise, SolverConfig};
    use crate::kernels::WeightKernel;

    #[test]
    fn header_layout() {
        assert_eq!(trajectory_header(2, 2), "t,x_1_1,x_1_2,x_2_1,x_2_2,v_1_1,v_1_2,v_2_1,v_2_2");
    }

    #[test]
    fn single_particle_three_samples() {
        let sys = ParticleSystem::make_system(1, 1, vec![0.0], vec![1.0], WeightKernel::singular(0.5).unwrap()).unwrap();
        let cfg = SolverConfig {
            t_end: 1.0,
            sample_dt: 0.5,
            ..SolverConfig::default()
        };
        let traj = solve_piecewise(&sys, &cfg).unwrap();
        let table = parse_trajectory_csv(&trajectory_csv(&traj)).unwrap();
        assert_eq!(table.rows.len(), 3);
        assert_eq!(events_jsonl(&traj.events), "");
    }

    #[test]
    fn csv_round_trip_is_bitwise() {
        let sys = ParticleSystem::make_system(
            3,
            2,
            vec![0.0, 0.1, 1.0, -0.3, 0.7, 2.0],
            vec![0.3, -1.0, 0.1, 0.2, -0.5, 0.0],
            WeightKernel::singular(0.3).unwrap(),
        )
        .unwrap();
        let traj = solve_piecewise(&sys, &SolverConfig::default()).unwrap();
        let table = parse_trajectory_csv(&trajectory_csv(&traj)).unwrap();
        for (row, s) in table.rows.iter().zip(traj.samples()) {
            assert_eq!(row[0].to_bits(), s.t.to_bits());
            for (a, b) in row[1..].iter().zip(s.x.iter().chain(&s.v)) {
                assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }

    #[test]
    fn events_round_trip() {
        let e = CollisionEvent {
            t_event: 0.49999999999,
            group: vec![0, 2],
            kind: EventKind::NonStickCollision,
            rel_speed: 1.0000001,
            min_dist: 3e-13,
        };
        let text = events_jsonl(std::slice::from_ref(&e));
        let back = parse_events_jsonl(&text).unwrap();
        assert_eq!(back, vec![EventRecord::from(&e)]);
        assert_eq!(back[0].group, vec![1, 3]);
        assert!(text.contains("\"kind\":\"NonStickCollision\""));
    }

    #[test]
    fn malformed_inputs() {
        assert!(parse_trajectory_csv("").is_err());
        assert!(matches!(parse_trajectory_csv("t,x\n1,2\n3\n"), Err(Error::Parse { line: 3, .. })));
        assert!(parse_events_jsonl("{nope}\n").is_err());
        assert!(parse_key_values("a = 1\nb\n").is_err());
    }
}
