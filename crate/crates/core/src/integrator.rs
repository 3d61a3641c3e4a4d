//! Piecewise integration across collisions.
//!
//! Each segment integrates the regularized system with adaptive DOPRI5 steps
//! until a pair of distinct clusters comes within `d_stick`. The encounter is
//! then followed until it resolves:
//!
//! * `Sticking`: the pair's relative speed drops below `v_stick` inside the
//!   ball. The state is advanced to the extrapolated contact time and the
//!   clusters are merged.
//! * `NonStickCollision`: the pair passes its closest approach and leaves the
//!   ball. Integration restarts at the time of closest approach.
//! * `Unresolved`: neither happens within the tracking window.
//!
//! Pairs whose encounter was not a sticking are ignored by the detector until
//! they leave the ball again.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::dynamics::{alignment_field, ClusterPartition, Normalization, ParticleSystem};
use crate::error::{Error, Result};
use crate::kernels::{PreparedKernel, WeightKernel};
use crate::ode::{Dense, Rhs, Stepper};

/// Maximum time an encounter is followed before it is declared unresolved.
const TRACK_WINDOW: f64 = 1.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub d_stick: f64,
    pub v_stick: f64,
    pub n_reg: u64,
    pub max_segments: usize,
    pub t_end: f64,
    pub sample_dt: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            rel_tol: 1e-9,
            abs_tol: 1e-12,
            d_stick: 1e-6,
            v_stick: 1e-4,
            n_reg: 1_000_000,
            max_segments: 1000,
            t_end: 1.0,
            sample_dt: 1e-2,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("rel_tol", self.rel_tol),
            ("abs_tol", self.abs_tol),
            ("d_stick", self.d_stick),
            ("v_stick", self.v_stick),
            ("t_end", self.t_end),
            ("sample_dt", self.sample_dt),
        ];
        for (key, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::validation(key, format!("{value} must be positive and finite")));
            }
        }
        if self.n_reg < 2 {
            return Err(Error::validation("n_reg", "must be at least 2"));
        }
        if self.max_segments < 1 {
            return Err(Error::validation("max_segments", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventKind {
    Sticking,
    NonStickCollision,
    Unresolved,
}

impl EventKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EventKind::Sticking => "Sticking",
            EventKind::NonStickCollision => "NonStickCollision",
            EventKind::Unresolved => "Unresolved",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollisionEvent {
    pub t_event: f64,
    /// Zero-based particle indices, ascending.
    pub group: Vec<usize>,
    pub kind: EventKind,
    /// Largest pairwise relative speed in the group at `t_event`.
    pub rel_speed: f64,
    /// Smallest pairwise distance in the group at `t_event`.
    pub min_dist: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub t: f64,
    /// Index `k` when `t` is the grid time `k * sample_dt`.
    pub grid: Option<u64>,
    pub x: Vec<f64>,
    pub v: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Segment {
    pub t_start: f64,
    pub t_end: f64,
    /// Cluster label of each particle during the segment.
    pub labels: Vec<usize>,
    /// Samples from `t_start` to `t_end` inclusive.
    pub samples: Vec<Sample>,
}

#[derive(Clone, Debug)]
pub struct PiecewiseTrajectory {
    pub n: usize,
    pub dim: usize,
    pub kernel: WeightKernel,
    pub working_kernel: WeightKernel,
    pub normalization: Normalization,
    pub segments: Vec<Segment>,
    pub events: Vec<CollisionEvent>,
    pub final_state: ParticleSystem,
}

impl PiecewiseTrajectory {
    /// Every sample in time order. Segment boundaries appear twice: once as
    /// the end of one segment and once as the start of the next.
    pub fn samples(&self) -> impl Iterator<Item = &Sample> {
        self.segments.iter().flat_map(|s| s.samples.iter())
    }

    /// Samples on the output grid, one per grid index. Where a boundary falls on
    /// the grid the later (post-event) sample is kept.
    pub fn grid_samples(&self) -> Vec<&Sample> {
        let mut out: Vec<&Sample> = Vec::new();
        for s in self.samples() {
            if let Some(k) = s.grid {
                match out.last() {
                    Some(last) if last.grid == Some(k) => *out.last_mut().unwrap() = s,
                    _ => out.push(s),
                }
            }
        }
        out
    }

    pub fn sticking_count(&self) -> usize {
        self.events.iter().filter(|e| e.kind == EventKind::Sticking).count()
    }

    /// True when no pair that shares a cluster is ever separated later.
    pub fn membership_monotone(&self) -> bool {
        self.segments.windows(2).all(|w| {
            let (a, b) = (&w[0].labels, &w[1].labels);
            (0..self.n).all(|i| (0..self.n).all(|k| a[i] != a[k] || b[i] == b[k]))
        }) && self.segments.last().is_none_or(|s| {
            let p = self.final_state.partition();
            (0..self.n).all(|i| (0..self.n).all(|k| s.labels[i] != s.labels[k] || p.same(i, k)))
        })
    }
}

/// A detected entry of one or more pairs into the sticking ball.
#[derive(Clone, Debug, PartialEq)]
pub struct RawEvent {
    pub t_detect: f64,
    /// Pairs of cluster labels, each `(a, b)` with `a < b`.
    pub pairs: Vec<(usize, usize)>,
}

#[derive(Clone, Debug)]
pub struct SegmentRun {
    /// Samples from the start time up to the stop time, both included.
    pub samples: Vec<Sample>,
    pub state: ParticleSystem,
    pub t: f64,
    pub event: Option<RawEvent>,
}

struct Field {
    kernel: PreparedKernel,
    prefactor: f64,
    labels: Vec<usize>,
    dim: usize,
}

impl Field {
    fn new(sys: &ParticleSystem, n_reg: u64) -> Self {
        Field {
            kernel: PreparedKernel::new(sys.kernel().working(n_reg)),
            prefactor: sys.normalization().prefactor(sys.n()),
            labels: sys.partition().labels(),
            dim: sys.dim(),
        }
    }

    fn m(&self) -> usize {
        self.labels.len() * self.dim
    }

    fn pair_dist(&self, y: &[f64], a: usize, b: usize) -> f64 {
        let d = self.dim;
        (0..d)
            .map(|c| {
                let e = y[b * d + c] - y[a * d + c];
                e * e
            })
            .sum::<f64>()
            .sqrt()
    }

    fn pair_speed(&self, y: &[f64], a: usize, b: usize) -> f64 {
        let m = self.m();
        self.pair_dist(&y[m..], a, b)
    }

    /// `(x_b - x_a) · (v_b - v_a)`: negative while the pair closes in.
    fn pair_radial(&self, y: &[f64], a: usize, b: usize) -> f64 {
        let (d, m) = (self.dim, self.m());
        (0..d)
            .map(|c| (y[b * d + c] - y[a * d + c]) * (y[m + b * d + c] - y[m + a * d + c]))
            .sum()
    }

    fn rep_pairs(&self) -> Vec<(usize, usize)> {
        let reps: Vec<usize> = (0..self.labels.len()).filter(|&i| self.labels[i] == i).collect();
        let mut out = Vec::new();
        for (k, &a) in reps.iter().enumerate() {
            for &b in &reps[k + 1..] {
                out.push((a, b));
            }
        }
        out
    }
}

impl Rhs for Field {
    fn eval(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
        let m = self.m();
        dy[..m].copy_from_slice(&y[m..]);
        let (x, v) = y.split_at(m);
        alignment_field(&self.kernel, self.prefactor, &self.labels, self.dim, x, v, &mut dy[m..]);
    }
}

fn state_vector(sys: &ParticleSystem) -> Vec<f64> {
    let mut y = sys.positions().to_vec();
    y.extend_from_slice(sys.velocities());
    y
}

fn with_state(sys: &ParticleSystem, y: &[f64]) -> ParticleSystem {
    let m = sys.n() * sys.dim();
    let mut out = sys.clone();
    out.set_state(&y[..m], &y[m..]);
    out
}

fn grid_index(t: f64, dt: f64) -> Option<u64> {
    let k = (t / dt).round();
    (k >= 0.0 && k * dt == t).then_some(k as u64)
}

/// Smallest `k` with `k * dt > t`.
fn grid_after(t: f64, dt: f64) -> u64 {
    let mut k = (t / dt).floor().max(0.0) as u64;
    while k as f64 * dt <= t {
        k += 1;
    }
    while k > 0 && (k - 1) as f64 * dt > t {
        k -= 1;
    }
    k
}

fn make_sample(t: f64, grid: Option<u64>, y: &[f64]) -> Sample {
    let m = y.len() / 2;
    Sample {
        t,
        grid,
        x: y[..m].to_vec(),
        v: y[m..].to_vec(),
    }
}

struct Sampler {
    dt: f64,
    t_end: f64,
    next: u64,
    buf: Vec<f64>,
}

impl Sampler {
    fn new(t0: f64, cfg: &SolverConfig, m: usize) -> Self {
        Sampler {
            dt: cfg.sample_dt,
            t_end: cfg.t_end,
            next: grid_after(t0, cfg.sample_dt),
            buf: vec![0.0; 2 * m],
        }
    }

    fn emit(&mut self, dense: &Dense, out: &mut Vec<Sample>) {
        loop {
            let tk = self.next as f64 * self.dt;
            if tk > dense.t1() || tk > self.t_end {
                break;
            }
            dense.eval(tk, &mut self.buf);
            out.push(make_sample(tk, Some(self.next), &self.buf));
            self.next += 1;
        }
    }
}

fn dense_at(dense: &Dense, t: f64, buf: &mut [f64]) {
    if t == dense.t0 {
        buf.copy_from_slice(&dense.y0);
    } else {
        dense.eval(t, buf);
    }
}

/// First time in `(lo, hi]` where the pair is inside the ball, given it is
/// outside at `lo` and inside at `hi`.
fn localize_entry(
    field: &Field,
    dense: &Dense,
    pair: (usize, usize),
    mut lo: f64,
    mut hi: f64,
    d_stick: f64,
    tol: f64,
    buf: &mut [f64],
) -> f64 {
    for _ in 0..200 {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        dense_at(dense, mid, buf);
        if field.pair_dist(buf, pair.0, pair.1) < d_stick {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Time of closest approach inside the step, when the radial rate changes
/// sign from closing to opening.
fn closest_in_step(
    field: &Field,
    dense: &Dense,
    y1: &[f64],
    pair: (usize, usize),
    tol: f64,
    buf: &mut [f64],
) -> Option<f64> {
    let g0 = field.pair_radial(&dense.y0, pair.0, pair.1);
    let g1 = field.pair_radial(y1, pair.0, pair.1);
    if !(g0 < 0.0 && g1 >= 0.0) {
        return None;
    }
    let (mut lo, mut hi) = (dense.t0, dense.t1());
    for _ in 0..200 {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        dense_at(dense, mid, buf);
        if field.pair_radial(buf, pair.0, pair.1) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

fn time_tol(cfg: &SolverConfig) -> f64 {
    1e-12 * cfg.t_end.max(1.0)
}

fn new_stepper(field: &Field, t0: f64, y: Vec<f64>, cfg: &SolverConfig) -> Stepper {
    let h_max = (cfg.t_end - t0).max(1e-300);
    Stepper::new(field, t0, y, cfg.rel_tol, cfg.abs_tol, 1e-14 * cfg.t_end, h_max)
}

fn run_segment(
    sys: &ParticleSystem,
    t0: f64,
    t1: f64,
    cfg: &SolverConfig,
    excused: &mut BTreeSet<(usize, usize)>,
) -> Result<SegmentRun> {
    let field = Field::new(sys, cfg.n_reg);
    let y0 = state_vector(sys);
    let mut samples = vec![make_sample(t0, grid_index(t0, cfg.sample_dt), &y0)];
    let pairs = field.rep_pairs();
    let inside: Vec<(usize, usize)> = pairs
        .iter()
        .copied()
        .filter(|p| !excused.contains(p) && field.pair_dist(&y0, p.0, p.1) < cfg.d_stick)
        .collect();
    if !inside.is_empty() {
        return Ok(SegmentRun {
            samples,
            state: sys.clone(),
            t: t0,
            event: Some(RawEvent { t_detect: t0, pairs: inside }),
        });
    }
    let tol = time_tol(cfg);
    let mut buf = vec![0.0; y0.len()];
    let mut sampler = Sampler::new(t0, cfg, field.m());
    let mut stepper = new_stepper(&field, t0, y0, cfg);
    while stepper.t < t1 {
        stepper.step(&field, t1)?;
        let mut earliest: Option<(f64, (usize, usize))> = None;
        for &p in &pairs {
            if excused.contains(&p) {
                continue;
            }
            let dense = &stepper.dense;
            let upper = if field.pair_dist(&stepper.y, p.0, p.1) < cfg.d_stick {
                Some(dense.t1())
            } else {
                closest_in_step(&field, dense, &stepper.y, p, tol, &mut buf).filter(|&tm| {
                    dense_at(dense, tm, &mut buf);
                    field.pair_dist(&buf, p.0, p.1) < cfg.d_stick
                })
            };
            if let Some(hi) = upper {
                let t_in = localize_entry(&field, dense, p, dense.t0, hi, cfg.d_stick, tol, &mut buf);
                if earliest.is_none_or(|(t, _)| t_in < t) {
                    earliest = Some((t_in, p));
                }
            }
        }
        if let Some((t_detect, trigger)) = earliest {
            if t_detect < stepper.t {
                stepper.land(&field, t_detect);
            }
            sampler.emit(&stepper.dense, &mut samples);
            samples.retain(|s| s.t < t_detect);
            samples.push(make_sample(t_detect, grid_index(t_detect, cfg.sample_dt), &stepper.y));
            let mut hit: Vec<(usize, usize)> = pairs
                .iter()
                .copied()
                .filter(|p| {
                    !excused.contains(p)
                        && field.pair_dist(&stepper.y, p.0, p.1) < cfg.d_stick * (1.0 + 1e-9)
                })
                .collect();
            if !hit.contains(&trigger) {
                hit.push(trigger);
                hit.sort_unstable();
            }
            return Ok(SegmentRun {
                samples,
                state: with_state(sys, &stepper.y),
                t: t_detect,
                event: Some(RawEvent { t_detect, pairs: hit }),
            });
        }
        sampler.emit(&stepper.dense, &mut samples);
        excused.retain(|p| field.pair_dist(&stepper.y, p.0, p.1) < cfg.d_stick);
    }
    samples.retain(|s| s.t < stepper.t);
    samples.push(make_sample(stepper.t, grid_index(stepper.t, cfg.sample_dt), &stepper.y));
    Ok(SegmentRun {
        samples,
        state: with_state(sys, &stepper.y),
        t: stepper.t,
        event: None,
    })
}

/// Integrates from `t0` toward `t1`, stopping early when two clusters come
/// within `d_stick` of each other.
pub fn integrate_segment(
    sys: &ParticleSystem,
    t0: f64,
    t1: f64,
    config: &SolverConfig,
) -> Result<SegmentRun> {
    config.validate()?;
    if !(t1 > t0) {
        return Err(Error::domain(format!("empty interval [{t0}, {t1}]")));
    }
    run_segment(sys, t0, t1, config, &mut BTreeSet::new())
}

struct Track {
    pair: (usize, usize),
    min_dist: f64,
    t_min: f64,
    y_min: Vec<f64>,
    passed: bool,
    exited: bool,
}

/// How an encounter ended and where integration resumes.
pub(crate) struct Resolution {
    pub events: Vec<CollisionEvent>,
    pub t_resume: f64,
    /// State at `t_resume`, before any merge.
    pub state: ParticleSystem,
    /// Groups of particles to merge at `t_resume`.
    pub merges: Vec<Vec<usize>>,
    /// Pairs to ignore until they leave the ball.
    pub excuse: Vec<(usize, usize)>,
    /// Samples strictly between the detection and `t_resume`.
    pub samples: Vec<Sample>,
}

fn members(labels: &[usize], reps: &[usize]) -> Vec<usize> {
    (0..labels.len()).filter(|&i| reps.contains(&labels[i])).collect()
}

fn group_stats(field: &Field, y: &[f64], group: &[usize]) -> (f64, f64) {
    let mut speed: f64 = 0.0;
    let mut dist = f64::INFINITY;
    for (k, &i) in group.iter().enumerate() {
        for &j in &group[k + 1..] {
            if field.labels[i] != field.labels[j] {
                speed = speed.max(field.pair_speed(y, i, j));
                dist = dist.min(field.pair_dist(y, i, j));
            }
        }
    }
    if dist.is_infinite() {
        dist = 0.0;
    }
    (speed, dist)
}

fn unresolved(sys: &ParticleSystem, raw: &RawEvent, field: &Field) -> Resolution {
    let y = state_vector(sys);
    let mut reps: Vec<usize> = raw.pairs.iter().flat_map(|p| [p.0, p.1]).collect();
    reps.sort_unstable();
    reps.dedup();
    let group = members(&field.labels, &reps);
    let (rel_speed, min_dist) = group_stats(field, &y, &group);
    Resolution {
        events: vec![CollisionEvent {
            t_event: raw.t_detect,
            group,
            kind: EventKind::Unresolved,
            rel_speed,
            min_dist,
        }],
        t_resume: raw.t_detect,
        state: sys.clone(),
        merges: Vec::new(),
        excuse: raw.pairs.clone(),
        samples: Vec::new(),
    }
}

/// Connected components of the given pairs, as sorted label lists.
fn components(pairs: &[(usize, usize)], n: usize) -> Vec<Vec<usize>> {
    let mut p = ClusterPartition::singletons(n);
    for &(a, b) in pairs {
        p.union(a, b);
    }
    let mut seen: Vec<usize> = pairs.iter().flat_map(|q| [q.0, q.1]).collect();
    seen.sort_unstable();
    seen.dedup();
    let mut out: Vec<Vec<usize>> = Vec::new();
    for &a in &seen {
        match out.iter_mut().find(|c| p.same(c[0], a)) {
            Some(c) => c.push(a),
            None => out.push(vec![a]),
        }
    }
    out
}

/// Follows an encounter from the detection state until it resolves.
pub(crate) fn resolve_event(
    sys: &ParticleSystem,
    raw: &RawEvent,
    cfg: &SolverConfig,
    excused: &BTreeSet<(usize, usize)>,
) -> Result<Resolution> {
    let field = Field::new(sys, cfg.n_reg);
    let t_detect = raw.t_detect;
    let y0 = state_vector(sys);
    let tol = time_tol(cfg);
    let mut tracks: Vec<Track> = raw
        .pairs
        .iter()
        .map(|&p| Track {
            pair: p,
            min_dist: field.pair_dist(&y0, p.0, p.1),
            t_min: t_detect,
            y_min: y0.clone(),
            passed: field.pair_radial(&y0, p.0, p.1) >= 0.0,
            exited: false,
        })
        .collect();
    let candidates: Vec<(usize, usize)> =
        field.rep_pairs().into_iter().filter(|p| !excused.contains(p)).collect();
    let sticky_pairs = |y: &[f64]| -> Vec<(usize, usize)> {
        candidates
            .iter()
            .copied()
            .filter(|p| {
                field.pair_dist(y, p.0, p.1) < cfg.d_stick
                    && field.pair_speed(y, p.0, p.1) < cfg.v_stick
            })
            .collect()
    };
    let t_limit = (t_detect + TRACK_WINDOW).min(cfg.t_end);
    let mut samples = Vec::new();
    let mut buf = vec![0.0; y0.len()];
    let mut sticky = sticky_pairs(&y0);
    let mut stepper = None;
    let mut sampler = Sampler::new(t_detect, cfg, field.m());
    let mut t = t_detect;
    while sticky.is_empty() {
        if t >= t_limit {
            return Ok(unresolved(sys, raw, &field));
        }
        let st = stepper.get_or_insert_with(|| new_stepper(&field, t_detect, y0.clone(), cfg));
        st.step(&field, t_limit)?;
        t = st.t;
        let dense = &st.dense;
        for tr in tracks.iter_mut() {
            let (a, b) = tr.pair;
            if let Some(tm) = closest_in_step(&field, dense, &st.y, tr.pair, tol, &mut buf) {
                dense_at(dense, tm, &mut buf);
                let dm = field.pair_dist(&buf, a, b);
                if !tr.passed || dm < tr.min_dist {
                    tr.min_dist = dm;
                    tr.t_min = tm;
                    tr.y_min.copy_from_slice(&buf);
                }
                tr.passed = true;
            } else if !tr.passed {
                let d1 = field.pair_dist(&st.y, a, b);
                if d1 < tr.min_dist {
                    tr.min_dist = d1;
                    tr.t_min = t;
                    tr.y_min.copy_from_slice(&st.y);
                }
            }
            if tr.passed && field.pair_dist(&st.y, a, b) >= cfg.d_stick {
                tr.exited = true;
            }
        }
        sampler.emit(dense, &mut samples);
        sticky = sticky_pairs(&st.y);
        if !sticky.is_empty() {
            break;
        }
        let first_exit = tracks
            .iter()
            .filter(|tr| tr.exited)
            .min_by(|p, q| p.t_min.total_cmp(&q.t_min));
        if let Some(tr) = first_exit {
            let t_min = tr.t_min;
            let y = tr.y_min.clone();
            let group = members(&field.labels, &[tr.pair.0, tr.pair.1]);
            let (rel_speed, min_dist) = group_stats(&field, &y, &group);
            samples.retain(|s| s.t < t_min);
            let excuse: Vec<(usize, usize)> =
                tracks.iter().filter(|q| q.exited).map(|q| q.pair).collect();
            return Ok(Resolution {
                events: vec![CollisionEvent {
                    t_event: t_min,
                    group,
                    kind: EventKind::NonStickCollision,
                    rel_speed,
                    min_dist,
                }],
                t_resume: t_min,
                state: with_state(sys, &y),
                merges: Vec::new(),
                excuse,
                samples,
            });
        }
    }

    // advance to the extrapolated contact time
    let mut y = stepper.as_ref().map_or_else(|| y0.clone(), |s| s.y.clone());
    let alpha = sys.kernel().alpha();
    let cap = alpha.map_or(0.0, |a| 10.0 * cfg.d_stick / (a * cfg.v_stick));
    let mut extra: f64 = 0.0;
    if let Some(a) = alpha {
        for &(p, q) in &sticky {
            let dist = field.pair_dist(&y, p, q);
            let closing = -field.pair_radial(&y, p, q) / dist;
            if dist > 0.0 && closing > 0.0 {
                extra = extra.max(dist / (a * closing));
            }
        }
    }
    let t_contact = (t + extra.min(cap)).min(cfg.t_end);
    if t_contact > t {
        let st = stepper.get_or_insert_with(|| new_stepper(&field, t_detect, y0.clone(), cfg));
        while st.t < t_contact {
            st.step(&field, t_contact)?;
            sampler.emit(&st.dense, &mut samples);
        }
        y.copy_from_slice(&st.y);
        t = st.t;
    }
    samples.retain(|s| s.t < t);
    let mut events = Vec::new();
    let mut merges = Vec::new();
    for comp in components(&sticky, field.labels.len()) {
        let group = members(&field.labels, &comp);
        let (rel_speed, min_dist) = group_stats(&field, &y, &group);
        events.push(CollisionEvent {
            t_event: t,
            group: group.clone(),
            kind: EventKind::Sticking,
            rel_speed,
            min_dist,
        });
        merges.push(group);
    }
    Ok(Resolution {
        events,
        t_resume: t,
        state: with_state(sys, &y),
        merges,
        excuse: Vec::new(),
        samples,
    })
}

/// Classifies an encounter detected by [`integrate_segment`]; `sys` is the
/// state at the detection time.
pub fn classify_event(
    sys: &ParticleSystem,
    raw: &RawEvent,
    config: &SolverConfig,
) -> Result<CollisionEvent> {
    config.validate()?;
    let r = resolve_event(sys, raw, config, &BTreeSet::new())?;
    Ok(r.events.into_iter().next().expect("resolution carries an event"))
}

fn drift_segment(sys: &ParticleSystem, t0: f64, cfg: &SolverConfig) -> (Segment, ParticleSystem) {
    let y0 = state_vector(sys);
    let m = y0.len() / 2;
    let at = |t: f64| -> Vec<f64> {
        let mut y = y0.clone();
        for i in 0..m {
            y[i] += (t - t0) * y0[m + i];
        }
        y
    };
    let mut samples = vec![make_sample(t0, grid_index(t0, cfg.sample_dt), &y0)];
    let mut k = grid_after(t0, cfg.sample_dt);
    loop {
        let tk = k as f64 * cfg.sample_dt;
        if tk >= cfg.t_end {
            break;
        }
        samples.push(make_sample(tk, Some(k), &at(tk)));
        k += 1;
    }
    let y_end = at(cfg.t_end);
    if cfg.t_end > t0 {
        samples.push(make_sample(cfg.t_end, grid_index(cfg.t_end, cfg.sample_dt), &y_end));
    }
    let segment = Segment {
        t_start: t0,
        t_end: cfg.t_end,
        labels: sys.partition().labels(),
        samples,
    };
    (segment, with_state(sys, &y_end))
}

fn remap_excused(excused: &BTreeSet<(usize, usize)>, labels: &[usize]) -> BTreeSet<(usize, usize)> {
    excused
        .iter()
        .filter_map(|&(a, b)| {
            let (la, lb) = (labels[a], labels[b]);
            (la != lb).then(|| (la.min(lb), la.max(lb)))
        })
        .collect()
}

/// Integrates from `t = 0` to `config.t_end`, continuing through collisions.
pub fn solve_piecewise(sys: &ParticleSystem, config: &SolverConfig) -> Result<PiecewiseTrajectory> {
    config.validate()?;
    let mut state = sys.clone();
    let mut t = 0.0;
    let mut segments: Vec<Segment> = Vec::new();
    let mut events = Vec::new();
    let mut excused = BTreeSet::new();
    let mut attempts = 0;
    while t < config.t_end {
        if state.partition().cluster_count() == 1 {
            let (segment, end) = drift_segment(&state, t, config);
            segments.push(segment);
            state = end;
            break;
        }
        attempts += 1;
        if attempts > config.max_segments {
            return Err(Error::ContinuationLimit(config.max_segments));
        }
        let labels = state.partition().labels();
        let run = run_segment(&state, t, config.t_end, config, &mut excused)?;
        let Some(raw) = run.event else {
            segments.push(Segment {
                t_start: t,
                t_end: run.t,
                labels,
                samples: run.samples,
            });
            state = run.state;
            break;
        };
        let res = resolve_event(&run.state, &raw, config, &excused)?;
        let mut samples = run.samples;
        samples.retain(|s| s.t < raw.t_detect);
        if raw.t_detect < res.t_resume || samples.is_empty() {
            samples.push(make_sample(
                raw.t_detect,
                grid_index(raw.t_detect, config.sample_dt),
                &state_vector(&run.state),
            ));
        }
        samples.extend(res.samples);
        samples.retain(|s| s.t < res.t_resume);
        samples.push(make_sample(
            res.t_resume,
            grid_index(res.t_resume, config.sample_dt),
            &state_vector(&res.state),
        ));
        if res.t_resume > t {
            segments.push(Segment {
                t_start: t,
                t_end: res.t_resume,
                labels,
                samples,
            });
        }
        events.extend(res.events);
        state = res.state;
        for group in &res.merges {
            state = state.merge_clusters(group)?;
        }
        excused.extend(res.excuse);
        excused = remap_excused(&excused, &state.partition().labels());
        t = res.t_resume;
        if t >= config.t_end && !res.merges.is_empty() {
            // keep the merged state visible at the final time
            let y = state_vector(&state);
            segments.push(Segment {
                t_start: t,
                t_end: t,
                labels: state.partition().labels(),
                samples: vec![make_sample(t, grid_index(t, config.sample_dt), &y)],
            });
        }
    }
    Ok(PiecewiseTrajectory {
        n: sys.n(),
        dim: sys.dim(),
        kernel: sys.kernel(),
        working_kernel: sys.kernel().working(config.n_reg),
        normalization: sys.normalization(),
        segments,
        events,
        final_state: state,
    })
}
