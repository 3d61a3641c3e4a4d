//! Structural checks on computed trajectories.

use serde::{Deserialize, Serialize};

use crate::dynamics::{dispersion, mean_rows, ClusterPartition};
use crate::error::{Error, Result};
use crate::integrator::{CollisionEvent, EventKind, PiecewiseTrajectory, Sample};
use crate::kernels::PreparedKernel;

/// Ratio above which successive dyadic tail integrals count as not decaying.
const RATIO_THRESHOLD: f64 = 0.9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Integrability {
    Finite,
    Divergent,
    Inconclusive,
}

impl Integrability {
    pub fn as_str(&self) -> &'static str {
        match self {
            Integrability::Finite => "Finite",
            Integrability::Divergent => "Divergent",
            Integrability::Inconclusive => "Inconclusive",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairIntegrability {
    pub pair: (usize, usize),
    pub t_upper: f64,
    pub estimate: f64,
    pub class: Integrability,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HolderFit {
    pub exponent: f64,
    /// RMS of the log-log fit residuals.
    pub residual: f64,
    pub samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dissipation {
    pub r_series: Vec<(f64, f64)>,
    pub r_violation: f64,
    pub velocity_bound_margin: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub mean_velocity_drift: f64,
    pub r_series: Vec<(f64, f64)>,
    pub r_violation: f64,
    pub ordered_sum_violation: f64,
    pub velocity_bound_margin: f64,
    pub holder: Option<HolderFit>,
    pub integrability: Vec<PairIntegrability>,
}

fn all_samples(traj: &PiecewiseTrajectory) -> Result<Vec<&Sample>> {
    let s: Vec<&Sample> = traj.samples().collect();
    if s.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "trajectory has {} samples, need at least 2",
            s.len()
        )));
    }
    Ok(s)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|c| c * c).sum::<f64>().sqrt()
}

/// Largest deviation of the mean velocity from its initial value.
pub fn conservation_residual(traj: &PiecewiseTrajectory) -> Result<f64> {
    let samples = all_samples(traj)?;
    let (n, d) = (traj.n, traj.dim);
    let m0 = mean_rows(&samples[0].v, n, d);
    Ok(samples
        .iter()
        .map(|s| {
            let m = mean_rows(&s.v, n, d);
            norm(&m.iter().zip(&m0).map(|(a, b)| a - b).collect::<Vec<_>>())
        })
        .fold(0.0, f64::max))
}

pub fn dissipation_check(traj: &PiecewiseTrajectory) -> Result<Dissipation> {
    let samples = all_samples(traj)?;
    let (n, d) = (traj.n, traj.dim);
    let r_series: Vec<(f64, f64)> =
        samples.iter().map(|s| (s.t, dispersion(&s.v, n, d))).collect();
    let r_violation = r_series
        .windows(2)
        .map(|w| (w[1].1 - w[0].1).max(0.0))
        .fold(0.0, f64::max);
    let vbar = norm(&mean_rows(&samples[0].v, n, d));
    let bound = (n as f64).sqrt() * r_series[0].1.sqrt() + vbar;
    let vmax = samples
        .iter()
        .flat_map(|s| s.v.chunks(d).map(norm))
        .fold(0.0, f64::max);
    Ok(Dissipation {
        r_series,
        r_violation,
        velocity_bound_margin: bound - vmax,
    })
}

/// For each coordinate, the sum of the `l` smallest velocity components must
/// not decrease and the sum of the `l` largest must not increase. Returns the
/// largest violation.
pub fn ordered_sums_check(traj: &PiecewiseTrajectory) -> Result<f64> {
    let samples = all_samples(traj)?;
    let (n, d) = (traj.n, traj.dim);
    let mut worst: f64 = 0.0;
    let mut prev: Vec<Vec<f64>> = Vec::new();
    let mut col = vec![0.0; n];
    for s in samples {
        let mut sums = Vec::with_capacity(d);
        for c in 0..d {
            for (i, slot) in col.iter_mut().enumerate() {
                *slot = s.v[i * d + c];
            }
            col.sort_by(f64::total_cmp);
            // prefix[l] = bottom-l sum; total - prefix[n-l] = top-l sum
            let mut prefix = vec![0.0; n + 1];
            for (i, value) in col.iter().enumerate() {
                prefix[i + 1] = prefix[i] + value;
            }
            sums.push(prefix);
        }
        if !prev.is_empty() {
            for c in 0..d {
                let (p, q) = (&prev[c], &sums[c]);
                for l in 1..=n {
                    worst = worst.max(p[l] - q[l]);
                    let top_p = p[n] - p[n - l];
                    let top_q = q[n] - q[n - l];
                    worst = worst.max(top_q - top_p);
                }
            }
        }
        prev = sums;
    }
    Ok(worst)
}

/// Hölder fit on the window `[t_event - 0.1 t_event, t_event)`.
pub fn holder_exponent(traj: &PiecewiseTrajectory, event: &CollisionEvent) -> Result<HolderFit> {
    holder_exponent_window(traj, event.t_event, 0.1 * event.t_event)
}

/// Least-squares slope of `log max_i |v_i(t) - v_i(t_event)|` against
/// `log(t_event - t)` over samples in `[t_event - window, t_event)`.
///
/// The reference velocity is the first sample at `t_event`, which at a
/// sticking event is the state just before the merge.
pub fn holder_exponent_window(
    traj: &PiecewiseTrajectory,
    t_event: f64,
    window: f64,
) -> Result<HolderFit> {
    let samples = all_samples(traj)?;
    let Some(reference) = samples.iter().find(|s| s.t == t_event) else {
        return Err(Error::InsufficientData(format!("no sample at t = {t_event}")));
    };
    let d = traj.dim;
    let mut pts = Vec::new();
    for s in &samples {
        if s.t < t_event - window || s.t >= t_event {
            continue;
        }
        let dev = s
            .v
            .chunks(d)
            .zip(reference.v.chunks(d))
            .map(|(a, b)| norm(&a.iter().zip(b).map(|(p, q)| p - q).collect::<Vec<_>>()))
            .fold(0.0, f64::max);
        if dev > 0.0 {
            pts.push(((t_event - s.t).ln(), dev.ln()));
        }
    }
    if pts.len() < 10 {
        return Err(Error::InsufficientData(format!(
            "{} usable samples in the fit window, need at least 10",
            pts.len()
        )));
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData("degenerate fit window".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (pts
        .iter()
        .map(|p| {
            let e = p.1 - (intercept + slope * p.0);
            e * e
        })
        .sum::<f64>()
        / k)
        .sqrt();
    Ok(HolderFit {
        exponent: slope,
        residual,
        samples: pts.len(),
    })
}

/// Accumulates `∫ ψ(|x_i - x_j|) ds` over the samples before `t_upper` and
/// classifies the integral by how the contributions of dyadic windows
/// approaching `t_upper` decay.
pub fn integrability_probe(
    traj: &PiecewiseTrajectory,
    pair: (usize, usize),
    t_upper: f64,
) -> Result<(f64, Integrability)> {
    let (i, j) = pair;
    if i >= traj.n || j >= traj.n {
        return Err(Error::Index {
            index: i.max(j),
            n: traj.n,
        });
    }
    for seg in &traj.segments {
        if seg.t_start < t_upper && seg.labels[i] == seg.labels[j] {
            return Err(Error::domain(format!(
                "particles {i} and {j} share a cluster before t = {t_upper}"
            )));
        }
    }
    let kernel = PreparedKernel::new(traj.kernel);
    let d = traj.dim;
    let pts: Vec<(f64, f64)> = traj
        .samples()
        .filter(|s| s.t < t_upper)
        .map(|s| {
            let dist = norm(
                &(0..d)
                    .map(|c| s.x[j * d + c] - s.x[i * d + c])
                    .collect::<Vec<_>>(),
            );
            (s.t, kernel.weight(dist))
        })
        .collect();
    if pts.len() < 2 {
        return Err(Error::InsufficientData("fewer than 2 samples before t_upper".into()));
    }
    let t_first = pts[0].0;
    let span = t_upper - t_first;
    let mut estimate = 0.0;
    let mut windows: Vec<(f64, usize)> = Vec::new();
    for w in pts.windows(2) {
        let dt = w[1].0 - w[0].0;
        if dt <= 0.0 {
            continue;
        }
        let piece = 0.5 * (w[0].1 + w[1].1) * dt;
        estimate += piece;
        // window j covers [t_upper - span/2^j, t_upper - span/2^(j+1))
        let mid = 0.5 * (w[0].0 + w[1].0);
        let frac = (t_upper - mid) / span;
        let idx = (-frac.log2()).floor().max(0.0) as usize;
        if windows.len() <= idx {
            windows.resize(idx + 1, (0.0, 0));
        }
        windows[idx].0 += piece;
        windows[idx].1 += 1;
    }
    let mut ratios = Vec::new();
    for w in windows.windows(2) {
        if w[0].1 >= 3 && w[1].1 >= 3 && w[0].0 > 0.0 {
            ratios.push(w[1].0 / w[0].0);
        }
    }
    let class = if ratios.len() < 2 {
        Integrability::Inconclusive
    } else if ratios.iter().all(|&r| r >= RATIO_THRESHOLD) {
        Integrability::Divergent
    } else if ratios.iter().all(|&r| r < RATIO_THRESHOLD) {
        Integrability::Finite
    } else {
        Integrability::Inconclusive
    };
    Ok((estimate, class))
}

/// Time up to which a pair can be probed: its first shared sticking event,
/// or the end of the trajectory.
fn probe_upper(traj: &PiecewiseTrajectory, i: usize, j: usize) -> f64 {
    let end = traj.segments.last().map_or(0.0, |s| s.t_end);
    traj.events
        .iter()
        .find(|e| e.kind == EventKind::Sticking && e.group.contains(&i) && e.group.contains(&j))
        .map_or(end, |e| e.t_event)
}

/// Probes every pair that starts in distinct clusters.
pub fn integrability_all(traj: &PiecewiseTrajectory) -> Vec<PairIntegrability> {
    let Some(first) = traj.segments.first() else {
        return Vec::new();
    };
    let mut out = Vec::new();
    for i in 0..traj.n {
        for j in (i + 1)..traj.n {
            if first.labels[i] == first.labels[j] {
                continue;
            }
            let t_upper = probe_upper(traj, i, j);
            let (estimate, class) = integrability_probe(traj, (i, j), t_upper)
                .unwrap_or((f64::NAN, Integrability::Inconclusive));
            out.push(PairIntegrability {
                pair: (i, j),
                t_upper,
                estimate,
                class,
            });
        }
    }
    out
}

/// Classes of the relation generated by divergent pairs.
pub fn divergent_classes(probes: &[PairIntegrability], n: usize) -> Vec<Vec<usize>> {
    let mut p = ClusterPartition::singletons(n);
    for pr in probes {
        if pr.class == Integrability::Divergent {
            p.union(pr.pair.0, pr.pair.1);
        }
    }
    p.clusters()
}

/// Largest in-group relative speed over the last `count` samples strictly
/// before the event.
pub fn pre_event_spread(
    traj: &PiecewiseTrajectory,
    event: &CollisionEvent,
    count: usize,
) -> Result<f64> {
    let before: Vec<&Sample> = traj.samples().filter(|s| s.t < event.t_event).collect();
    if before.len() < count {
        return Err(Error::InsufficientData(format!(
            "{} samples before the event, need {count}",
            before.len()
        )));
    }
    let d = traj.dim;
    let mut spread: f64 = 0.0;
    for s in &before[before.len() - count..] {
        for (k, &i) in event.group.iter().enumerate() {
            for &j in &event.group[k + 1..] {
                let dv: Vec<f64> = (0..d).map(|c| s.v[i * d + c] - s.v[j * d + c]).collect();
                spread = spread.max(norm(&dv));
            }
        }
    }
    Ok(spread)
}

pub fn diagnose(traj: &PiecewiseTrajectory) -> Result<DiagnosticsReport> {
    let mean_velocity_drift = conservation_residual(traj)?;
    let dis = dissipation_check(traj)?;
    let ordered_sum_violation = ordered_sums_check(traj)?;
    let holder = traj
        .events
        .iter()
        .find(|e| e.kind == EventKind::Sticking)
        .and_then(|e| holder_exponent(traj, e).ok());
    Ok(DiagnosticsReport {
        mean_velocity_drift,
        r_series: dis.r_series,
        r_violation: dis.r_violation,
        ordered_sum_violation,
        velocity_bound_margin: dis.velocity_bound_margin,
        holder,
        integrability: integrability_all(traj),
    })
}
