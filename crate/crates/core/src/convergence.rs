//! Solving the regularized family for increasing `n` and measuring how the
//! trajectories settle.

use serde::{Deserialize, Serialize};

use crate::dynamics::ParticleSystem;
use crate::error::{Error, Result};
use crate::integrator::{solve_piecewise, PiecewiseTrajectory, Sample, SolverConfig};
use crate::kernels::WeightKernel;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub n_list: Vec<u64>,
    /// Gap to the previous `n`; `None` for the first entry.
    pub sup_dx: Vec<Option<f64>>,
    pub sup_dv: Vec<Option<f64>>,
    /// Gap to the largest `n`.
    pub reference_gap_x: Vec<f64>,
    pub reference_gap_v: Vec<f64>,
}

pub fn check_n_list(n_list: &[u64]) -> Result<()> {
    if n_list.is_empty() {
        return Err(Error::validation("n_list", "must not be empty"));
    }
    if let Some(&n) = n_list.iter().find(|&&n| n < 2) {
        return Err(Error::validation("n_list", format!("entry {n} is below 2")));
    }
    if n_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::validation("n_list", "must be strictly increasing"));
    }
    Ok(())
}

/// One solve per `n` with kernel `Regularized{alpha, n}`, run concurrently.
/// Results are in the order of `n_list`.
pub fn run_family(
    sys: &ParticleSystem,
    n_list: &[u64],
    config: &SolverConfig,
) -> Result<Vec<PiecewiseTrajectory>> {
    check_n_list(n_list)?;
    config.validate()?;
    let alpha = sys
        .kernel()
        .alpha()
        .ok_or_else(|| Error::domain("the regularized family needs a kernel with an exponent alpha"))?;
    let results: Vec<Result<PiecewiseTrajectory>> = std::thread::scope(|scope| {
        let handles: Vec<_> = n_list
            .iter()
            .map(|&n| {
                scope.spawn(move || {
                    let member = sys.clone().with_kernel(WeightKernel::regularized(alpha, n)?);
                    solve_piecewise(&member, config).map_err(|e| Error::Family {
                        n,
                        source: Box::new(e),
                    })
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("solver thread panicked"))
            .collect()
    });
    results.into_iter().collect()
}

fn sup_gap(a: &[&Sample], b: &[&Sample], len: usize) -> (f64, f64) {
    let mut dx: f64 = 0.0;
    let mut dv: f64 = 0.0;
    for k in 0..len {
        for (p, q) in a[k].x.iter().zip(&b[k].x) {
            dx = dx.max((p - q).abs());
        }
        for (p, q) in a[k].v.iter().zip(&b[k].v) {
            dv = dv.max((p - q).abs());
        }
    }
    (dx, dv)
}

/// Sup-norm gaps over the common grid samples.
pub fn cauchy_table(trajectories: &[PiecewiseTrajectory], n_list: &[u64]) -> Result<ConvergenceReport> {
    if trajectories.len() < 2 {
        return Err(Error::GridMismatch(format!(
            "need at least 2 trajectories, got {}",
            trajectories.len()
        )));
    }
    if trajectories.len() != n_list.len() {
        return Err(Error::GridMismatch(format!(
            "{} trajectories for {} values of n",
            trajectories.len(),
            n_list.len()
        )));
    }
    let grids: Vec<Vec<&Sample>> = trajectories.iter().map(|t| t.grid_samples()).collect();
    let len = grids.iter().map(Vec::len).min().unwrap_or(0);
    if len == 0 {
        return Err(Error::GridMismatch("no common grid samples".into()));
    }
    for g in &grids[1..] {
        for k in 0..len {
            if g[k].grid != grids[0][k].grid || g[k].t != grids[0][k].t || g[k].x.len() != grids[0][k].x.len() {
                return Err(Error::GridMismatch(format!(
                    "sample {k} at t = {} vs t = {}",
                    grids[0][k].t, g[k].t
                )));
            }
        }
    }
    let last = grids.len() - 1;
    let mut report = ConvergenceReport {
        n_list: n_list.to_vec(),
        sup_dx: vec![None],
        sup_dv: vec![None],
        reference_gap_x: Vec::new(),
        reference_gap_v: Vec::new(),
    };
    for k in 0..grids.len() {
        if k > 0 {
            let (dx, dv) = sup_gap(&grids[k - 1], &grids[k], len);
            report.sup_dx.push(Some(dx));
            report.sup_dv.push(Some(dv));
        }
        let (rx, rv) = sup_gap(&grids[k], &grids[last], len);
        report.reference_gap_x.push(rx);
        report.reference_gap_v.push(rv);
    }
    Ok(report)
}
