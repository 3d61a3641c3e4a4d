#![allow(dead_code)]

use flock::scenario::{standard_suite, two_body_system, SuiteCase};
use flock::{solve_piecewise, PiecewiseTrajectory, SolverConfig, WeightKernel};

pub fn config(t_end: f64, sample_dt: f64) -> SolverConfig {
    SolverConfig {
        t_end,
        sample_dt,
        ..SolverConfig::default()
    }
}

pub fn two_body(phi0: f64, dphi0: f64, alpha: f64, t_end: f64, sample_dt: f64) -> PiecewiseTrajectory {
    let sys = two_body_system(phi0, dphi0, WeightKernel::singular(alpha).unwrap()).unwrap();
    solve_piecewise(&sys, &config(t_end, sample_dt)).unwrap()
}

/// Separation of the two particles at every sample.
pub fn separation(traj: &PiecewiseTrajectory) -> Vec<(f64, f64)> {
    traj.samples().map(|s| (s.t, (s.x[1] - s.x[0]).abs())).collect()
}

pub fn random_suite() -> Vec<(SuiteCase, PiecewiseTrajectory)> {
    standard_suite(20)
        .into_iter()
        .map(|case| {
            let sys = case.system().unwrap();
            let traj = solve_piecewise(&sys, &config(5.0, 1e-2)).unwrap();
            (case, traj)
        })
        .collect()
}

/// Fixed-step RK4 on `φ'' = -2 φ' |φ|^-α` from `(phi0, dphi0)`. Returns the
/// first step time at which the gap drops below `floor`, the closing speed
/// drops below `1e-15 |dphi0|`, or the gap stops closing; `None` if none of
/// these happens before `t_max`.
pub fn brute_force_contact(phi0: f64, dphi0: f64, alpha: f64, h: f64, t_max: f64, floor: f64) -> Option<f64> {
    let f = |y: [f64; 2]| [y[1], -2.0 * y[1] * y[0].abs().powf(-alpha)];
    let mut y = [phi0, dphi0];
    let steps = (t_max / h).ceil() as u64;
    for k in 0..steps {
        let k1 = f(y);
        let k2 = f([y[0] + 0.5 * h * k1[0], y[1] + 0.5 * h * k1[1]]);
        let k3 = f([y[0] + 0.5 * h * k2[0], y[1] + 0.5 * h * k2[1]]);
        let k4 = f([y[0] + h * k3[0], y[1] + h * k3[1]]);
        for c in 0..2 {
            y[c] += h / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
        }
        if !(y[0].is_finite() && y[1].is_finite()) || y[0] <= floor || y[1] >= -1e-15 * dphi0.abs() {
            return Some((k + 1) as f64 * h);
        }
    }
    None
}

/// Fixed-step RK4 state `(φ, φ')` at time `t`.
pub fn brute_force_state(phi0: f64, dphi0: f64, alpha: f64, h: f64, t: f64) -> [f64; 2] {
    let f = |y: [f64; 2]| [y[1], -2.0 * y[1] * y[0].abs().powf(-alpha)];
    let mut y = [phi0, dphi0];
    let steps = (t / h).round() as u64;
    let h = t / steps as f64;
    for _ in 0..steps {
        let k1 = f(y);
        let k2 = f([y[0] + 0.5 * h * k1[0], y[1] + 0.5 * h * k1[1]]);
        let k3 = f([y[0] + 0.5 * h * k2[0], y[1] + 0.5 * h * k2[1]]);
        let k4 = f([y[0] + h * k3[0], y[1] + h * k3[1]]);
        for c in 0..2 {
            y[c] += h / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
        }
    }
    y
}
