//! Dormand–Prince 5(4) with step-size control and 4th-order dense output.

use crate::error::{Error, Result};

/// Right-hand side `dy = f(t, y)`.
pub(crate) trait Rhs {
    fn eval(&self, t: f64, y: &[f64], dy: &mut [f64]);
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 5.0;

/// Continuous extension of the last accepted step.
#[derive(Clone, Debug, Default)]
pub(crate) struct Dense {
    pub t0: f64,
    pub h: f64,
    pub y0: Vec<f64>,
    k1: Vec<f64>,
    r: [Vec<f64>; 4],
}

impl Dense {
    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }

    pub fn eval(&self, t: f64, out: &mut [f64]) {
        let theta = if self.h == 0.0 { 0.0 } else { (t - self.t0) / self.h };
        let theta1 = 1.0 - theta;
        let [r2, r3, r4, r5] = &self.r;
        for i in 0..out.len() {
            out[i] = self.y0[i]
                + theta * (r2[i] + theta1 * (r3[i] + theta * (r4[i] + theta1 * r5[i])));
        }
    }
}

pub(crate) struct Stepper {
    pub t: f64,
    pub y: Vec<f64>,
    k1: Vec<f64>,
    h: f64,
    rel_tol: f64,
    abs_tol: f64,
    h_min: f64,
    pub dense: Dense,
    k: [Vec<f64>; 6],
    ytmp: Vec<f64>,
    ynew: Vec<f64>,
    k7: Vec<f64>,
}

fn norm_scaled(v: &[f64], y: &[f64], rel_tol: f64, abs_tol: f64) -> f64 {
    v.iter()
        .zip(y)
        .map(|(a, b)| (a / (abs_tol + rel_tol * b.abs())).abs())
        .fold(0.0, f64::max)
}

impl Stepper {
    pub fn new<F: Rhs>(
        f: &F,
        t0: f64,
        y0: Vec<f64>,
        rel_tol: f64,
        abs_tol: f64,
        h_min: f64,
        h_max: f64,
    ) -> Self {
        let m = y0.len();
        let mut k1 = vec![0.0; m];
        f.eval(t0, &y0, &mut k1);
        let mut s = Stepper {
            t: t0,
            y: y0,
            k1,
            h: 0.0,
            rel_tol,
            abs_tol,
            h_min,
            dense: Dense::default(),
            k: std::array::from_fn(|_| vec![0.0; m]),
            ytmp: vec![0.0; m],
            ynew: vec![0.0; m],
            k7: vec![0.0; m],
        };
        s.h = s.initial_step(f, h_max);
        s
    }

    fn initial_step<F: Rhs>(&mut self, f: &F, h_max: f64) -> f64 {
        let d0 = norm_scaled(&self.y, &self.y, self.rel_tol, self.abs_tol);
        let d1 = norm_scaled(&self.k1, &self.y, self.rel_tol, self.abs_tol);
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        let h0 = h0.min(h_max);
        for i in 0..self.y.len() {
            self.ytmp[i] = self.y[i] + h0 * self.k1[i];
        }
        f.eval(self.t + h0, &self.ytmp, &mut self.k7);
        let diff: Vec<f64> = self.k7.iter().zip(&self.k1).map(|(a, b)| a - b).collect();
        let d2 = norm_scaled(&diff, &self.y, self.rel_tol, self.abs_tol) / h0;
        let dm = d1.max(d2);
        let h1 = if dm <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / dm).powf(0.2)
        };
        (100.0 * h0).min(h1).min(h_max).max(self.h_min)
    }

    /// Runs the stages from `(t, y, k1)` with step `h`, leaving the new state in
    /// `ynew`, the end slope in `k7`, and returning the scaled error.
    fn stages<F: Rhs>(&mut self, f: &F, t: f64, h: f64) -> f64 {
        let m = self.y.len();
        let y = &self.y;
        let k1 = &self.k1;
        let [k2, k3, k4, k5, k6, _] = &mut self.k;
        let ytmp = &mut self.ytmp;
        for i in 0..m {
            ytmp[i] = y[i] + h * A21 * k1[i];
        }
        f.eval(t + C2 * h, ytmp, k2);
        for i in 0..m {
            ytmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        f.eval(t + C3 * h, ytmp, k3);
        for i in 0..m {
            ytmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        f.eval(t + C4 * h, ytmp, k4);
        for i in 0..m {
            ytmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        f.eval(t + C5 * h, ytmp, k5);
        for i in 0..m {
            ytmp[i] = y[i]
                + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        f.eval(t + h, ytmp, k6);
        for i in 0..m {
            self.ynew[i] = y[i]
                + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        f.eval(t + h, &self.ynew, &mut self.k7);
        let mut err: f64 = 0.0;
        for i in 0..m {
            let e = h
                * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i]
                    + E7 * self.k7[i]);
            let sc = self.abs_tol + self.rel_tol * y[i].abs().max(self.ynew[i].abs());
            err = err.max((e / sc).abs());
        }
        err
    }

    /// Stores the dense output of the step just computed and moves to its end.
    fn accept(&mut self, t: f64, h: f64) {
        let m = self.y.len();
        let d = &mut self.dense;
        d.t0 = t;
        d.h = h;
        d.y0.clone_from(&self.y);
        d.k1.clone_from(&self.k1);
        for r in d.r.iter_mut() {
            r.resize(m, 0.0);
        }
        let [_, k3, k4, k5, k6, _] = &self.k;
        for i in 0..m {
            let ydiff = self.ynew[i] - self.y[i];
            let bspl = h * self.k1[i] - ydiff;
            d.r[0][i] = ydiff;
            d.r[1][i] = bspl;
            d.r[2][i] = ydiff - h * self.k7[i] - bspl;
            d.r[3][i] = h
                * (D1 * self.k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i]
                    + D7 * self.k7[i]);
        }
        self.t = t + h;
        std::mem::swap(&mut self.y, &mut self.ynew);
        std::mem::swap(&mut self.k1, &mut self.k7);
    }

    /// Takes one accepted step, never passing `t_limit`.
    pub fn step<F: Rhs>(&mut self, f: &F, t_limit: f64) -> Result<()> {
        let t = self.t;
        let mut rejected = false;
        loop {
            let remaining = t_limit - t;
            let mut h = self.h.min(remaining);
            // avoid leaving a sliver at the end
            if remaining - h < 1e-3 * h {
                h = remaining;
            }
            if h < self.h_min && h < remaining {
                return Err(Error::StepUnderflow { t, h });
            }
            let err = self.stages(f, t, h);
            if !err.is_finite() {
                if self.ynew.iter().any(|c| !c.is_finite()) && h <= self.h_min {
                    return Err(Error::Divergence { t });
                }
                self.h = h * FAC_MIN;
                rejected = true;
                if self.h < self.h_min {
                    return Err(Error::Divergence { t });
                }
                continue;
            }
            let fac = if err == 0.0 {
                FAC_MAX
            } else {
                (SAFETY * err.powf(-0.2)).clamp(FAC_MIN, FAC_MAX)
            };
            if err <= 1.0 {
                let next = if rejected { (h * fac).min(h) } else { h * fac };
                // keep the proposed step when the last one was clipped short
                self.h = if h < self.h && fac >= 1.0 { self.h } else { next };
                self.accept(t, h);
                if self.y.iter().any(|c| !c.is_finite()) {
                    return Err(Error::Divergence { t: self.t });
                }
                return Ok(());
            }
            rejected = true;
            self.h = h * fac;
        }
    }

    /// Replaces the last accepted step by an uncontrolled step from its start
    /// to `t`, so the state lands exactly on `t`.
    pub fn land<F: Rhs>(&mut self, f: &F, t: f64) {
        let t0 = self.dense.t0;
        let h = t - t0;
        self.t = t0;
        std::mem::swap(&mut self.y, &mut self.dense.y0);
        std::mem::swap(&mut self.k1, &mut self.dense.k1);
        self.stages(f, t0, h);
        self.accept(t0, h);
    }
}
