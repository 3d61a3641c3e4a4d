//! The two-particle problem.
//!
//! For two particles the separation `φ = x₂ - x₁` obeys
//! `φ'' = -2 φ' ψ(|φ|)`, which integrates once to `φ' + 2Ψ(φ) = c`. The sign
//! of `c` decides the outcome: `c > 0` approaches a positive limit distance,
//! `c = 0` meets with matching velocities in finite time, `c < 0` collides
//! with relative speed `|c|`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{PreparedKernel, Primitive, WeightKernel};
use crate::ode::{Rhs, Stepper};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoBodyProblem {
    pub phi0: f64,
    pub dphi0: f64,
    pub alpha: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum TwoBodyOutcome {
    StickFiniteTime { t0: f64 },
    CollideNonstick { impact_speed: f64, t_hit: f64 },
    /// `phi_limit` is infinite for separating data.
    NoCollision { phi_limit: f64 },
}

impl TwoBodyOutcome {
    pub fn name(&self) -> &'static str {
        match self {
            TwoBodyOutcome::StickFiniteTime { .. } => "StickFiniteTime",
            TwoBodyOutcome::CollideNonstick { .. } => "CollideNonstick",
            TwoBodyOutcome::NoCollision { .. } => "NoCollision",
        }
    }
}

fn check_phi0(phi0: f64) -> Result<()> {
    if phi0.is_finite() && phi0 > 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("initial separation {phi0} must be positive")))
    }
}

impl TwoBodyProblem {
    pub fn new(phi0: f64, dphi0: f64, alpha: f64) -> Result<Self> {
        check_phi0(phi0)?;
        if !dphi0.is_finite() {
            return Err(Error::NonFinite("initial relative velocity"));
        }
        Primitive::new(alpha)?;
        Ok(TwoBodyProblem { phi0, dphi0, alpha })
    }

    /// The constant `φ' + 2Ψ(φ)` along the orbit.
    pub fn energy(&self) -> f64 {
        2.0 * Primitive::new(self.alpha).expect("validated").value(self.phi0) + self.dphi0
    }
}

/// `φ'(0)` that makes the pair stick in finite time: `-2Ψ(φ(0))`.
pub fn critical_velocity(phi0: f64, alpha: f64) -> Result<f64> {
    check_phi0(phi0)?;
    Ok(-2.0 * Primitive::new(alpha)?.value(phi0))
}

/// Meeting time on the critical orbit, `(1-α) φ₀^α / (2α)`.
pub fn stick_time(phi0: f64, alpha: f64) -> Result<f64> {
    check_phi0(phi0)?;
    Primitive::new(alpha)?;
    Ok((1.0 - alpha) * phi0.powf(alpha) / (2.0 * alpha))
}

/// Separation on the critical orbit, `(φ₀^α - 2α t/(1-α))^(1/α)`.
pub fn phi_critical(phi0: f64, alpha: f64, t: f64) -> Result<f64> {
    let t0 = stick_time(phi0, alpha)?;
    if !(t >= 0.0 && t <= t0) {
        return Err(Error::domain(format!("t = {t} outside [0, {t0}]")));
    }
    let base = phi0.powf(alpha) - 2.0 * alpha / (1.0 - alpha) * t;
    Ok(base.max(0.0).powf(1.0 / alpha))
}

/// Adaptive Simpson quadrature.
pub(crate) fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn rec<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let diff = left + right - whole;
        if depth == 0 || diff.abs() <= 15.0 * tol {
            return left + right + diff / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 50)
}

pub fn classify(problem: &TwoBodyProblem) -> Result<TwoBodyOutcome> {
    let p = TwoBodyProblem::new(problem.phi0, problem.dphi0, problem.alpha)?;
    if p.dphi0 > 0.0 {
        return Ok(TwoBodyOutcome::NoCollision {
            phi_limit: f64::INFINITY,
        });
    }
    let psi = Primitive::new(p.alpha)?;
    let two_psi0 = 2.0 * psi.value(p.phi0);
    let c = two_psi0 + p.dphi0;
    let scale = two_psi0.max(p.dphi0.abs()).max(1.0);
    if c.abs() <= 1e-12 * scale {
        return Ok(TwoBodyOutcome::StickFiniteTime {
            t0: stick_time(p.phi0, p.alpha)?,
        });
    }
    if c > 0.0 {
        return Ok(TwoBodyOutcome::NoCollision {
            phi_limit: psi.inverse(0.5 * c),
        });
    }
    let speed = -c;
    let t_hit = simpson(&|phi: f64| 1.0 / (speed + 2.0 * psi.value(phi)), 0.0, p.phi0, 1e-10);
    Ok(TwoBodyOutcome::CollideNonstick {
        impact_speed: speed,
        t_hit,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelRecord {
    pub n: u32,
    /// First time the separation reaches `2^(1-n) φ₀`.
    pub t_n: f64,
    /// `t_n - t_{n-1}` in real time.
    pub real_gap: f64,
    /// The same gap in the rescaled variables where the bound is stated.
    pub gap: f64,
    pub bound: f64,
    pub ok: bool,
}

/// Checks the dyadic level-time gaps of the critical orbit against
/// `((1-α) ln 2 / 2) · 2^(α(1-n))`.
///
/// Time is rescaled by `(2φ₀)^α` and space by `2φ₀`, which maps the critical
/// orbit to the one starting at separation `1/2`; level `n` is separation
/// `2^(-n)` there, so `t₁ = 0`.
pub fn level_time_bound_check(phi0: f64, alpha: f64, n_max: u32) -> Result<Vec<LevelRecord>> {
    check_phi0(phi0)?;
    Primitive::new(alpha)?;
    if n_max < 2 {
        return Err(Error::domain(format!("n_max = {n_max} must be at least 2")));
    }
    let k = 2.0 * alpha / (1.0 - alpha);
    let time_scale = (2.0 * phi0).powf(alpha);
    let tau = |n: u32| (2f64.powf(-alpha) - 2f64.powf(-(n as f64) * alpha)) / k;
    let mut out = Vec::with_capacity(n_max as usize - 1);
    for n in 2..=n_max {
        let gap = tau(n) - tau(n - 1);
        let bound = (1.0 - alpha) * std::f64::consts::LN_2 / 2.0 * 2f64.powf(alpha * (1.0 - n as f64));
        out.push(LevelRecord {
            n,
            t_n: time_scale * tau(n),
            real_gap: time_scale * gap,
            gap,
            bound,
            ok: gap <= bound,
        });
    }
    Ok(out)
}

struct Separation {
    kernel: PreparedKernel,
}

impl Rhs for Separation {
    fn eval(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
        dy[0] = y[1];
        dy[1] = -2.0 * y[1] * self.kernel.weight(y[0].abs());
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrbitSample {
    pub t: f64,
    pub phi: f64,
    pub dphi: f64,
}

/// Integrates `φ'' = -2 φ' ψ(|φ|)` on `[0, t_end]`, sampling every accepted
/// step and every multiple of `sample_dt`.
pub fn integrate_orbit(
    kernel: WeightKernel,
    phi0: f64,
    dphi0: f64,
    t_end: f64,
    sample_dt: f64,
    rel_tol: f64,
    abs_tol: f64,
) -> Result<Vec<OrbitSample>> {
    kernel.validate()?;
    for (name, v) in [("t_end", t_end), ("sample_dt", sample_dt), ("rel_tol", rel_tol), ("abs_tol", abs_tol)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::domain(format!("{name} = {v} must be positive")));
        }
    }
    let f = Separation {
        kernel: PreparedKernel::new(kernel),
    };
    let mut st = Stepper::new(&f, 0.0, vec![phi0, dphi0], rel_tol, abs_tol, 1e-14 * t_end, t_end);
    let mut out = vec![OrbitSample {
        t: 0.0,
        phi: phi0,
        dphi: dphi0,
    }];
    let mut k = 1u64;
    let mut buf = [0.0; 2];
    while st.t < t_end {
        st.step(&f, t_end)?;
        loop {
            let tk = k as f64 * sample_dt;
            if tk >= st.t {
                break;
            }
            st.dense.eval(tk, &mut buf);
            out.push(OrbitSample {
                t: tk,
                phi: buf[0],
                dphi: buf[1],
            });
            k += 1;
        }
        out.push(OrbitSample {
            t: st.t,
            phi: st.y[0],
            dphi: st.y[1],
        });
        if k as f64 * sample_dt == st.t {
            k += 1;
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FloorCheck {
    pub min_ratio: f64,
    pub ok: bool,
}

/// With a bounded weight `ψ ≤ K`, `|φ'(t)| ≥ e^(-2Kt) |φ'(0)|`: the relative
/// velocity can decay at most exponentially.
pub fn bounded_weight_floor_check(
    phi0: f64,
    dphi0: f64,
    k: f64,
    beta: f64,
    t_end: f64,
) -> Result<FloorCheck> {
    check_phi0(phi0)?;
    if dphi0 == 0.0 || !dphi0.is_finite() {
        return Err(Error::domain("initial relative velocity must be nonzero"));
    }
    let kernel = WeightKernel::cucker_smale(k, beta)?;
    let orbit = integrate_orbit(kernel, phi0, dphi0, t_end, 1e-3, 1e-12, 1e-14)?;
    let min_ratio = orbit
        .iter()
        .map(|s| s.dphi.abs() / ((-2.0 * s.t * k).exp() * dphi0.abs()))
        .fold(f64::INFINITY, f64::min);
    Ok(FloorCheck {
        min_ratio,
        ok: min_ratio >= 1.0 - 1e-6,
    })
}
