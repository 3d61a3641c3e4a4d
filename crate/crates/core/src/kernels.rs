//! Communication weights.
//!
//! Three families are supported: the singular weight `s^-alpha`, its
//! regularization at level `n` (capped at `n`, joined to the singular branch
//! by a monotone C¹ cubic Hermite bridge), and the bounded Cucker–Smale
//! weight `K (1 + s²)^(-beta/2)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum WeightKernel {
    Singular { alpha: f64 },
    Regularized { alpha: f64, n: u64 },
    CuckerSmale { k: f64, beta: f64 },
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha.is_finite() && alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidKernel(format!("alpha = {alpha} must lie in (0, 1)")))
    }
}

fn check_distance(s: f64) -> Result<()> {
    if s.is_finite() && s >= 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("distance {s} must be finite and nonnegative")))
    }
}

impl WeightKernel {
    pub fn singular(alpha: f64) -> Result<Self> {
        let kernel = WeightKernel::Singular { alpha };
        kernel.validate()?;
        Ok(kernel)
    }

    pub fn regularized(alpha: f64, n: u64) -> Result<Self> {
        let kernel = WeightKernel::Regularized { alpha, n };
        kernel.validate()?;
        Ok(kernel)
    }

    pub fn cucker_smale(k: f64, beta: f64) -> Result<Self> {
        let kernel = WeightKernel::CuckerSmale { k, beta };
        kernel.validate()?;
        Ok(kernel)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            WeightKernel::Singular { alpha } => check_alpha(alpha),
            WeightKernel::Regularized { alpha, n } => {
                check_alpha(alpha)?;
                if n < 2 {
                    return Err(Error::InvalidKernel(format!(
                        "regularization level n = {n} must be at least 2"
                    )));
                }
                Ok(())
            }
            WeightKernel::CuckerSmale { k, beta } => {
                if !(k.is_finite() && k > 0.0) {
                    return Err(Error::InvalidKernel(format!("K = {k} must be positive")));
                }
                if !(beta.is_finite() && beta >= 0.0) {
                    return Err(Error::InvalidKernel(format!(
                        "beta = {beta} must be nonnegative"
                    )));
                }
                Ok(())
            }
        }
    }

    /// Exponent of the singularity at the origin, if the kernel has one.
    pub fn alpha(&self) -> Option<f64> {
        match *self {
            WeightKernel::Singular { alpha } | WeightKernel::Regularized { alpha, .. } => {
                Some(alpha)
            }
            WeightKernel::CuckerSmale { .. } => None,
        }
    }

    /// Supremum of the weight over `[0, ∞)`; `None` for the singular weight.
    pub fn sup(&self) -> Option<f64> {
        match *self {
            WeightKernel::Singular { .. } => None,
            WeightKernel::Regularized { n, .. } => Some(n as f64),
            WeightKernel::CuckerSmale { k, .. } => Some(k),
        }
    }

    /// The kernel the solver integrates with: singular weights are replaced by
    /// their regularization at level `n_reg`, bounded kernels are used as given.
    pub fn working(&self, n_reg: u64) -> WeightKernel {
        match *self {
            WeightKernel::Singular { alpha } => WeightKernel::Regularized { alpha, n: n_reg },
            other => other,
        }
    }

    pub fn eval_weight(&self, s: f64) -> Result<f64> {
        self.validate()?;
        check_distance(s)?;
        Ok(PreparedKernel::new(*self).weight(s))
    }
}

/// A kernel with its branch points precomputed, for repeated evaluation.
#[derive(Clone, Copy, Debug)]
pub struct PreparedKernel {
    kernel: WeightKernel,
    form: Form,
}

#[derive(Clone, Copy, Debug)]
enum Form {
    Singular {
        alpha: f64,
    },
    Regularized {
        alpha: f64,
        cap: f64,
        // bridge interval [lo, hi]
        lo: f64,
        hi: f64,
        hi_value: f64,
        hi_slope: f64,
    },
    CuckerSmale {
        k: f64,
        half_beta: f64,
    },
}

impl PreparedKernel {
    pub fn new(kernel: WeightKernel) -> Self {
        let form = match kernel {
            WeightKernel::Singular { alpha } => Form::Singular { alpha },
            WeightKernel::Regularized { alpha, n } => {
                let cap = n as f64;
                let lo = cap.powf(-1.0 / alpha);
                let hi = (cap - 1.0).powf(-1.0 / alpha);
                let hi_value = hi.powf(-alpha);
                Form::Regularized {
                    alpha,
                    cap,
                    lo,
                    hi,
                    hi_value,
                    hi_slope: -alpha * hi_value / hi,
                }
            }
            WeightKernel::CuckerSmale { k, beta } => Form::CuckerSmale {
                k,
                half_beta: 0.5 * beta,
            },
        };
        PreparedKernel { kernel, form }
    }

    pub fn kernel(&self) -> WeightKernel {
        self.kernel
    }

    /// Weight at distance `s >= 0`. No domain checks.
    #[inline]
    pub fn weight(&self, s: f64) -> f64 {
        match self.form {
            Form::Singular { alpha } => {
                if s > 0.0 {
                    s.powf(-alpha)
                } else {
                    0.0
                }
            }
            Form::Regularized {
                alpha,
                cap,
                lo,
                hi,
                hi_value,
                hi_slope,
            } => {
                if s >= hi {
                    s.powf(-alpha)
                } else if s <= lo {
                    cap
                } else {
                    let width = hi - lo;
                    let t = (s - lo) / width;
                    let t2 = t * t;
                    let t3 = t2 * t;
                    let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
                    let h01 = -2.0 * t3 + 3.0 * t2;
                    let h11 = t3 - t2;
                    h00 * cap + h01 * hi_value + h11 * width * hi_slope
                }
            }
            Form::CuckerSmale { k, half_beta } => k * (1.0 + s * s).powf(-half_beta),
        }
    }

    /// Left and right ends of the bridge for regularized kernels.
    pub fn bridge(&self) -> Option<(f64, f64)> {
        match self.form {
            Form::Regularized { lo, hi, .. } => Some((lo, hi)),
            _ => None,
        }
    }
}

/// The primitive `Ψ(s) = s^(1-alpha) / (1 - alpha)` of the singular weight.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Primitive {
    alpha: f64,
}

impl Primitive {
    pub fn new(alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(Primitive { alpha })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn eval_primitive(&self, s: f64) -> Result<f64> {
        check_distance(s)?;
        Ok(self.value(s))
    }

    #[inline]
    pub(crate) fn value(&self, s: f64) -> f64 {
        let exponent = 1.0 - self.alpha;
        s.powf(exponent) / exponent
    }

    /// Inverse of `Ψ` on `[0, ∞)`.
    pub(crate) fn inverse(&self, y: f64) -> f64 {
        let exponent = 1.0 - self.alpha;
        (exponent * y).powf(1.0 / exponent)
    }
}
