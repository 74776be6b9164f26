//! Beta distribution primitives: log-beta, the regularized incomplete beta
//! function and the upper tail probability used as the decision statistic.

use crate::error::{Error, Result};

const CF_MAX_ITER: usize = 1000;
const CF_EPS: f64 = 1e-16;
const CF_TINY: f64 = 1e-300;

/// Shape parameters of a beta distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaShape {
    pub alpha: f64,
    pub beta: f64,
}

impl BetaShape {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && beta > 0.0) || !alpha.is_finite() || !beta.is_finite() {
            return Err(Error::Domain("beta shape parameters must be positive and finite"));
        }
        Ok(Self { alpha, beta })
    }

    /// The uniform Beta(1, 1) prior.
    pub const fn uniform() -> Self {
        Self { alpha: 1.0, beta: 1.0 }
    }

    pub fn mean(&self) -> f64 {
        beta_mean(*self)
    }

    /// Log density at `x`; `-inf` outside the support.
    pub fn ln_pdf(&self, x: f64) -> f64 {
        self.ln_pdf_with_norm(x, log_beta_unchecked(self.alpha, self.beta))
    }

    pub fn pdf(&self, x: f64) -> f64 {
        libm::exp(self.ln_pdf(x))
    }

    /// Log density with a precomputed `ln B(alpha, beta)`.
    pub(crate) fn ln_pdf_with_norm(&self, x: f64, ln_norm: f64) -> f64 {
        if !(0.0..=1.0).contains(&x) {
            return f64::NEG_INFINITY;
        }
        let left = if self.alpha == 1.0 {
            0.0
        } else if x == 0.0 {
            return if self.alpha < 1.0 { f64::INFINITY } else { f64::NEG_INFINITY };
        } else {
            (self.alpha - 1.0) * libm::log(x)
        };
        let right = if self.beta == 1.0 {
            0.0
        } else if x == 1.0 {
            return if self.beta < 1.0 { f64::INFINITY } else { f64::NEG_INFINITY };
        } else {
            (self.beta - 1.0) * libm::log1p(-x)
        };
        left + right - ln_norm
    }
}

/// `ln B(a, b)` computed from log-gamma.
pub fn log_beta_function(a: f64, b: f64) -> Result<f64> {
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::Domain("log-beta arguments must be positive"));
    }
    Ok(log_beta_unchecked(a, b))
}

#[inline]
pub(crate) fn log_beta_unchecked(a: f64, b: f64) -> f64 {
    libm::lgamma(a) + libm::lgamma(b) - libm::lgamma(a + b)
}

pub fn beta_mean(shape: BetaShape) -> f64 {
    shape.alpha / (shape.alpha + shape.beta)
}

/// Upper tail `Pr(X > x)` for `X ~ Beta(alpha, beta)`, i.e. `1 - I_x(alpha, beta)`.
pub fn beta_tail(shape: BetaShape, x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain("tail threshold must lie in [0, 1]"));
    }
    let BetaShape { alpha: a, beta: b } = shape;
    if x == 0.0 {
        return Ok(1.0);
    }
    if x == 1.0 {
        return Ok(0.0);
    }
    // The continued fraction converges fast below the mean; switch sides above it.
    let tail = if x > (a + 1.0) / (a + b + 2.0) {
        incomplete_beta_cf(b, a, 1.0 - x)?
    } else {
        1.0 - incomplete_beta_cf(a, b, x)?
    };
    Ok(tail.clamp(0.0, 1.0))
}

/// Regularized incomplete beta `I_x(a, b)`.
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> Result<f64> {
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::Domain("incomplete beta shape parameters must be positive"));
    }
    Ok(1.0 - beta_tail(BetaShape { alpha: a, beta: b }, x)?)
}

/// `I_x(a, b)` by the modified Lentz evaluation of the continued fraction.
/// Accurate for `x < (a + 1) / (a + b + 2)`.
fn incomplete_beta_cf(a: f64, b: f64, x: f64) -> Result<f64> {
    let ln_prefix = a * libm::log(x) + b * libm::log1p(-x) - log_beta_unchecked(a, b);
    let prefix = libm::exp(ln_prefix) / a;

    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;

    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < CF_TINY {
        d = CF_TINY;
    }
    d = 1.0 / d;
    let mut f = d;

    for m in 1..=CF_MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;

        let even = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + even * d;
        if d.abs() < CF_TINY {
            d = CF_TINY;
        }
        c = 1.0 + even / c;
        if c.abs() < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        f *= d * c;

        let odd = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + odd * d;
        if d.abs() < CF_TINY {
            d = CF_TINY;
        }
        c = 1.0 + odd / c;
        if c.abs() < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        f *= delta;

        if (delta - 1.0).abs() < CF_EPS {
            return Ok(prefix * f);
        }
    }
    Err(Error::Numeric { estimate: prefix * f, error: f64::NAN })
}
