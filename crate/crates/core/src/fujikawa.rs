//! Fujikawa's design: basket-wise beta-binomial posteriors are compared by
//! Jensen-Shannon divergence, turned into weights `(1 - JSD)^eps` (zeroed at
//! or below `tau`), and combined by a weighted sum of posterior parameters.
//! Unlike the power prior, the sum includes the other baskets' priors.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::f64::consts::LN_2;

use crate::beta::{log_beta_unchecked, BetaShape};
use crate::data::{BasketData, WeightMatrix};
use crate::error::{Error, Result};
use crate::quad::Integrator;

const TRUNCATION: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FujikawaParams {
    pub epsilon: f64,
    pub tau: f64,
}

impl FujikawaParams {
    pub fn new(epsilon: f64, tau: f64) -> Result<Self> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(Error::Config("epsilon must be positive"));
        }
        if !(0.0..=1.0).contains(&tau) {
            return Err(Error::Config("tau must lie in [0, 1]"));
        }
        Ok(Self { epsilon, tau })
    }
}

/// Conjugate posterior of each basket on its own.
pub fn individual_posteriors(data: &BasketData, priors: &[BetaShape]) -> Result<Vec<BetaShape>> {
    if priors.len() != data.len() {
        return Err(Error::Config("one prior per basket required"));
    }
    Ok(data
        .iter()
        .zip(priors)
        .map(|(d, p)| BetaShape {
            alpha: p.alpha + d.responses as f64,
            beta: p.beta + d.failures() as f64,
        })
        .collect())
}

#[inline]
fn softplus(x: f64) -> f64 {
    if x > 36.0 {
        x
    } else {
        libm::log1p(libm::exp(x))
    }
}

/// `w log2(w / m)` with `m = (w + q) / 2`, from log densities.
#[inline]
fn kl_term(lw: f64, lq: f64) -> f64 {
    if lw == f64::NEG_INFINITY {
        return 0.0;
    }
    let w = libm::exp(lw);
    if w == 0.0 {
        return 0.0;
    }
    if lq == f64::NEG_INFINITY {
        return w;
    }
    w * (1.0 - softplus(lq - lw) / LN_2)
}

/// Jensen-Shannon divergence with base-2 logarithms, so the result lies in `[0, 1]`.
pub fn jsd(f: BetaShape, g: BetaShape) -> Result<f64> {
    if f == g {
        return Ok(0.0);
    }
    let (nf, ng) = (log_beta_unchecked(f.alpha, f.beta), log_beta_unchecked(g.alpha, g.beta));
    let value = Integrator::default().integrate(
        |x| {
            let lw = f.ln_pdf_with_norm(x, nf);
            let lq = g.ln_pdf_with_norm(x, ng);
            0.5 * (kl_term(lw, lq) + kl_term(lq, lw))
        },
        TRUNCATION,
        1.0 - TRUNCATION,
    )?;
    Ok(value.clamp(0.0, 1.0))
}

fn shape_key(f: BetaShape, g: BetaShape) -> [u64; 4] {
    let a = [f.alpha.to_bits(), f.beta.to_bits()];
    let b = [g.alpha.to_bits(), g.beta.to_bits()];
    if a <= b {
        [a[0], a[1], b[0], b[1]]
    } else {
        [b[0], b[1], a[0], a[1]]
    }
}

/// Memo of divergences keyed by the unordered pair of shapes.
#[derive(Debug, Default, Clone)]
pub struct JsdMemo {
    values: BTreeMap<[u64; 4], f64>,
}

impl JsdMemo {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn jsd(&mut self, f: BetaShape, g: BetaShape) -> Result<f64> {
        let key = shape_key(f, g);
        if let Some(&v) = self.values.get(&key) {
            return Ok(v);
        }
        // Evaluate in canonical order so the cached value is order independent.
        let (x, y) = if [f.alpha.to_bits(), f.beta.to_bits()] <= [g.alpha.to_bits(), g.beta.to_bits()] {
            (f, g)
        } else {
            (g, f)
        };
        let v = jsd(x, y)?;
        self.values.insert(key, v);
        Ok(v)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Weight from a divergence: `(1 - jsd)^eps` when it exceeds `tau`, else 0.
pub fn weight_from_jsd(divergence: f64, params: FujikawaParams) -> f64 {
    let w = libm::pow(1.0 - divergence, params.epsilon);
    if w > params.tau {
        w
    } else {
        0.0
    }
}

pub fn fujikawa_weights(posteriors: &[BetaShape], params: FujikawaParams) -> Result<WeightMatrix> {
    fujikawa_weights_memo(posteriors, params, &mut JsdMemo::new())
}

pub fn fujikawa_weights_memo(
    posteriors: &[BetaShape],
    params: FujikawaParams,
    memo: &mut JsdMemo,
) -> Result<WeightMatrix> {
    let k = posteriors.len();
    let mut upper = alloc::vec![0.0; k * k];
    for r in 0..k {
        for c in r + 1..k {
            upper[r * k + c] = weight_from_jsd(memo.jsd(posteriors[r], posteriors[c])?, params);
        }
    }
    Ok(WeightMatrix::from_fn(k, |r, c| if r < c { upper[r * k + c] } else { upper[c * k + r] }))
}

/// `Beta(sum_i w[k][i] (s1_i + r_i), sum_i w[k][i] (s2_i + n_i - r_i))`.
pub fn fujikawa_posterior(
    data: &BasketData,
    priors: &[BetaShape],
    weights: &WeightMatrix,
) -> Result<Vec<BetaShape>> {
    let individual = individual_posteriors(data, priors)?;
    if weights.dim() != individual.len() {
        return Err(Error::Config("weight matrix and data disagree in basket count"));
    }
    Ok((0..individual.len())
        .map(|row| {
            let (mut alpha, mut beta) = (0.0, 0.0);
            for (w, s) in weights.row(row).iter().zip(&individual) {
                alpha += w * s.alpha;
                beta += w * s.beta;
            }
            BetaShape { alpha, beta }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shape(a: f64, b: f64) -> BetaShape {
        BetaShape::new(a, b).unwrap()
    }

    #[test]
    fn conjugate_updates() {
        let d = BasketData::from_counts(&[0, 5, 2], &[0, 10, 30]).unwrap();
        let priors = [BetaShape::uniform(), BetaShape::uniform(), shape(2.0, 3.0)];
        let post = individual_posteriors(&d, &priors).unwrap();
        assert_eq!(post, [shape(1.0, 1.0), shape(6.0, 6.0), shape(4.0, 31.0)]);
    }

    #[test]
    fn jsd_identical_is_zero() {
        assert_eq!(jsd(shape(6.0, 6.0), shape(6.0, 6.0)).unwrap(), 0.0);
    }

    #[test]
    fn jsd_is_symmetric_and_bounded() {
        let (f, g) = (shape(3.0, 9.0), shape(11.0, 4.0));
        let a = jsd(f, g).unwrap();
        let b = jsd(g, f).unwrap();
        assert!((a - b).abs() < 1e-9);
        assert!(a > 0.0 && a < 1.0);
    }

    #[test]
    fn weights_threshold_is_strict() {
        let p = FujikawaParams::new(1.0, 0.75).unwrap();
        assert_eq!(weight_from_jsd(0.25, p), 0.0);
        assert!(weight_from_jsd(0.2, p) > 0.75);
        let p = FujikawaParams::new(2.5, 0.2).unwrap();
        assert_eq!(weight_from_jsd(0.0, p), 1.0);
    }

    #[test]
    fn identical_posteriors_borrow_fully() {
        let post = [shape(4.0, 8.0); 3];
        let w = fujikawa_weights(&post, FujikawaParams::new(3.0, 0.5).unwrap()).unwrap();
        for k in 0..3 {
            for i in 0..3 {
                assert_eq!(w.get(k, i), 1.0);
            }
        }
    }

    #[test]
    fn posterior_hand_example() {
        let d = BasketData::from_counts(&[3, 4], &[10, 10]).unwrap();
        let w = WeightMatrix::from_rows(2, alloc::vec![1.0, 0.5, 0.5, 1.0]).unwrap();
        let post = fujikawa_posterior(&d, &[BetaShape::uniform(); 2], &w).unwrap();
        assert_eq!(post[0], shape(6.5, 11.5));
    }

    #[test]
    fn memo_reuses_values() {
        let mut memo = JsdMemo::new();
        let (f, g) = (shape(2.0, 9.0), shape(5.0, 5.0));
        let a = memo.jsd(f, g).unwrap();
        let b = memo.jsd(g, f).unwrap();
        assert_eq!(a, b);
        assert_eq!(memo.len(), 1);
    }

    #[test]
    fn invalid_params() {
        assert!(FujikawaParams::new(0.0, 0.1).is_err());
        assert!(FujikawaParams::new(1.0, 1.1).is_err());
    }
}
