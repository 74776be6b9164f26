//! Power prior borrowing: calibrated (CPP), adaptive (APP) and limited
//! calibrated (LCPP) weights, and the weighted beta-binomial posterior.
//!
//! Basket `k` borrows the likelihood of basket `i` raised to the power
//! `w[k][i]`. With a `Beta(s1, s2)` prior this gives
//! `Beta(s1 + sum_i w[k][i] r_i, s2 + sum_i w[k][i] (n_i - r_i))`.

use alloc::vec::Vec;

use crate::beta::{log_beta_unchecked, BetaShape};
use crate::data::{Basket, BasketData, WeightMatrix};
use crate::error::{Error, Result};

/// Tuning parameters of the logistic CPP weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CppParams {
    pub a: f64,
    pub b: f64,
}

impl CppParams {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(b > 0.0) || !a.is_finite() || !b.is_finite() {
            return Err(Error::Config("CPP requires finite a and b > 0"));
        }
        Ok(Self { a, b })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    Cpp,
    App,
    Lcpp,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerPriorWeights {
    pub matrix: WeightMatrix,
    pub variant: Variant,
}

/// Absolute difference of the observed response rates.
pub fn ks_statistic(d_k: Basket, d_i: Basket) -> Result<f64> {
    match (d_k.rate(), d_i.rate()) {
        (Some(x), Some(y)) => Ok((x - y).abs()),
        _ => Err(Error::Domain("rate difference needs nonempty baskets")),
    }
}

/// `1 / (1 + exp(a + b ln S))` with `S = max(n_k, n_i)^{1/4} |r_k/n_k - r_i/n_i|`.
pub fn cpp_weight(d_k: Basket, d_i: Basket, params: CppParams) -> Result<f64> {
    let s_ks = ks_statistic(d_k, d_i)?;
    if s_ks == 0.0 {
        // ln S -> -inf with b > 0.
        return Ok(1.0);
    }
    let scale = libm::pow(d_k.size.max(d_i.size) as f64, 0.25);
    let s = scale * s_ks;
    let z = params.a + params.b * libm::log(s);
    Ok(logistic_complement(z))
}

#[inline]
fn logistic_complement(z: f64) -> f64 {
    if z > 0.0 {
        let e = libm::exp(-z);
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + libm::exp(z))
    }
}

/// Upper limit on borrowing from basket `i` into basket `k`.
pub fn alpha0(n_k: u32, n_i: u32) -> f64 {
    if n_k >= n_i {
        1.0
    } else {
        n_k as f64 / n_i as f64
    }
}

/// The normalized, powered binomial likelihood of `own` when compared with a
/// basket of size `other_size`: exponent `min(1, other_size / own.size)`
/// applied to `p^r (1-p)^(n-r)` gives `Beta(w r + 1, w (n - r) + 1)`.
pub fn downweighted_shape(own: Basket, other_size: u32) -> BetaShape {
    let w = if own.size == 0 || other_size >= own.size {
        1.0
    } else {
        other_size as f64 / own.size as f64
    };
    BetaShape {
        alpha: w * own.responses as f64 + 1.0,
        beta: w * own.failures() as f64 + 1.0,
    }
}

/// Squared Hellinger distance between two beta densities,
/// `1 - B((a1+a2)/2, (b1+b2)/2) / sqrt(B(a1,b1) B(a2,b2))`.
pub fn hellinger_squared(f: BetaShape, g: BetaShape) -> f64 {
    let ln_bc = log_beta_unchecked(0.5 * (f.alpha + g.alpha), 0.5 * (f.beta + g.beta))
        - 0.5 * log_beta_unchecked(f.alpha, f.beta)
        - 0.5 * log_beta_unchecked(g.alpha, g.beta);
    1.0 - libm::exp(ln_bc)
}

/// Commensurability `gamma = sqrt(d^2)` between two baskets' downweighted likelihoods.
pub fn hellinger_gamma(d_k: Basket, d_i: Basket) -> f64 {
    let f = downweighted_shape(d_k, d_i.size);
    let g = downweighted_shape(d_i, d_k.size);
    // d^2 can round slightly below zero for near-identical shapes.
    libm::sqrt(hellinger_squared(f, g).clamp(0.0, 1.0))
}

/// APP weight `alpha0 (1 - gamma)`.
pub fn app_weight(d_k: Basket, d_i: Basket) -> f64 {
    alpha0(d_k.size, d_i.size) * (1.0 - hellinger_gamma(d_k, d_i))
}

/// LCPP weight `alpha0 * w_cpp`.
pub fn lcpp_weight(d_k: Basket, d_i: Basket, params: CppParams) -> Result<f64> {
    Ok(alpha0(d_k.size, d_i.size) * cpp_weight(d_k, d_i, params)?)
}

pub fn build_weights(
    data: &BasketData,
    variant: Variant,
    cpp_params: Option<CppParams>,
) -> Result<PowerPriorWeights> {
    let k = data.len();
    let matrix = match (variant, cpp_params) {
        (Variant::App, None) => WeightMatrix::from_fn(k, |r, c| app_weight(data[r], data[c])),
        (Variant::App, Some(_)) => return Err(Error::Config("APP takes no tuning parameters")),
        (Variant::Cpp | Variant::Lcpp, None) => {
            return Err(Error::Config("CPP and LCPP weights need (a, b)"));
        }
        (Variant::Cpp, Some(p)) => {
            // Symmetric: evaluate the upper triangle once.
            let mut upper = alloc::vec![0.0; k * k];
            for r in 0..k {
                for c in r + 1..k {
                    upper[r * k + c] = cpp_weight(data[r], data[c], p)?;
                }
            }
            WeightMatrix::from_fn(k, |r, c| if r < c { upper[r * k + c] } else { upper[c * k + r] })
        }
        (Variant::Lcpp, Some(p)) => {
            let mut w = alloc::vec![0.0; k * k];
            for r in 0..k {
                for c in r + 1..k {
                    let cpp = cpp_weight(data[r], data[c], p)?;
                    w[r * k + c] = alpha0(data[r].size, data[c].size) * cpp;
                    w[c * k + r] = alpha0(data[c].size, data[r].size) * cpp;
                }
            }
            WeightMatrix::from_fn(k, |r, c| w[r * k + c])
        }
    };
    Ok(PowerPriorWeights { matrix, variant })
}

/// Weighted beta-binomial posterior of every basket. Only the basket's own
/// prior enters; other baskets contribute data alone.
pub fn power_prior_posterior(
    data: &BasketData,
    weights: &WeightMatrix,
    priors: &[BetaShape],
) -> Result<Vec<BetaShape>> {
    let k = data.len();
    if weights.dim() != k || priors.len() != k {
        return Err(Error::Config("weights, priors and data disagree in basket count"));
    }
    Ok((0..k)
        .map(|row| {
            let (mut succ, mut fail) = (0.0, 0.0);
            for (w, b) in weights.row(row).iter().zip(data.iter()) {
                succ += w * b.responses as f64;
                fail += w * b.failures() as f64;
            }
            BetaShape { alpha: priors[row].alpha + succ, beta: priors[row].beta + fail }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(r: u32, n: u32) -> Basket {
        Basket::new(r, n).unwrap()
    }

    #[test]
    fn ks_examples() {
        assert_eq!(ks_statistic(b(3, 10), b(3, 10)).unwrap(), 0.0);
        assert!((ks_statistic(b(6, 20), b(2, 20)).unwrap() - 0.2).abs() < 1e-15);
        assert_eq!(ks_statistic(b(1, 10), b(5, 50)).unwrap(), 0.0);
        assert!(ks_statistic(b(0, 0), b(1, 2)).is_err());
    }

    #[test]
    fn cpp_identical_data_is_full_borrowing() {
        for &(a, bb) in &[(0.5, 0.5), (4.0, 4.5), (-3.0, 10.0)] {
            let p = CppParams::new(a, bb).unwrap();
            assert_eq!(cpp_weight(b(3, 10), b(3, 10), p).unwrap(), 1.0);
        }
    }

    #[test]
    fn cpp_large_difference_vanishes() {
        let p = CppParams::new(4.0, 4.5).unwrap();
        let w = cpp_weight(b(0, 1_000_000), b(1_000_000, 1_000_000), p).unwrap();
        assert!(w < 1e-8);
    }

    #[test]
    fn cpp_requires_positive_b() {
        assert!(CppParams::new(1.0, 0.0).is_err());
        assert!(CppParams::new(1.0, -1.0).is_err());
    }

    #[test]
    fn alpha0_examples() {
        assert_eq!(alpha0(30, 10), 1.0);
        assert!((alpha0(10, 50) - 0.2).abs() < 1e-15);
        assert_eq!(alpha0(25, 25), 1.0);
    }

    #[test]
    fn hellinger_identical_is_zero() {
        assert_eq!(hellinger_gamma(b(4, 20), b(4, 20)), 0.0);
    }

    #[test]
    fn downweighting_hits_the_larger_basket() {
        // The n = 20 basket is downweighted by 10/20; the n = 10 basket is not.
        assert_eq!(downweighted_shape(b(4, 20), 10), BetaShape { alpha: 3.0, beta: 9.0 });
        assert_eq!(downweighted_shape(b(2, 10), 20), BetaShape { alpha: 3.0, beta: 9.0 });
        assert!(hellinger_gamma(b(4, 20), b(2, 10)) < 1e-7);
    }

    #[test]
    fn missing_parameters_rejected() {
        let d = BasketData::from_counts(&[1, 2], &[10, 10]).unwrap();
        assert!(matches!(build_weights(&d, Variant::Cpp, None), Err(Error::Config(_))));
        assert!(matches!(build_weights(&d, Variant::Lcpp, None), Err(Error::Config(_))));
        let p = CppParams::new(1.0, 1.0).unwrap();
        assert!(matches!(build_weights(&d, Variant::App, Some(p)), Err(Error::Config(_))));
    }

    #[test]
    fn app_identical_baskets_borrow_fully() {
        let d = BasketData::from_counts(&[3, 3, 3], &[10, 10, 10]).unwrap();
        let w = build_weights(&d, Variant::App, None).unwrap();
        for k in 0..3 {
            for i in 0..3 {
                assert_eq!(w.matrix.get(k, i), 1.0);
            }
        }
    }

    #[test]
    fn lcpp_limits_by_size_ratio() {
        let d = BasketData::from_counts(&[2, 10], &[10, 50]).unwrap();
        let p = CppParams::new(3.0, 4.5).unwrap();
        let cpp = build_weights(&d, Variant::Cpp, Some(p)).unwrap();
        let lcpp = build_weights(&d, Variant::Lcpp, Some(p)).unwrap();
        let base = cpp.matrix.get(0, 1);
        assert_eq!(base, 1.0);
        assert!((lcpp.matrix.get(0, 1) - 0.2 * base).abs() < 1e-15);
        assert_eq!(lcpp.matrix.get(1, 0), base);
    }

    #[test]
    fn posterior_hand_example() {
        let d = BasketData::from_counts(&[3, 4], &[10, 10]).unwrap();
        let w = WeightMatrix::from_rows(2, alloc::vec![1.0, 0.5, 0.5, 1.0]).unwrap();
        let post = power_prior_posterior(&d, &w, &[BetaShape::uniform(); 2]).unwrap();
        assert_eq!(post[0], BetaShape { alpha: 6.0, beta: 11.0 });
    }

    #[test]
    fn posterior_dimension_mismatch() {
        let d = BasketData::from_counts(&[3, 4], &[10, 10]).unwrap();
        let w = WeightMatrix::identity(3);
        assert!(power_prior_posterior(&d, &w, &[BetaShape::uniform(); 2]).is_err());
    }
}
