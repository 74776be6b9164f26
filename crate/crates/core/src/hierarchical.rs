//! Hierarchical log-odds models fitted by Metropolis-within-Gibbs.
//!
//! BHM: `theta_k = logit(p_k) - logit(p_targ,k)`, `theta_k ~ N(mu, sigma^2)`.
//! EXNEX: `theta_k = logit(p_k)` is exchangeable (`N(mu, sigma^2)`) with
//! probability `q` and otherwise follows its own `N(m_k, v_k)`.
//! Both use `mu ~ N(m0, s0^2)` and a half-normal prior with scale `phi` on `sigma`.
//!
//! Each sweep updates the EX/NEX indicators (Gibbs), every `theta_k` (random
//! walk), `mu` (conjugate normal), `log sigma` (random walk), and then applies a
//! joint shift of `mu` and the exchangeable `theta`s and a joint rescaling of
//! `sigma` and their deviations from `mu`. The two joint moves keep the chain
//! mixing when the data are weak and `mu`, `sigma` and `theta` are strongly
//! coupled. Proposal scales adapt during burn-in and are frozen afterwards.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::data::{BasketData, NullRate};
use crate::error::{Error, Result};

const TARGET_ACCEPTANCE: f64 = 0.4;
const ADAPT_BATCH: usize = 50;

pub fn logit(p: f64) -> f64 {
    libm::log(p) - libm::log1p(-p)
}

pub fn expit(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

#[inline]
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + libm::log1p(libm::exp(-x))
    } else {
        libm::log1p(libm::exp(x))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalPrior {
    pub mean: f64,
    pub sd: f64,
}

impl NormalPrior {
    fn log_kernel(&self, x: f64) -> f64 {
        let z = (x - self.mean) / self.sd;
        -0.5 * z * z
    }
}

/// BHM hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct BhmParams {
    pub target_rates: Vec<f64>,
    pub mu_prior: NormalPrior,
    /// Half-normal scale of the prior on `sigma`.
    pub phi: f64,
}

impl BhmParams {
    pub const MU_PRIOR: NormalPrior = NormalPrior { mean: -1.1156, sd: 100.0 };
    pub const TARGET_RATE: f64 = 0.35;

    /// Common target rate 0.35 and the weakly informative `N(-1.1156, 100^2)` prior on `mu`.
    pub fn new(baskets: usize, phi: f64) -> Self {
        Self { target_rates: alloc::vec![Self::TARGET_RATE; baskets], mu_prior: Self::MU_PRIOR, phi }
    }

    pub fn validate(&self, baskets: usize) -> Result<()> {
        if self.target_rates.len() != baskets {
            return Err(Error::Config("one target rate per basket required"));
        }
        if self.target_rates.iter().any(|p| !(*p > 0.0 && *p < 1.0)) {
            return Err(Error::Config("target rates must lie in (0, 1)"));
        }
        validate_common(self.mu_prior, self.phi)
    }
}

/// EXNEX hyperparameters with a common EX probability `q`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExnexParams {
    pub mu_prior: NormalPrior,
    pub phi: f64,
    pub q: f64,
    pub nex_means: Vec<f64>,
    pub nex_sds: Vec<f64>,
}

impl ExnexParams {
    pub const MU_PRIOR: NormalPrior = NormalPrior { mean: -1.7346, sd: 100.0 };

    /// `N(-1.7346, 100^2)` for `mu` and for every NEX component.
    pub fn new(baskets: usize, phi: f64, q: f64) -> Self {
        Self {
            mu_prior: Self::MU_PRIOR,
            phi,
            q,
            nex_means: alloc::vec![Self::MU_PRIOR.mean; baskets],
            nex_sds: alloc::vec![Self::MU_PRIOR.sd; baskets],
        }
    }

    pub fn validate(&self, baskets: usize) -> Result<()> {
        if self.nex_means.len() != baskets || self.nex_sds.len() != baskets {
            return Err(Error::Config("one NEX prior per basket required"));
        }
        if self.nex_sds.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::Config("NEX standard deviations must be positive"));
        }
        if !(0.0..=1.0).contains(&self.q) {
            return Err(Error::Config("EX probability must lie in [0, 1]"));
        }
        validate_common(self.mu_prior, self.phi)
    }
}

fn validate_common(mu_prior: NormalPrior, phi: f64) -> Result<()> {
    if !(mu_prior.sd > 0.0) || !mu_prior.mean.is_finite() {
        return Err(Error::Config("mu prior needs a finite mean and positive sd"));
    }
    if !(phi > 0.0) || !phi.is_finite() {
        return Err(Error::Config("phi must be positive"));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McmcConfig {
    /// Iterations including burn-in.
    pub total_samples: usize,
    /// The first `total_samples / burn_in_divisor` iterations are discarded.
    pub burn_in_divisor: usize,
    pub seed: u64,
    /// Initial random-walk scale of each `theta_k`.
    pub theta_scale: f64,
    /// Initial random-walk scale of `log sigma`.
    pub log_sigma_scale: f64,
    /// Initial scale of the joint shift move.
    pub shift_scale: f64,
    /// Initial scale of the joint rescaling move (log scale).
    pub rescale_scale: f64,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self {
            total_samples: 10_000,
            burn_in_divisor: 3,
            seed: 0,
            theta_scale: 0.5,
            log_sigma_scale: 0.5,
            shift_scale: 0.5,
            rescale_scale: 0.5,
        }
    }
}

impl McmcConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self { seed, ..Self::default() }
    }

    pub fn burn_in(&self) -> usize {
        self.total_samples / self.burn_in_divisor.max(1)
    }

    pub fn retained(&self) -> usize {
        self.total_samples - self.burn_in()
    }

    fn validate(&self) -> Result<()> {
        if self.retained() == 0 || self.burn_in_divisor == 0 {
            return Err(Error::Config("MCMC run keeps no samples"));
        }
        let scales = [self.theta_scale, self.log_sigma_scale, self.shift_scale, self.rescale_scale];
        if scales.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::Config("proposal scales must be positive"));
        }
        Ok(())
    }
}

/// Posterior summaries of one chain.
#[derive(Debug, Clone, PartialEq)]
pub struct McmcOutput {
    /// `Pr(p_k > p0 | D)` estimated from retained samples.
    pub tail_probs: Vec<f64>,
    /// Posterior means of `p_k`.
    pub posterior_means: Vec<f64>,
    pub theta_means: Vec<f64>,
    pub mu_mean: f64,
    /// Batch-means Monte Carlo standard error of `mu_mean`.
    pub mu_mcse: f64,
    pub sigma_mean: f64,
    pub sigma_min: f64,
    /// Posterior probability of the EX component (all 1 for BHM).
    pub ex_probs: Vec<f64>,
    /// Post-burn-in acceptance rates: each `theta_k`, then `log sigma`.
    pub acceptance: Vec<f64>,
    /// Set when an acceptance rate left `[0.05, 0.95]` after adaptation.
    pub acceptance_warning: bool,
}

enum Model<'a> {
    Bhm { offsets: Vec<f64> },
    Exnex { q: f64, nex_means: &'a [f64], nex_sds: &'a [f64] },
}

struct Adaptive {
    log_scale: f64,
    accepted: usize,
    tried: usize,
    kept_accepted: usize,
    kept_tried: usize,
}

impl Adaptive {
    fn new(scale: f64) -> Self {
        Self { log_scale: libm::log(scale), accepted: 0, tried: 0, kept_accepted: 0, kept_tried: 0 }
    }

    fn scale(&self) -> f64 {
        libm::exp(self.log_scale)
    }

    fn record(&mut self, accepted: bool, burning: bool) {
        if burning {
            self.tried += 1;
            self.accepted += accepted as usize;
            if self.tried == ADAPT_BATCH {
                let rate = self.accepted as f64 / self.tried as f64;
                self.log_scale += rate - TARGET_ACCEPTANCE;
                self.tried = 0;
                self.accepted = 0;
            }
        } else {
            self.kept_tried += 1;
            self.kept_accepted += accepted as usize;
        }
    }

    fn rate(&self) -> f64 {
        if self.kept_tried == 0 {
            f64::NAN
        } else {
            self.kept_accepted as f64 / self.kept_tried as f64
        }
    }
}

fn accept(rng: &mut ChaCha8Rng, log_ratio: f64) -> bool {
    let u: f64 = rng.random();
    log_ratio >= 0.0 || libm::log(u) < log_ratio
}

/// Fraction of samples strictly above `threshold`.
pub fn tail_from_chain(chain: &[f64], threshold: f64) -> Result<f64> {
    if chain.is_empty() {
        return Err(Error::Domain("empty chain"));
    }
    Ok(chain.iter().filter(|&&p| p > threshold).count() as f64 / chain.len() as f64)
}

pub fn bhm_posterior(
    data: &BasketData,
    params: &BhmParams,
    mcmc: &McmcConfig,
    p0: NullRate,
) -> Result<McmcOutput> {
    params.validate(data.len())?;
    let offsets = params.target_rates.iter().map(|&p| logit(p)).collect();
    sample(data, Model::Bhm { offsets }, params.mu_prior, params.phi, mcmc, p0)
}

pub fn exnex_posterior(
    data: &BasketData,
    params: &ExnexParams,
    mcmc: &McmcConfig,
    p0: NullRate,
) -> Result<McmcOutput> {
    params.validate(data.len())?;
    let model = Model::Exnex { q: params.q, nex_means: &params.nex_means, nex_sds: &params.nex_sds };
    sample(data, model, params.mu_prior, params.phi, mcmc, p0)
}

fn sample(
    data: &BasketData,
    model: Model<'_>,
    mu_prior: NormalPrior,
    phi: f64,
    mcmc: &McmcConfig,
    p0: NullRate,
) -> Result<McmcOutput> {
    mcmc.validate()?;
    let k = data.len();
    let mut rng = ChaCha8Rng::seed_from_u64(mcmc.seed);
    let responses: Vec<f64> = data.iter().map(|b| b.responses as f64).collect();
    let sizes: Vec<f64> = data.iter().map(|b| b.size as f64).collect();
    let offsets: Vec<f64> = match &model {
        Model::Bhm { offsets } => offsets.clone(),
        Model::Exnex { .. } => alloc::vec![0.0; k],
    };
    let loglik = |j: usize, theta: f64| -> f64 {
        if sizes[j] == 0.0 {
            return 0.0;
        }
        let eta = theta + offsets[j];
        responses[j] * eta - sizes[j] * softplus(eta)
    };
    let inv_two_phi2 = 0.5 / (phi * phi);
    let p0_logit = logit(p0.get());

    let mut theta: Vec<f64> = (0..k)
        .map(|j| logit((responses[j] + 0.5) / (sizes[j] + 1.0)) - offsets[j])
        .collect();
    let mut lik: Vec<f64> = (0..k).map(|j| loglik(j, theta[j])).collect();
    let mut mu = theta.iter().sum::<f64>() / k as f64;
    let mut sigma = phi;
    let mut ex = alloc::vec![true; k];

    let mut theta_prop: Vec<Adaptive> = (0..k).map(|_| Adaptive::new(mcmc.theta_scale)).collect();
    let mut sigma_prop = Adaptive::new(mcmc.log_sigma_scale);
    let mut shift_prop = Adaptive::new(mcmc.shift_scale);
    let mut rescale_prop = Adaptive::new(mcmc.rescale_scale);

    let burn_in = mcmc.burn_in();
    let kept = mcmc.retained();
    let mut above = alloc::vec![0usize; k];
    let mut p_sum = alloc::vec![0.0; k];
    let mut theta_sum = alloc::vec![0.0; k];
    let mut ex_count = alloc::vec![0usize; k];
    let mut mu_trace = Vec::with_capacity(kept);
    let mut sigma_sum = 0.0;
    let mut sigma_min = f64::INFINITY;
    let mut new_theta = alloc::vec![0.0; k];
    let mut new_lik = alloc::vec![0.0; k];

    for iter in 0..mcmc.total_samples {
        let burning = iter < burn_in;

        // EX/NEX indicators.
        if let Model::Exnex { q, nex_means, nex_sds } = &model {
            for j in 0..k {
                ex[j] = if *q >= 1.0 {
                    true
                } else if *q <= 0.0 {
                    false
                } else {
                    let z_ex = (theta[j] - mu) / sigma;
                    let z_nex = (theta[j] - nex_means[j]) / nex_sds[j];
                    let log_ex = libm::log(*q) - libm::log(sigma) - 0.5 * z_ex * z_ex;
                    let log_nex = libm::log1p(-*q) - libm::log(nex_sds[j]) - 0.5 * z_nex * z_nex;
                    let p_ex = expit(log_ex - log_nex);
                    let u: f64 = rng.random();
                    u < p_ex
                };
            }
        }

        // theta_k random walks.
        for j in 0..k {
            let step: f64 = rng.sample(StandardNormal);
            let prop = theta[j] + theta_prop[j].scale() * step;
            let prop_lik = loglik(j, prop);
            let prior_diff = if ex[j] {
                let (a, b) = ((prop - mu) / sigma, (theta[j] - mu) / sigma);
                -0.5 * (a * a - b * b)
            } else if let Model::Exnex { nex_means, nex_sds, .. } = &model {
                let (a, b) = ((prop - nex_means[j]) / nex_sds[j], (theta[j] - nex_means[j]) / nex_sds[j]);
                -0.5 * (a * a - b * b)
            } else {
                unreachable!("BHM baskets are always exchangeable")
            };
            let ok = accept(&mut rng, prop_lik - lik[j] + prior_diff);
            if ok {
                theta[j] = prop;
                lik[j] = prop_lik;
            }
            theta_prop[j].record(ok, burning);
        }

        // mu | theta, sigma.
        let (mut n_ex, mut sum_ex) = (0usize, 0.0);
        for j in 0..k {
            if ex[j] {
                n_ex += 1;
                sum_ex += theta[j];
            }
        }
        {
            let prior_prec = 1.0 / (mu_prior.sd * mu_prior.sd);
            let prec = prior_prec + n_ex as f64 / (sigma * sigma);
            let mean = (mu_prior.mean * prior_prec + sum_ex / (sigma * sigma)) / prec;
            let z: f64 = rng.sample(StandardNormal);
            mu = mean + z / libm::sqrt(prec);
        }

        // log sigma random walk.
        {
            let ss: f64 = (0..k).filter(|&j| ex[j]).map(|j| (theta[j] - mu) * (theta[j] - mu)).sum();
            let log_target = |s: f64| -> f64 {
                -(n_ex as f64) * libm::log(s) - 0.5 * ss / (s * s) - s * s * inv_two_phi2 + libm::log(s)
            };
            let step: f64 = rng.sample(StandardNormal);
            let prop = sigma * libm::exp(sigma_prop.scale() * step);
            let ok = prop > 0.0 && prop.is_finite() && accept(&mut rng, log_target(prop) - log_target(sigma));
            if ok {
                sigma = prop;
            }
            sigma_prop.record(ok, burning);
        }

        // Joint shift of mu and the exchangeable thetas.
        if n_ex > 0 {
            let step: f64 = rng.sample(StandardNormal);
            let delta = shift_prop.scale() * step;
            let mut diff = mu_prior.log_kernel(mu + delta) - mu_prior.log_kernel(mu);
            for j in 0..k {
                if ex[j] {
                    new_theta[j] = theta[j] + delta;
                    new_lik[j] = loglik(j, new_theta[j]);
                    diff += new_lik[j] - lik[j];
                }
            }
            let ok = accept(&mut rng, diff);
            if ok {
                mu += delta;
                for j in 0..k {
                    if ex[j] {
                        theta[j] = new_theta[j];
                        lik[j] = new_lik[j];
                    }
                }
            }
            shift_prop.record(ok, burning);

            // Joint rescaling of sigma and the deviations theta - mu. The normal
            // terms and the Jacobian of the theta map cancel.
            let step: f64 = rng.sample(StandardNormal);
            let log_c = rescale_prop.scale() * step;
            let c = libm::exp(log_c);
            let prop_sigma = sigma * c;
            if prop_sigma > 0.0 && prop_sigma.is_finite() {
                let mut diff = log_c - (prop_sigma * prop_sigma - sigma * sigma) * inv_two_phi2;
                for j in 0..k {
                    if ex[j] {
                        new_theta[j] = mu + c * (theta[j] - mu);
                        new_lik[j] = loglik(j, new_theta[j]);
                        diff += new_lik[j] - lik[j];
                    }
                }
                let ok = accept(&mut rng, diff);
                if ok {
                    sigma = prop_sigma;
                    for j in 0..k {
                        if ex[j] {
                            theta[j] = new_theta[j];
                            lik[j] = new_lik[j];
                        }
                    }
                }
                rescale_prop.record(ok, burning);
            }
        }

        if !burning {
            for j in 0..k {
                let eta = theta[j] + offsets[j];
                if eta > p0_logit {
                    above[j] += 1;
                }
                p_sum[j] += expit(eta);
                theta_sum[j] += theta[j];
                ex_count[j] += ex[j] as usize;
            }
            mu_trace.push(mu);
            sigma_sum += sigma;
            sigma_min = sigma_min.min(sigma);
        }
    }

    let n = kept as f64;
    let mut acceptance: Vec<f64> = theta_prop.iter().map(Adaptive::rate).collect();
    acceptance.push(sigma_prop.rate());
    let acceptance_warning = acceptance.iter().any(|r| !(0.05..=0.95).contains(r));
    let mu_mean = mu_trace.iter().sum::<f64>() / n;
    Ok(McmcOutput {
        tail_probs: above.iter().map(|&c| c as f64 / n).collect(),
        posterior_means: p_sum.iter().map(|s| s / n).collect(),
        theta_means: theta_sum.iter().map(|s| s / n).collect(),
        mu_mean,
        mu_mcse: batch_means_se(&mu_trace, mu_mean),
        sigma_mean: sigma_sum / n,
        sigma_min,
        ex_probs: ex_count.iter().map(|&c| c as f64 / n).collect(),
        acceptance,
        acceptance_warning,
    })
}

/// Standard error of a chain mean from 20 non-overlapping batches.
fn batch_means_se(trace: &[f64], mean: f64) -> f64 {
    const BATCHES: usize = 20;
    let size = trace.len() / BATCHES;
    if size == 0 {
        return f64::NAN;
    }
    let mut ss = 0.0;
    for b in 0..BATCHES {
        let m = trace[b * size..(b + 1) * size].iter().sum::<f64>() / size as f64;
        ss += (m - mean) * (m - mean);
    }
    libm::sqrt(ss / (BATCHES - 1) as f64 / BATCHES as f64)
}
