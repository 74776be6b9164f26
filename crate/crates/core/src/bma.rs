//! Bayesian model averaging over set partitions of the baskets.
//!
//! Each partition is a model in which baskets of the same block share one
//! response rate. Models get prior weight `exp(C psi)` for `C` blocks and are
//! averaged with their posterior probabilities.

use alloc::vec::Vec;

use crate::beta::{beta_mean, beta_tail, log_beta_unchecked, BetaShape};
use crate::data::{BasketData, NullRate};
use crate::error::{Error, Result};

pub const MAX_BASKETS: usize = 12;

/// A set partition stored as a restricted growth string: basket `k` belongs to
/// block `labels[k]`, and blocks are numbered in order of first appearance.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Partition {
    labels: Vec<u8>,
    blocks: u8,
}

impl Partition {
    pub fn from_labels(labels: Vec<u8>) -> Result<Self> {
        let mut next = 0u8;
        for &l in &labels {
            if l > next {
                return Err(Error::Domain("labels are not a restricted growth string"));
            }
            if l == next {
                next += 1;
            }
        }
        Ok(Self { labels, blocks: next })
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    /// Number of distinct response rates in the model.
    pub fn block_count(&self) -> usize {
        self.blocks as usize
    }

    /// Basket membership of each block as bit masks.
    pub fn block_masks(&self) -> Vec<u16> {
        let mut masks = alloc::vec![0u16; self.block_count()];
        for (k, &l) in self.labels.iter().enumerate() {
            masks[l as usize] |= 1 << k;
        }
        masks
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BmaParams {
    pub psi: f64,
}

/// All set partitions of `k` baskets in lexicographic restricted-growth order.
pub fn enumerate_partitions(k: usize) -> Result<Vec<Partition>> {
    if k < 2 {
        return Err(Error::Domain("model averaging needs at least two baskets"));
    }
    if k > MAX_BASKETS {
        return Err(Error::Config("too many baskets for exhaustive model enumeration"));
    }
    let mut out = Vec::new();
    let mut labels = alloc::vec![0u8; k];
    // maxes[i] = largest label among labels[..i]
    let mut maxes = alloc::vec![0u8; k];
    loop {
        let blocks = labels.iter().copied().max().unwrap_or(0) + 1;
        out.push(Partition { labels: labels.clone(), blocks });
        // Increment the rightmost position that can still grow.
        let mut i = k - 1;
        loop {
            if i == 0 {
                return Ok(out);
            }
            if labels[i] <= maxes[i] {
                labels[i] += 1;
                for j in i + 1..k {
                    labels[j] = 0;
                    maxes[j] = maxes[j - 1].max(labels[j - 1]);
                }
                break;
            }
            i -= 1;
        }
    }
}

fn block_shape(mask: u16, data: &BasketData, prior: BetaShape) -> BetaShape {
    let (mut r, mut n) = (0u32, 0u32);
    for (k, b) in data.iter().enumerate() {
        if mask & (1 << k) != 0 {
            r += b.responses;
            n += b.size;
        }
    }
    BetaShape { alpha: prior.alpha + r as f64, beta: prior.beta + (n - r) as f64 }
}

fn block_log_marginal(mask: u16, data: &BasketData, prior: BetaShape) -> f64 {
    let post = block_shape(mask, data, prior);
    log_beta_unchecked(post.alpha, post.beta) - log_beta_unchecked(prior.alpha, prior.beta)
}

/// Beta-binomial log marginal likelihood of a partition model, without the
/// binomial coefficients (they are the same for every model).
pub fn log_marginal_likelihood(partition: &Partition, data: &BasketData, prior: BetaShape) -> Result<f64> {
    if partition.labels.len() != data.len() {
        return Err(Error::Config("partition and data disagree in basket count"));
    }
    Ok(partition.block_masks().into_iter().map(|m| block_log_marginal(m, data, prior)).sum())
}

/// Normalize log weights with log-sum-exp.
fn normalize_log(weights: &mut [f64]) {
    let max = weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for w in weights.iter_mut() {
        *w = libm::exp(*w - max);
        total += *w;
    }
    for w in weights.iter_mut() {
        *w /= total;
    }
}

/// Posterior probabilities and averaged summaries for one data set.
#[derive(Debug, Clone, PartialEq)]
pub struct BmaSummary {
    pub model_probs: Vec<f64>,
    pub tail_probs: Vec<f64>,
    pub posterior_means: Vec<f64>,
}

/// The enumerated model space for a fixed number of baskets.
#[derive(Debug, Clone)]
pub struct ModelSpace {
    k: usize,
    partitions: Vec<Partition>,
    masks: Vec<Vec<u16>>,
}

impl ModelSpace {
    pub fn new(k: usize) -> Result<Self> {
        let partitions = enumerate_partitions(k)?;
        let masks = partitions.iter().map(Partition::block_masks).collect();
        Ok(Self { k, partitions, masks })
    }

    pub fn baskets(&self) -> usize {
        self.k
    }

    pub fn partitions(&self) -> &[Partition] {
        &self.partitions
    }

    pub fn analyze(
        &self,
        data: &BasketData,
        params: BmaParams,
        prior: BetaShape,
        p0: NullRate,
    ) -> Result<BmaSummary> {
        if data.len() != self.k {
            return Err(Error::Config("model space and data disagree in basket count"));
        }
        // Block statistics depend only on the block, so compute each subset once.
        let subsets = 1usize << self.k;
        let mut log_ml = alloc::vec![f64::NAN; subsets];
        let mut tail = alloc::vec![f64::NAN; subsets];
        let mut mean = alloc::vec![f64::NAN; subsets];
        for blocks in &self.masks {
            for &m in blocks {
                let m = m as usize;
                if log_ml[m].is_nan() {
                    let shape = block_shape(m as u16, data, prior);
                    log_ml[m] = log_beta_unchecked(shape.alpha, shape.beta)
                        - log_beta_unchecked(prior.alpha, prior.beta);
                    tail[m] = beta_tail(shape, p0.get())?;
                    mean[m] = beta_mean(shape);
                }
            }
        }

        let mut model_probs: Vec<f64> = self
            .masks
            .iter()
            .map(|blocks| {
                blocks.len() as f64 * params.psi + blocks.iter().map(|&m| log_ml[m as usize]).sum::<f64>()
            })
            .collect();
        normalize_log(&mut model_probs);

        let mut tail_probs = alloc::vec![0.0; self.k];
        let mut posterior_means = alloc::vec![0.0; self.k];
        for (blocks, &weight) in self.masks.iter().zip(&model_probs) {
            for &m in blocks {
                for k in 0..self.k {
                    if m & (1 << k) != 0 {
                        tail_probs[k] += weight * tail[m as usize];
                        posterior_means[k] += weight * mean[m as usize];
                    }
                }
            }
        }
        for t in &mut tail_probs {
            *t = t.clamp(0.0, 1.0);
        }
        Ok(BmaSummary { model_probs, tail_probs, posterior_means })
    }
}

pub fn posterior_model_probs(data: &BasketData, params: BmaParams, prior: BetaShape) -> Result<Vec<f64>> {
    let space = ModelSpace::new(data.len())?;
    let mut weights = space
        .partitions
        .iter()
        .map(|p| Ok(p.block_count() as f64 * params.psi + log_marginal_likelihood(p, data, prior)?))
        .collect::<Result<Vec<f64>>>()?;
    normalize_log(&mut weights);
    Ok(weights)
}

/// Model-averaged `Pr(p_k > p0 | D)` for every basket.
pub fn bma_tail_probs(
    data: &BasketData,
    params: BmaParams,
    prior: BetaShape,
    p0: NullRate,
) -> Result<Vec<f64>> {
    Ok(ModelSpace::new(data.len())?.analyze(data, params, prior, p0)?.tail_probs)
}
