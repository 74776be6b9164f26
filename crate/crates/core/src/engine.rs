//! Trial generation, the replicate loop and operating characteristics.

use alloc::vec::Vec;

use rand::Rng;

use crate::data::{Basket, BasketData, NullRate, Scenario};
use crate::design::{self, DesignConfig, DesignOutput, Workspace};
use crate::error::{Error, Result};
use crate::rng::{chain_seed, replicate_stream, StreamKind};

/// Binomial responses for every basket of one replicate, each drawn as a sum
/// of Bernoulli trials from the replicate's own stream.
pub fn generate_trial(scenario: &Scenario, master_seed: u64, replicate: u32) -> BasketData {
    let mut rng = replicate_stream(master_seed, StreamKind::Data, scenario.id, replicate);
    let baskets = scenario
        .sample_sizes
        .iter()
        .zip(&scenario.true_rates)
        .map(|(&n, &p)| {
            let r = (0..n).filter(|_| rng.random::<f64>() < p).count() as u32;
            Basket { responses: r, size: n }
        })
        .collect();
    BasketData::new(baskets).expect("scenarios have at least two baskets")
}

/// Replicates `0..n_reps` of a scenario.
pub fn generate_bank(scenario: &Scenario, master_seed: u64, n_reps: u32) -> Vec<BasketData> {
    (0..n_reps).map(|i| generate_trial(scenario, master_seed, i)).collect()
}

/// Number of baskets whose decision agrees with `p_k > p0`.
pub fn correct_decisions(decisions: &[bool], true_rates: &[f64], p0: NullRate) -> usize {
    decisions.iter().zip(true_rates).filter(|(&d, &p)| d == (p > p0.get())).count()
}

/// Compensated running sum.
#[derive(Debug, Default, Clone, Copy)]
pub struct KahanSum {
    sum: f64,
    carry: f64,
}

impl KahanSum {
    pub fn add(&mut self, x: f64) {
        let y = x - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OperatingCharacteristics {
    pub ecd_mean: f64,
    pub rejection_rate: Vec<f64>,
    pub fwer: f64,
    pub bias: Vec<f64>,
    pub n_reps: usize,
}

impl OperatingCharacteristics {
    /// Aggregate per-replicate outputs in order for a given `lambda`.
    pub fn from_outputs(
        scenario: &Scenario,
        outputs: &[DesignOutput],
        lambda: f64,
        strict: bool,
        p0: NullRate,
    ) -> Result<Self> {
        if outputs.is_empty() {
            return Err(Error::Domain("no replicates to summarize"));
        }
        let k = scenario.len();
        let active = scenario.active(p0);
        let mut rejections = alloc::vec![0usize; k];
        let mut mean_sums = alloc::vec![KahanSum::default(); k];
        let mut family_errors = 0usize;
        let mut correct = 0usize;
        for out in outputs {
            if out.tail_probs.len() != k || out.posterior_means.len() != k {
                return Err(Error::Config("replicate output and scenario disagree in basket count"));
            }
            let mut any_false = false;
            for j in 0..k {
                let reject = design::decide(out.tail_probs[j], lambda, strict);
                rejections[j] += reject as usize;
                any_false |= reject && !active[j];
                correct += (reject == active[j]) as usize;
                mean_sums[j].add(out.posterior_means[j]);
            }
            family_errors += any_false as usize;
        }
        let n = outputs.len() as f64;
        let oc = Self {
            ecd_mean: correct as f64 / n,
            rejection_rate: rejections.iter().map(|&c| c as f64 / n).collect(),
            fwer: family_errors as f64 / n,
            bias: mean_sums
                .iter()
                .zip(&scenario.true_rates)
                .map(|(s, p)| s.value() / n - p)
                .collect(),
            n_reps: outputs.len(),
        };
        debug_assert!(oc.fwer_bounds_hold(&active));
        Ok(oc)
    }

    /// `max_k TOER_k <= FWER <= sum_k TOER_k` over inactive baskets.
    pub fn fwer_bounds_hold(&self, active: &[bool]) -> bool {
        let inactive = || self.rejection_rate.iter().zip(active).filter(|(_, &a)| !a).map(|(r, _)| *r);
        let max = inactive().fold(0.0, f64::max);
        let sum: f64 = inactive().sum();
        self.fwer >= max && self.fwer <= sum + 1e-12
    }
}

/// Posterior summaries of every replicate in a bank, in replicate order.
pub fn evaluate_bank(
    config: &DesignConfig,
    scenario: &Scenario,
    bank: &[BasketData],
    master_seed: u64,
    p0: NullRate,
    workspace: &mut Workspace,
) -> Result<Vec<DesignOutput>> {
    bank.iter()
        .enumerate()
        .map(|(i, data)| {
            let seed = chain_seed(master_seed, config.design.tag(), scenario.id, i as u32);
            design::evaluate(config, data, p0, workspace, seed)
        })
        .collect()
}

/// Operating characteristics of one design on one scenario.
pub fn simulate(
    scenario: &Scenario,
    config: &DesignConfig,
    n_reps: u32,
    master_seed: u64,
    p0: NullRate,
) -> Result<OperatingCharacteristics> {
    if n_reps == 0 {
        return Err(Error::Config("at least one replicate required"));
    }
    scenario.validate()?;
    let bank = generate_bank(scenario, master_seed, n_reps);
    let outputs = evaluate_bank(config, scenario, &bank, master_seed, p0, &mut Workspace::new())?;
    OperatingCharacteristics::from_outputs(scenario, &outputs, config.lambda, config.strict_inequality, p0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Pattern, SizeFamily};

    fn scenario(rates: &[f64]) -> Scenario {
        Scenario::new(99, alloc::vec![10; rates.len()], rates.to_vec(), Pattern::Null, SizeFamily::Linear).unwrap()
    }

    #[test]
    fn extreme_rates() {
        let s = scenario(&[0.0, 1.0, 0.0]);
        for rep in 0..20 {
            let d = generate_trial(&s, 3, rep);
            assert_eq!(d[0].responses, 0);
            assert_eq!(d[1].responses, 10);
        }
    }

    #[test]
    fn counting_correct_decisions() {
        let p0 = NullRate::default();
        let asc = [0.15, 0.15, 0.25, 0.35, 0.35];
        assert_eq!(correct_decisions(&[true, false, true, true, false], &asc, p0), 3);
        assert_eq!(correct_decisions(&[false; 5], &[0.15; 5], p0), 5);
    }

    #[test]
    fn kahan_beats_naive() {
        let mut k = KahanSum::default();
        for _ in 0..10 {
            k.add(0.1);
        }
        assert_eq!(k.value(), 1.0);
    }
}
