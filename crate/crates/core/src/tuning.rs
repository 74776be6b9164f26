//! Calibration of `lambda` under the global null and grid search over design
//! hyperparameters.

use alloc::vec::Vec;

use crate::bma::BmaParams;
use crate::data::{BasketData, NullRate, Pattern, Scenario};
use crate::design::{Design, DesignConfig, DesignOutput, DesignParams, Workspace};
use crate::engine::{evaluate_bank, generate_bank, OperatingCharacteristics};
use crate::error::{Error, Result};
use crate::fujikawa::FujikawaParams;
use crate::hierarchical::{BhmParams, ExnexParams};
use crate::powerprior::CppParams;

/// Number of points of the `lambda` grid `{0.001, ..., 0.999}`.
pub const LAMBDA_STEPS: u32 = 999;

pub fn lambda_at(step: u32) -> f64 {
    step as f64 / 1000.0
}

/// Largest tail among inactive baskets, per replicate.
pub fn inactive_maxima(outputs: &[DesignOutput], active: &[bool]) -> Result<Vec<f64>> {
    if !active.iter().any(|a| !a) {
        return Err(Error::Domain("calibration needs at least one inactive basket"));
    }
    outputs
        .iter()
        .map(|o| {
            if o.tail_probs.len() != active.len() {
                return Err(Error::Config("replicate output and scenario disagree in basket count"));
            }
            Ok(o.tail_probs
                .iter()
                .zip(active)
                .filter(|(_, &a)| !a)
                .map(|(t, _)| *t)
                .fold(f64::NEG_INFINITY, f64::max))
        })
        .collect()
}

/// Empirical FWER at `lambda` from sorted per-replicate maxima.
pub fn fwer_from_sorted(sorted_maxima: &[f64], lambda: f64, strict: bool) -> f64 {
    let below = if strict {
        sorted_maxima.partition_point(|&m| m <= lambda)
    } else {
        sorted_maxima.partition_point(|&m| m < lambda)
    };
    (sorted_maxima.len() - below) as f64 / sorted_maxima.len() as f64
}

/// Smallest grid `lambda` whose FWER is at most `alpha`, by bisection over the
/// grid. FWER is nonincreasing in `lambda`, so the bisection is exact.
pub fn calibrate_from_outputs(outputs: &[DesignOutput], active: &[bool], strict: bool, alpha: f64) -> Result<f64> {
    if outputs.is_empty() {
        return Err(Error::Domain("no replicates to calibrate on"));
    }
    let mut maxima = inactive_maxima(outputs, active)?;
    maxima.sort_by(f64::total_cmp);
    let fwer = |step: u32| fwer_from_sorted(&maxima, lambda_at(step), strict);
    let top = fwer(LAMBDA_STEPS);
    if top > alpha {
        return Err(Error::Calibration { min_fwer: top });
    }
    let (mut lo, mut hi) = (1u32, LAMBDA_STEPS);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if fwer(mid) <= alpha {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Ok(lambda_at(lo))
}

/// Generate the bank of a null scenario, evaluate the design on it and calibrate.
pub fn calibrate_lambda(
    config: &DesignConfig,
    null_scenario: &Scenario,
    n_reps: u32,
    alpha: f64,
    master_seed: u64,
    p0: NullRate,
) -> Result<f64> {
    if null_scenario.true_rates.iter().any(|&p| p > p0.get()) {
        return Err(Error::Domain("calibration scenario has an active basket"));
    }
    let bank = generate_bank(null_scenario, master_seed, n_reps);
    let outputs = evaluate_bank(config, null_scenario, &bank, master_seed, p0, &mut Workspace::new())?;
    calibrate_from_outputs(&outputs, &null_scenario.active(p0), config.strict_inequality, alpha)
}

fn steps(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = libm::round((hi - lo) / step) as usize;
    (0..=n).map(|i| lo + i as f64 * step).collect()
}

/// Values of the `phi` grid: eight equidistant points on `[0.125, 2]`.
pub fn phi_grid() -> Vec<f64> {
    (0..8).map(|j| 0.125 + j as f64 * 1.875 / 7.0).collect()
}

/// The tuning grid of a design in lexicographic order. APP has a single point.
pub fn default_grid(design: Design, k: usize) -> Vec<DesignParams> {
    let mut out = Vec::new();
    match design {
        Design::Cpp | Design::Lcpp => {
            for &a in &steps(0.5, 5.0, 0.5) {
                for &b in &steps(0.5, 5.0, 0.5) {
                    let p = CppParams { a, b };
                    out.push(if design == Design::Cpp { DesignParams::Cpp(p) } else { DesignParams::Lcpp(p) });
                }
            }
        }
        Design::App => out.push(DesignParams::App),
        Design::Fujikawa => {
            for &epsilon in &steps(0.5, 3.0, 0.5) {
                for &tau in &steps(0.0, 0.5, 0.1) {
                    out.push(DesignParams::Fujikawa(FujikawaParams { epsilon, tau }));
                }
            }
        }
        Design::Bma => {
            for &psi in &steps(-4.0, 4.0, 0.5) {
                out.push(DesignParams::Bma(BmaParams { psi }));
            }
        }
        Design::Bhm => {
            for phi in phi_grid() {
                out.push(DesignParams::Bhm(BhmParams::new(k, phi)));
            }
        }
        Design::Exnex => {
            for phi in phi_grid() {
                for &q in &steps(0.1, 0.9, 0.1) {
                    out.push(DesignParams::Exnex(ExnexParams::new(k, phi, q)));
                }
            }
        }
    }
    out
}

/// A scenario with its generated replicates.
#[derive(Debug, Clone)]
pub struct ScenarioBank {
    pub scenario: Scenario,
    pub replicates: Vec<BasketData>,
}

impl ScenarioBank {
    pub fn generate(scenario: Scenario, master_seed: u64, n_reps: u32) -> Self {
        let replicates = generate_bank(&scenario, master_seed, n_reps);
        Self { scenario, replicates }
    }
}

/// Outcome of one grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct TuningRecord {
    pub params: DesignParams,
    /// `None` when calibration failed; the record is then infeasible.
    pub lambda: Option<f64>,
    /// Minimal achievable FWER when calibration failed.
    pub min_fwer: Option<f64>,
    /// ECD per scenario, in bank order.
    pub ecd: Vec<f64>,
    pub mean_ecd: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuningResult {
    pub design: Design,
    pub records: Vec<TuningRecord>,
    pub selected: Option<usize>,
}

impl TuningResult {
    pub fn best(&self) -> Option<&TuningRecord> {
        self.selected.map(|i| &self.records[i])
    }
}

/// Index of the highest mean ECD; the first record wins ties.
pub fn select_best(records: &[TuningRecord]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, r) in records.iter().enumerate() {
        if let Some(m) = r.mean_ecd {
            if best.is_none_or(|(_, b)| m > b) {
                best = Some((i, m));
            }
        }
    }
    best.map(|(i, _)| i)
}

/// Calibrate one configuration on the null bank and evaluate it on every bank.
pub fn evaluate_combination(
    config: &DesignConfig,
    banks: &[ScenarioBank],
    alpha: f64,
    master_seed: u64,
    p0: NullRate,
    workspace: &mut Workspace,
) -> Result<TuningRecord> {
    let null = banks
        .iter()
        .position(|b| b.scenario.pattern == Pattern::Null)
        .ok_or(Error::Config("tuning needs a null scenario"))?;
    let mut outputs: Vec<Option<Vec<DesignOutput>>> = alloc::vec![None; banks.len()];
    let evaluate = |bank: &ScenarioBank, ws: &mut Workspace| {
        evaluate_bank(config, &bank.scenario, &bank.replicates, master_seed, p0, ws)
    };
    let null_outputs = evaluate(&banks[null], workspace)?;
    let active = banks[null].scenario.active(p0);
    let lambda = match calibrate_from_outputs(&null_outputs, &active, config.strict_inequality, alpha) {
        Ok(l) => l,
        Err(Error::Calibration { min_fwer }) => {
            return Ok(TuningRecord {
                params: config.params.clone(),
                lambda: None,
                min_fwer: Some(min_fwer),
                ecd: Vec::new(),
                mean_ecd: None,
            })
        }
        Err(e) => return Err(e),
    };
    outputs[null] = Some(null_outputs);
    let mut ecd = Vec::with_capacity(banks.len());
    for (i, bank) in banks.iter().enumerate() {
        let out = match outputs[i].take() {
            Some(o) => o,
            None => evaluate(bank, workspace)?,
        };
        let oc = OperatingCharacteristics::from_outputs(&bank.scenario, &out, lambda, config.strict_inequality, p0)?;
        ecd.push(oc.ecd_mean);
    }
    let mean_ecd = ecd.iter().sum::<f64>() / ecd.len() as f64;
    Ok(TuningRecord { params: config.params.clone(), lambda: Some(lambda), min_fwer: None, ecd, mean_ecd: Some(mean_ecd) })
}

/// Sequential grid search over `grid` on the given banks.
pub fn grid_search(
    template: &DesignConfig,
    grid: &[DesignParams],
    banks: &[ScenarioBank],
    alpha: f64,
    master_seed: u64,
    p0: NullRate,
) -> Result<TuningResult> {
    if grid.is_empty() {
        return Err(Error::Config("empty tuning grid"));
    }
    let mut workspace = Workspace::new();
    let records = grid
        .iter()
        .map(|params| {
            let config = DesignConfig { design: params.design(), params: params.clone(), ..template.clone() };
            evaluate_combination(&config, banks, alpha, master_seed, p0, &mut workspace)
        })
        .collect::<Result<Vec<_>>>()?;
    let selected = select_best(&records);
    Ok(TuningResult { design: template.design, records, selected })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn output(tails: &[f64]) -> DesignOutput {
        DesignOutput { tail_probs: tails.to_vec(), posterior_means: tails.to_vec(), mcmc_warning: false }
    }

    #[test]
    fn zero_tails_give_smallest_lambda() {
        let outs: Vec<_> = (0..50).map(|_| output(&[0.0, 0.0])).collect();
        assert_eq!(calibrate_from_outputs(&outs, &[false, false], false, 0.05).unwrap(), 0.001);
    }

    #[test]
    fn vacuous_alpha() {
        let outs: Vec<_> = (0..50).map(|i| output(&[i as f64 / 50.0, 0.99])).collect();
        assert_eq!(calibrate_from_outputs(&outs, &[false, false], false, 1.0).unwrap(), 0.001);
    }

    #[test]
    fn calibration_failure_reports_min_fwer() {
        let outs: Vec<_> = (0..10).map(|_| output(&[1.0, 0.0])).collect();
        match calibrate_from_outputs(&outs, &[false, false], false, 0.05) {
            Err(Error::Calibration { min_fwer }) => assert_eq!(min_fwer, 1.0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn calibration_matches_linear_scan() {
        let outs: Vec<_> = (0..200).map(|i| output(&[(i * 37 % 200) as f64 / 200.0, 0.1])).collect();
        for strict in [false, true] {
            let lambda = calibrate_from_outputs(&outs, &[false, false], strict, 0.05).unwrap();
            let mut maxima = inactive_maxima(&outs, &[false, false]).unwrap();
            maxima.sort_by(f64::total_cmp);
            let scan = (1..=LAMBDA_STEPS).find(|&s| fwer_from_sorted(&maxima, lambda_at(s), strict) <= 0.05).unwrap();
            assert_eq!(lambda, lambda_at(scan));
        }
    }

    #[test]
    fn grid_sizes() {
        assert_eq!(default_grid(Design::Cpp, 5).len(), 100);
        assert_eq!(default_grid(Design::App, 5).len(), 1);
        assert_eq!(default_grid(Design::Fujikawa, 5).len(), 36);
        assert_eq!(default_grid(Design::Bma, 5).len(), 17);
        assert_eq!(default_grid(Design::Bhm, 5).len(), 8);
        assert_eq!(default_grid(Design::Exnex, 5).len(), 72);
        assert!((phi_grid()[2] - 0.66071).abs() < 1e-5);
    }

    #[test]
    fn ties_go_to_the_first_record() {
        let rec = |m: Option<f64>| TuningRecord {
            params: DesignParams::App,
            lambda: m.map(|_| 0.5),
            min_fwer: None,
            ecd: Vec::new(),
            mean_ecd: m,
        };
        let records = [rec(None), rec(Some(4.0)), rec(Some(4.2)), rec(Some(4.2))];
        assert_eq!(select_best(&records), Some(2));
        assert_eq!(select_best(&[rec(None)]), None);
    }
}
