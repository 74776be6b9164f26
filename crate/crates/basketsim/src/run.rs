//! Parallel orchestration of simulation, calibration and tuning.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex};

use basket_core::design::{evaluate, Design, DesignConfig, DesignOutput, DesignParams, Workspace};
use basket_core::engine::generate_trial;
use basket_core::rng::chain_seed;
use basket_core::tuning::{calibrate_from_outputs, inactive_maxima, fwer_from_sorted, select_best, ScenarioBank, TuningRecord, TuningResult};
use basket_core::{BasketData, NullRate, OperatingCharacteristics, Pattern, Scenario, SizeFamily};
use rayon::prelude::*;

use crate::config::{param_json, ConfigError, LoadedConfig};
use crate::output::OcRow;

#[derive(Debug)]
pub enum RunError {
    Usage(String),
    Config(ConfigError),
    Model(basket_core::Error),
    Io(std::io::Error),
    Csv(csv::Error),
}

impl RunError {
    /// 2 for usage and configuration problems, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Usage(_) | RunError::Config(_) => 2,
            RunError::Model(basket_core::Error::Numeric { .. } | basket_core::Error::Calibration { .. }) => 3,
            RunError::Model(_) => 2,
            RunError::Io(_) | RunError::Csv(_) => 1,
        }
    }
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Usage(msg) => f.write_str(msg),
            RunError::Config(e) => write!(f, "{e}"),
            RunError::Model(e) => write!(f, "{e}"),
            RunError::Io(e) => write!(f, "i/o error: {e}"),
            RunError::Csv(e) => write!(f, "csv error: {e}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<basket_core::Error> for RunError {
    fn from(e: basket_core::Error) -> Self {
        RunError::Model(e)
    }
}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e)
    }
}

impl From<csv::Error> for RunError {
    fn from(e: csv::Error) -> Self {
        RunError::Csv(e)
    }
}

/// Calibrated threshold of one design on one null scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub design: Design,
    pub null_scenario: Scenario,
    pub params: DesignParams,
    pub lambda: f64,
    /// FWER on the calibration bank at `lambda`.
    pub fwer: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FamilyTuning {
    pub family: SizeFamily,
    /// Patterns of the tuning banks, in the order of each record's `ecd`.
    pub patterns: Vec<Pattern>,
    pub result: TuningResult,
}

/// Banks are keyed by the whole scenario so a synthesized null copy never
/// shares a bank with the scenario it was derived from.
type BankKey = (u32, Vec<u32>, Vec<u64>);

fn bank_key(s: &Scenario) -> BankKey {
    (s.id, s.sample_sizes.clone(), s.true_rates.iter().map(|p| p.to_bits()).collect())
}

/// Settings shared by all commands.
pub struct Runner {
    pub config: LoadedConfig,
    pub seed: u64,
    pub reps: u32,
    pub mcmc_samples: usize,
    pool: rayon::ThreadPool,
    banks: Mutex<HashMap<BankKey, Arc<Vec<BasketData>>>>,
    calibrations: Mutex<HashMap<(Design, BankKey, String), Calibration>>,
    warnings: Mutex<usize>,
}

impl Runner {
    pub fn new(config: LoadedConfig, seed: u64, reps: u32, mcmc_samples: usize, jobs: usize) -> Result<Self, RunError> {
        if reps == 0 {
            return Err(RunError::Usage("--reps must be at least 1".into()));
        }
        if mcmc_samples < 3 {
            return Err(RunError::Usage("--mcmc-samples must be at least 3".into()));
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build()
            .map_err(|e| RunError::Usage(format!("cannot start worker pool: {e}")))?;
        Ok(Self {
            config,
            seed,
            reps,
            mcmc_samples,
            pool,
            banks: Mutex::default(),
            calibrations: Mutex::default(),
            warnings: Mutex::new(0),
        })
    }

    pub fn p0(&self) -> NullRate {
        self.config.config.p0()
    }

    /// Replicates whose MCMC chains reported poor acceptance so far.
    pub fn mcmc_warnings(&self) -> usize {
        *self.warnings.lock().expect("cache lock")
    }

    pub fn catalog(&self) -> Result<Vec<Scenario>, RunError> {
        Ok(self.config.config.catalog()?)
    }

    pub fn design_config(&self, params: DesignParams, k: usize) -> DesignConfig {
        let mut config = DesignConfig::new(params, k);
        config.mcmc.total_samples = self.mcmc_samples;
        config
    }

    fn configured(&self, design: Design, scenario: &Scenario) -> Result<DesignConfig, RunError> {
        let params = self.config.config.design_params(design, scenario.size_family, scenario.len())?;
        Ok(self.design_config(params, scenario.len()))
    }

    pub fn bank(&self, scenario: &Scenario) -> Arc<Vec<BasketData>> {
        let key = bank_key(scenario);
        if let Some(b) = self.banks.lock().expect("cache lock").get(&key) {
            return b.clone();
        }
        let bank: Vec<BasketData> = self
            .pool
            .install(|| (0..self.reps).into_par_iter().map(|i| generate_trial(scenario, self.seed, i)).collect());
        let bank = Arc::new(bank);
        self.banks.lock().expect("cache lock").insert(key, bank.clone());
        bank
    }

    /// Posterior summaries of every replicate, in replicate order.
    pub fn outputs(&self, config: &DesignConfig, scenario: &Scenario) -> Result<Vec<DesignOutput>, RunError> {
        let bank = self.bank(scenario);
        let p0 = self.p0();
        let outputs: Vec<DesignOutput> = self.pool.install(|| {
            bank.par_iter()
                .enumerate()
                .map_init(Workspace::new, |ws, (i, data)| {
                    let seed = chain_seed(self.seed, config.design.tag(), scenario.id, i as u32);
                    evaluate(config, data, p0, ws, seed)
                })
                .collect::<basket_core::Result<_>>()
        })?;
        *self.warnings.lock().expect("cache lock") += outputs.iter().filter(|o| o.mcmc_warning).count();
        Ok(outputs)
    }

    /// The null scenario used to calibrate designs for `scenario`: a catalog
    /// scenario with the same sizes and no active basket, or an all-`p0` copy.
    pub fn null_for(&self, scenario: &Scenario) -> Result<Scenario, RunError> {
        let p0 = self.p0().get();
        let found = self.catalog()?.into_iter().find(|s| {
            s.sample_sizes == scenario.sample_sizes && s.size_family == scenario.size_family && s.true_rates.iter().all(|&p| p <= p0)
        });
        Ok(found.unwrap_or_else(|| Scenario {
            true_rates: vec![p0; scenario.len()],
            pattern: Pattern::Null,
            ..scenario.clone()
        }))
    }

    /// Calibrate `config` on `null`, memoized per design, scenario and parameters.
    pub fn calibrate_config(&self, config: &DesignConfig, null: &Scenario) -> Result<Calibration, RunError> {
        let key = (config.design, bank_key(null), param_json(&config.params));
        if let Some(c) = self.calibrations.lock().expect("cache lock").get(&key) {
            return Ok(c.clone());
        }
        let outputs = self.outputs(config, null)?;
        let active = null.active(self.p0());
        let lambda = calibrate_from_outputs(&outputs, &active, config.strict_inequality, self.config.config.alpha())?;
        let mut maxima = inactive_maxima(&outputs, &active)?;
        maxima.sort_by(f64::total_cmp);
        let calibration = Calibration {
            design: config.design,
            null_scenario: null.clone(),
            params: config.params.clone(),
            lambda,
            fwer: fwer_from_sorted(&maxima, lambda, config.strict_inequality),
        };
        self.calibrations.lock().expect("cache lock").insert(key, calibration.clone());
        Ok(calibration)
    }

    fn lambda_for(&self, config: &DesignConfig, scenario: &Scenario) -> Result<f64, RunError> {
        match self.config.config.fixed_lambda(config.design) {
            Some(l) => Ok(l),
            None => Ok(self.calibrate_config(config, &self.null_for(scenario)?)?.lambda),
        }
    }

    /// Operating characteristics of one design on one scenario.
    pub fn simulate_one(&self, design: Design, scenario: &Scenario) -> Result<(DesignConfig, OperatingCharacteristics), RunError> {
        let mut config = self.configured(design, scenario)?;
        config.lambda = self.lambda_for(&config, scenario)?;
        config.validate(scenario.len())?;
        let outputs = self.outputs(&config, scenario)?;
        let oc = OperatingCharacteristics::from_outputs(scenario, &outputs, config.lambda, config.strict_inequality, self.p0())?;
        Ok((config, oc))
    }

    pub fn simulate(&self, designs: &[Design], scenarios: &[Scenario]) -> Result<Vec<OcRow>, RunError> {
        let mut rows = Vec::new();
        for scenario in scenarios {
            for &design in designs {
                let (config, oc) = self.simulate_one(design, scenario)?;
                let params = param_json(&config.params);
                for k in 0..scenario.len() {
                    rows.push(OcRow {
                        scenario_id: scenario.id,
                        size_family: scenario.size_family.name().into(),
                        pattern: scenario.pattern.name().into(),
                        design: design.name().into(),
                        basket_index: k + 1,
                        n: scenario.sample_sizes[k],
                        true_p: scenario.true_rates[k],
                        rejection_rate: oc.rejection_rate[k],
                        bias: oc.bias[k],
                        ecd_mean: oc.ecd_mean,
                        fwer: oc.fwer,
                        lambda: config.lambda,
                        param_json: params.clone(),
                    });
                }
            }
        }
        Ok(rows)
    }

    /// Calibrated thresholds for every design on the null scenario of each selected scenario.
    pub fn calibrate(&self, designs: &[Design], scenarios: &[Scenario]) -> Result<Vec<Calibration>, RunError> {
        let mut nulls: Vec<Scenario> = Vec::new();
        for s in scenarios {
            let null = self.null_for(s)?;
            if !nulls.iter().any(|n| n.id == null.id) {
                nulls.push(null);
            }
        }
        let mut out = Vec::new();
        for null in &nulls {
            for &design in designs {
                let config = self.configured(design, null)?;
                out.push(self.calibrate_config(&config, null)?);
            }
        }
        Ok(out)
    }

    /// Grid search of every design on each size family present in `scenarios`.
    pub fn tune(&self, designs: &[Design], scenarios: &[Scenario]) -> Result<Vec<FamilyTuning>, RunError> {
        let catalog = self.catalog()?;
        let mut families: Vec<SizeFamily> = scenarios.iter().map(|s| s.size_family).collect();
        families.sort();
        families.dedup();
        let mut out = Vec::new();
        for family in families {
            let mut members: Vec<Scenario> = catalog.iter().filter(|s| s.size_family == family).cloned().collect();
            members.sort_by_key(|s| (s.pattern, s.id));
            let Some(null) = members.iter().find(|s| s.pattern == Pattern::Null) else {
                return Err(RunError::Usage(format!("size family {family} has no Null scenario to calibrate on")));
            };
            let k = null.len();
            let banks: Vec<ScenarioBank> = members
                .iter()
                .map(|s| ScenarioBank { scenario: s.clone(), replicates: self.bank(s).as_ref().clone() })
                .collect();
            for &design in designs {
                out.push(FamilyTuning {
                    family,
                    patterns: members.iter().map(|s| s.pattern).collect(),
                    result: self.grid_search(design, k, &banks)?,
                });
            }
        }
        Ok(out)
    }

    /// Grid points run in parallel; each evaluates its banks sequentially.
    pub fn grid_search(&self, design: Design, k: usize, banks: &[ScenarioBank]) -> Result<TuningResult, RunError> {
        let grid = self.config.config.grid(design, k);
        let (alpha, p0) = (self.config.config.alpha(), self.p0());
        let records: Vec<TuningRecord> = self.pool.install(|| {
            grid.par_iter()
                .map(|params| {
                    let config = self.design_config(params.clone(), k);
                    config.validate(k)?;
                    basket_core::tuning::evaluate_combination(&config, banks, alpha, self.seed, p0, &mut Workspace::new())
                })
                .collect::<basket_core::Result<_>>()
        })?;
        let selected = select_best(&records);
        Ok(TuningResult { design, records, selected })
    }
}
