//! Design labels, parameters and single-replicate evaluation.

use alloc::vec::Vec;
use core::fmt;

use crate::beta::{beta_mean, beta_tail, BetaShape};
use crate::bma::{BmaParams, ModelSpace};
use crate::data::{BasketData, NullRate, SizeFamily};
use crate::error::{Error, Result};
use crate::fujikawa::{self, FujikawaParams, JsdMemo};
use crate::hierarchical::{self, BhmParams, ExnexParams, McmcConfig};
use crate::powerprior::{self, CppParams, Variant};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Design {
    Cpp,
    App,
    Lcpp,
    Fujikawa,
    Bma,
    Bhm,
    Exnex,
}

impl Design {
    pub const ALL: [Design; 7] =
        [Design::Cpp, Design::App, Design::Lcpp, Design::Fujikawa, Design::Bma, Design::Bhm, Design::Exnex];

    pub fn name(self) -> &'static str {
        match self {
            Design::Cpp => "CPP",
            Design::App => "APP",
            Design::Lcpp => "LCPP",
            Design::Fujikawa => "Fujikawa",
            Design::Bma => "BMA",
            Design::Bhm => "BHM",
            Design::Exnex => "EXNEX",
        }
    }

    /// Case-insensitive lookup by name.
    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|d| d.name().eq_ignore_ascii_case(s))
    }

    /// Whether the decision rule is `tail > lambda` rather than `tail >= lambda`.
    pub fn strict_inequality(self) -> bool {
        matches!(self, Design::Bma | Design::Bhm | Design::Exnex)
    }

    pub fn uses_mcmc(self) -> bool {
        matches!(self, Design::Bhm | Design::Exnex)
    }

    /// Stable index used to separate random streams between designs.
    pub fn tag(self) -> u32 {
        self as u32
    }
}

impl fmt::Display for Design {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DesignParams {
    Cpp(CppParams),
    App,
    Lcpp(CppParams),
    Fujikawa(FujikawaParams),
    Bma(BmaParams),
    Bhm(BhmParams),
    Exnex(ExnexParams),
}

/// `0.125 + 2 * 1.875 / 7`, the third point of the `phi` grid.
pub const TUNED_PHI: f64 = 0.125 + 2.0 * 1.875 / 7.0;

impl DesignParams {
    pub fn design(&self) -> Design {
        match self {
            DesignParams::Cpp(_) => Design::Cpp,
            DesignParams::App => Design::App,
            DesignParams::Lcpp(_) => Design::Lcpp,
            DesignParams::Fujikawa(_) => Design::Fujikawa,
            DesignParams::Bma(_) => Design::Bma,
            DesignParams::Bhm(_) => Design::Bhm,
            DesignParams::Exnex(_) => Design::Exnex,
        }
    }

    /// Tuned parameter values for each design and sample size layout with `k` baskets.
    pub fn tuned(design: Design, family: SizeFamily, k: usize) -> Self {
        use SizeFamily::*;
        let cpp = |a, b| CppParams { a, b };
        match design {
            Design::Cpp => DesignParams::Cpp(match family {
                Linear | Grouped => cpp(4.0, 4.5),
                HighVariance => cpp(4.0, 4.0),
            }),
            Design::App => DesignParams::App,
            Design::Lcpp => DesignParams::Lcpp(match family {
                Linear => cpp(3.0, 4.0),
                Grouped => cpp(3.0, 4.5),
                HighVariance => cpp(2.5, 5.0),
            }),
            Design::Fujikawa => {
                let (epsilon, tau) = match family {
                    Linear => (1.5, 0.2),
                    Grouped => (1.5, 0.0),
                    HighVariance => (2.5, 0.2),
                };
                DesignParams::Fujikawa(FujikawaParams { epsilon, tau })
            }
            Design::Bma => DesignParams::Bma(BmaParams { psi: -2.0 }),
            Design::Bhm => DesignParams::Bhm(BhmParams::new(k, TUNED_PHI)),
            Design::Exnex => {
                let q = if family == HighVariance { 0.8 } else { 0.9 };
                DesignParams::Exnex(ExnexParams::new(k, TUNED_PHI, q))
            }
        }
    }

    fn validate(&self, k: usize) -> Result<()> {
        match self {
            DesignParams::Cpp(p) | DesignParams::Lcpp(p) => CppParams::new(p.a, p.b).map(|_| ()),
            DesignParams::App => Ok(()),
            DesignParams::Fujikawa(p) => FujikawaParams::new(p.epsilon, p.tau).map(|_| ()),
            DesignParams::Bma(p) if p.psi.is_finite() => Ok(()),
            DesignParams::Bma(_) => Err(Error::Config("psi must be finite")),
            DesignParams::Bhm(p) => p.validate(k),
            DesignParams::Exnex(p) => p.validate(k),
        }
    }
}

/// Everything needed to analyse one trial with one design.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignConfig {
    pub design: Design,
    pub params: DesignParams,
    /// Basket priors for the beta-posterior designs. BMA uses the first entry for every block.
    pub priors: Vec<BetaShape>,
    pub lambda: f64,
    pub strict_inequality: bool,
    pub mcmc: McmcConfig,
}

impl DesignConfig {
    /// Uniform priors, `lambda = 0.5` and the design's own inequality.
    pub fn new(params: DesignParams, k: usize) -> Self {
        let design = params.design();
        Self {
            design,
            params,
            priors: alloc::vec![BetaShape::uniform(); k],
            lambda: 0.5,
            strict_inequality: design.strict_inequality(),
            mcmc: McmcConfig::default(),
        }
    }

    pub fn tuned(design: Design, family: SizeFamily, k: usize) -> Self {
        Self::new(DesignParams::tuned(design, family, k), k)
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn validate(&self, k: usize) -> Result<()> {
        if self.params.design() != self.design {
            return Err(Error::Config("design label does not match its parameters"));
        }
        if self.strict_inequality != self.design.strict_inequality() {
            return Err(Error::Config("decision inequality does not match the design"));
        }
        if self.priors.len() != k {
            return Err(Error::Config("one prior per basket required"));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::Config("lambda must lie in [0, 1]"));
        }
        self.params.validate(k)
    }

    pub fn decide(&self, tail: f64) -> bool {
        decide(tail, self.lambda, self.strict_inequality)
    }
}

pub fn decide(tail: f64, lambda: f64, strict: bool) -> bool {
    if strict {
        tail > lambda
    } else {
        tail >= lambda
    }
}

/// Per-basket posterior summaries, independent of `lambda`.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignOutput {
    pub tail_probs: Vec<f64>,
    pub posterior_means: Vec<f64>,
    /// Set when an MCMC chain reported poor acceptance.
    pub mcmc_warning: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateResult {
    pub tail_probs: Vec<f64>,
    pub posterior_means: Vec<f64>,
    pub decisions: Vec<bool>,
}

/// Reusable per-worker caches.
#[derive(Debug, Default, Clone)]
pub struct Workspace {
    memo: JsdMemo,
    models: Option<ModelSpace>,
}

impl Workspace {
    pub fn new() -> Self {
        Self::default()
    }

    fn models(&mut self, k: usize) -> Result<&ModelSpace> {
        if self.models.as_ref().map(ModelSpace::baskets) != Some(k) {
            self.models = Some(ModelSpace::new(k)?);
        }
        Ok(self.models.as_ref().expect("model space was just built"))
    }
}

fn beta_summaries(shapes: &[BetaShape], p0: NullRate) -> Result<DesignOutput> {
    Ok(DesignOutput {
        tail_probs: shapes.iter().map(|&s| beta_tail(s, p0.get())).collect::<Result<_>>()?,
        posterior_means: shapes.iter().map(|&s| beta_mean(s)).collect(),
        mcmc_warning: false,
    })
}

/// Posterior summaries of one data set. `chain_seed` seeds the MCMC designs.
pub fn evaluate(
    config: &DesignConfig,
    data: &BasketData,
    p0: NullRate,
    workspace: &mut Workspace,
    chain_seed: u64,
) -> Result<DesignOutput> {
    let k = data.len();
    config.validate(k)?;
    let mcmc = McmcConfig { seed: chain_seed, ..config.mcmc };
    match &config.params {
        DesignParams::Cpp(p) => power_prior(data, Variant::Cpp, Some(*p), &config.priors, p0),
        DesignParams::App => power_prior(data, Variant::App, None, &config.priors, p0),
        DesignParams::Lcpp(p) => power_prior(data, Variant::Lcpp, Some(*p), &config.priors, p0),
        DesignParams::Fujikawa(p) => {
            let individual = fujikawa::individual_posteriors(data, &config.priors)?;
            let weights = fujikawa::fujikawa_weights_memo(&individual, *p, &mut workspace.memo)?;
            let post = fujikawa::fujikawa_posterior(data, &config.priors, &weights)?;
            beta_summaries(&post, p0)
        }
        DesignParams::Bma(p) => {
            let summary = workspace.models(k)?.analyze(data, *p, config.priors[0], p0)?;
            Ok(DesignOutput {
                tail_probs: summary.tail_probs,
                posterior_means: summary.posterior_means,
                mcmc_warning: false,
            })
        }
        DesignParams::Bhm(p) => {
            let out = hierarchical::bhm_posterior(data, p, &mcmc, p0)?;
            Ok(DesignOutput {
                tail_probs: out.tail_probs,
                posterior_means: out.posterior_means,
                mcmc_warning: out.acceptance_warning,
            })
        }
        DesignParams::Exnex(p) => {
            let out = hierarchical::exnex_posterior(data, p, &mcmc, p0)?;
            Ok(DesignOutput {
                tail_probs: out.tail_probs,
                posterior_means: out.posterior_means,
                mcmc_warning: out.acceptance_warning,
            })
        }
    }
}

fn power_prior(
    data: &BasketData,
    variant: Variant,
    params: Option<CppParams>,
    priors: &[BetaShape],
    p0: NullRate,
) -> Result<DesignOutput> {
    let weights = powerprior::build_weights(data, variant, params)?;
    let post = powerprior::power_prior_posterior(data, &weights.matrix, priors)?;
    beta_summaries(&post, p0)
}

/// Analyse one data set and apply the decision rule. MCMC designs use `config.mcmc.seed`.
pub fn run_design(config: &DesignConfig, data: &BasketData, p0: NullRate) -> Result<ReplicateResult> {
    let out = evaluate(config, data, p0, &mut Workspace::new(), config.mcmc.seed)?;
    Ok(ReplicateResult {
        decisions: out.tail_probs.iter().map(|&t| config.decide(t)).collect(),
        tail_probs: out.tail_probs,
        posterior_means: out.posterior_means,
    })
}
