//! JSON run configuration and scenario catalogs.
//!
//! ```json
//! {
//!   "seed": 7,
//!   "reps": 10000,
//!   "mcmc_samples": 10000,
//!   "p0": 0.15,
//!   "alpha": 0.05,
//!   "scenarios": [
//!     { "id": 1, "size_family": "grouped", "pattern": "Null",
//!       "sample_sizes": [10, 10, 25, 25, 30], "true_rates": [0.15, 0.15, 0.15, 0.15, 0.15] }
//!   ],
//!   "designs": { "CPP": { "a": 4, "b": 4.5, "lambda": 0.99 } },
//!   "grids": { "Fujikawa": { "epsilon": [1, 1.5, 2], "tau": [0, 0.2] } }
//! }
//! ```
//!
//! Every field is optional. Without `scenarios` the builtin catalog is used.
//! Keys under `designs` override the tuned defaults; a `lambda` skips calibration.
//! Keys under `grids` replace the default tuning grid of that parameter.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use basket_core::bma::BmaParams;
use basket_core::catalog;
use basket_core::design::{Design, DesignParams};
use basket_core::fujikawa::FujikawaParams;
use basket_core::hierarchical::{BhmParams, ExnexParams};
use basket_core::powerprior::CppParams;
use basket_core::tuning::{default_grid, phi_grid};
use basket_core::{NullRate, Pattern, Scenario, SizeFamily};
use serde::Deserialize;
use sha2::{Digest, Sha256};

#[derive(Debug)]
pub enum ConfigError {
    Io(std::io::Error),
    Parse(serde_json::Error),
    Invalid(String),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Io(e) => write!(f, "cannot read config: {e}"),
            ConfigError::Parse(e) => write!(f, "invalid config: {e}"),
            ConfigError::Invalid(msg) => write!(f, "invalid config: {msg}"),
        }
    }
}

impl std::error::Error for ConfigError {}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub id: u32,
    pub size_family: String,
    pub pattern: String,
    pub sample_sizes: Vec<u32>,
    pub true_rates: Vec<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub seed: Option<u64>,
    pub reps: Option<u32>,
    pub mcmc_samples: Option<usize>,
    pub p0: Option<f64>,
    pub alpha: Option<f64>,
    pub scenarios: Option<Vec<ScenarioSpec>>,
    #[serde(default)]
    pub designs: BTreeMap<String, BTreeMap<String, f64>>,
    #[serde(default)]
    pub grids: BTreeMap<String, BTreeMap<String, Vec<f64>>>,
}

/// A parsed configuration together with the hash of its source text.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: Config,
    pub sha256: String,
}

impl LoadedConfig {
    /// The empty configuration; its hash is that of the empty string.
    pub fn builtin() -> Self {
        Self::from_text("").expect("empty config is valid")
    }

    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(ConfigError::Io)?;
        Self::from_text(&text)
    }

    pub fn from_text(text: &str) -> Result<Self, ConfigError> {
        let sha256 = format!("{:x}", Sha256::digest(text.as_bytes()));
        let config: Config = if text.trim().is_empty() {
            Config::default()
        } else {
            serde_json::from_str(text).map_err(ConfigError::Parse)?
        };
        config.validate()?;
        Ok(Self { config, sha256 })
    }
}

impl Config {
    fn validate(&self) -> Result<(), ConfigError> {
        if let Some(p0) = self.p0 {
            NullRate::new(p0).map_err(|_| invalid("field `p0` must lie in (0, 1)"))?;
        }
        if let Some(alpha) = self.alpha {
            if !(0.0..=1.0).contains(&alpha) {
                return Err(invalid("field `alpha` must lie in [0, 1]"));
            }
        }
        if self.reps == Some(0) {
            return Err(invalid("field `reps` must be at least 1"));
        }
        for (name, values) in &self.designs {
            let design = parse_design(name)?;
            for key in values.keys() {
                if key != "lambda" && !param_names(design).contains(&key.as_str()) {
                    return Err(invalid(format!("designs.{name}: unknown parameter `{key}`")));
                }
            }
        }
        for (name, grid) in &self.grids {
            let design = parse_design(name)?;
            for (key, values) in grid {
                if !param_names(design).contains(&key.as_str()) {
                    return Err(invalid(format!("grids.{name}: unknown parameter `{key}`")));
                }
                if values.is_empty() {
                    return Err(invalid(format!("grids.{name}.{key}: empty grid")));
                }
            }
        }
        self.catalog().map(|_| ())
    }

    pub fn p0(&self) -> NullRate {
        self.p0.and_then(|p| NullRate::new(p).ok()).unwrap_or_default()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha.unwrap_or(0.05)
    }

    /// The scenarios of the run: the config's own list or the builtin catalog.
    pub fn catalog(&self) -> Result<Vec<Scenario>, ConfigError> {
        match &self.scenarios {
            None => Ok(catalog::builtin()),
            Some(specs) => load_catalog(specs),
        }
    }

    /// Parameters for a design on a size family: tuned defaults with overrides applied.
    pub fn design_params(&self, design: Design, family: SizeFamily, k: usize) -> Result<DesignParams, ConfigError> {
        let mut params = DesignParams::tuned(design, family, k);
        if let Some(values) = self.overrides(design) {
            for (key, &value) in values {
                if key != "lambda" {
                    set_param(&mut params, key, value);
                }
            }
        }
        Ok(params)
    }

    /// A fixed `lambda` from the config, if any.
    pub fn fixed_lambda(&self, design: Design) -> Option<f64> {
        self.overrides(design).and_then(|v| v.get("lambda").copied())
    }

    fn overrides(&self, design: Design) -> Option<&BTreeMap<String, f64>> {
        self.designs.iter().find(|(name, _)| Design::parse(name) == Some(design)).map(|(_, v)| v)
    }

    /// The tuning grid of a design in lexicographic order.
    pub fn grid(&self, design: Design, k: usize) -> Vec<DesignParams> {
        let Some(custom) = self.grids.iter().find(|(n, _)| Design::parse(n) == Some(design)).map(|(_, g)| g) else {
            return default_grid(design, k);
        };
        let axes: Vec<Vec<f64>> = param_names(design)
            .iter()
            .map(|&name| custom.get(name).cloned().unwrap_or_else(|| default_axis(design, name)))
            .collect();
        let base = default_grid(design, k).swap_remove(0);
        let mut out = vec![base];
        for (axis, name) in axes.iter().zip(param_names(design)) {
            out = out
                .iter()
                .flat_map(|p| {
                    axis.iter().map(move |&v| {
                        let mut q = p.clone();
                        set_param(&mut q, name, v);
                        q
                    })
                })
                .collect();
        }
        out
    }
}

fn parse_design(name: &str) -> Result<Design, ConfigError> {
    Design::parse(name).ok_or_else(|| invalid(format!("unknown design `{name}`")))
}

/// Tunable parameter names of a design, in grid order.
pub fn param_names(design: Design) -> &'static [&'static str] {
    match design {
        Design::Cpp | Design::Lcpp => &["a", "b"],
        Design::App => &[],
        Design::Fujikawa => &["epsilon", "tau"],
        Design::Bma => &["psi"],
        Design::Bhm => &["phi"],
        Design::Exnex => &["phi", "q"],
    }
}

fn default_axis(design: Design, name: &str) -> Vec<f64> {
    let steps = |lo: f64, hi: f64, step: f64| -> Vec<f64> {
        let n = ((hi - lo) / step).round() as usize;
        (0..=n).map(|i| lo + i as f64 * step).collect()
    };
    match (design, name) {
        (_, "a") | (_, "b") => steps(0.5, 5.0, 0.5),
        (_, "epsilon") => steps(0.5, 3.0, 0.5),
        (_, "tau") => steps(0.0, 0.5, 0.1),
        (_, "psi") => steps(-4.0, 4.0, 0.5),
        (_, "phi") => phi_grid(),
        (_, "q") => steps(0.1, 0.9, 0.1),
        _ => Vec::new(),
    }
}

fn set_param(params: &mut DesignParams, key: &str, value: f64) {
    match (params, key) {
        (DesignParams::Cpp(CppParams { a, .. }) | DesignParams::Lcpp(CppParams { a, .. }), "a") => *a = value,
        (DesignParams::Cpp(CppParams { b, .. }) | DesignParams::Lcpp(CppParams { b, .. }), "b") => *b = value,
        (DesignParams::Fujikawa(FujikawaParams { epsilon, .. }), "epsilon") => *epsilon = value,
        (DesignParams::Fujikawa(FujikawaParams { tau, .. }), "tau") => *tau = value,
        (DesignParams::Bma(BmaParams { psi }), "psi") => *psi = value,
        (DesignParams::Bhm(BhmParams { phi, .. }) | DesignParams::Exnex(ExnexParams { phi, .. }), "phi") => {
            *phi = value
        }
        (DesignParams::Exnex(ExnexParams { q, .. }), "q") => *q = value,
        _ => {}
    }
}

/// Parameter values as a compact JSON object.
pub fn param_json(params: &DesignParams) -> String {
    let value = match params {
        DesignParams::Cpp(p) | DesignParams::Lcpp(p) => serde_json::json!({ "a": p.a, "b": p.b }),
        DesignParams::App => serde_json::json!({}),
        DesignParams::Fujikawa(p) => serde_json::json!({ "epsilon": p.epsilon, "tau": p.tau }),
        DesignParams::Bma(p) => serde_json::json!({ "psi": p.psi }),
        DesignParams::Bhm(p) => serde_json::json!({ "phi": round6(p.phi) }),
        DesignParams::Exnex(p) => serde_json::json!({ "phi": round6(p.phi), "q": round6(p.q) }),
    };
    value.to_string()
}

fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

/// Validate custom scenario specifications.
pub fn load_catalog(specs: &[ScenarioSpec]) -> Result<Vec<Scenario>, ConfigError> {
    let mut out: Vec<Scenario> = Vec::with_capacity(specs.len());
    for (i, spec) in specs.iter().enumerate() {
        let at = |field: &str| format!("scenarios[{i}].{field}");
        let family = SizeFamily::parse(&spec.size_family)
            .ok_or_else(|| invalid(format!("{}: unknown size family `{}`", at("size_family"), spec.size_family)))?;
        let pattern = Pattern::parse(&spec.pattern)
            .ok_or_else(|| invalid(format!("{}: unknown pattern `{}`", at("pattern"), spec.pattern)))?;
        if spec.sample_sizes.len() != spec.true_rates.len() {
            return Err(invalid(format!("{}: length differs from sample_sizes", at("true_rates"))));
        }
        if spec.sample_sizes.len() < 2 {
            return Err(invalid(format!("{}: at least two baskets required", at("sample_sizes"))));
        }
        if spec.sample_sizes.iter().any(|&n| n == 0) {
            return Err(invalid(format!("{}: sizes must be positive", at("sample_sizes"))));
        }
        if spec.true_rates.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(invalid(format!("{}: rates must lie in [0, 1]", at("true_rates"))));
        }
        if out.iter().any(|s| s.id == spec.id) {
            return Err(invalid(format!("{}: duplicate scenario id {}", at("id"), spec.id)));
        }
        let scenario = Scenario::new(spec.id, spec.sample_sizes.clone(), spec.true_rates.clone(), pattern, family)
            .map_err(|e| invalid(format!("scenarios[{i}]: {e}")))?;
        out.push(scenario);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_uses_builtin_catalog() {
        let c = LoadedConfig::builtin();
        assert_eq!(c.config.catalog().unwrap().len(), 18);
        assert_eq!(c.sha256.len(), 64);
    }

    #[test]
    fn overrides_apply() {
        let c = LoadedConfig::from_text(r#"{"designs": {"cpp": {"a": 1.5, "lambda": 0.9}}}"#).unwrap();
        let p = c.config.design_params(Design::Cpp, SizeFamily::Grouped, 5).unwrap();
        assert_eq!(p, DesignParams::Cpp(CppParams { a: 1.5, b: 4.5 }));
        assert_eq!(c.config.fixed_lambda(Design::Cpp), Some(0.9));
        assert_eq!(c.config.fixed_lambda(Design::App), None);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(LoadedConfig::from_text(r#"{"designs": {"BMA": {"a": 1}}}"#).is_err());
        assert!(LoadedConfig::from_text(r#"{"designz": {}}"#).is_err());
        assert!(LoadedConfig::from_text(r#"{"grids": {"Nope": {}}}"#).is_err());
    }

    #[test]
    fn parse_errors_name_field_and_line() {
        let text = "{\n  \"scenarios\": [\n    { \"id\": 1, \"pattern\": \"Null\" }\n  ]\n}";
        let msg = LoadedConfig::from_text(text).unwrap_err().to_string();
        assert!(msg.contains("size_family"), "{msg}");
        assert!(msg.contains("line 3"), "{msg}");
    }

    #[test]
    fn invalid_rates_are_rejected() {
        let text = r#"{"scenarios": [{"id": 1, "size_family": "linear", "pattern": "Null",
            "sample_sizes": [10, 10], "true_rates": [0.1, 1.2]}]}"#;
        let msg = LoadedConfig::from_text(text).unwrap_err().to_string();
        assert!(msg.contains("scenarios[0].true_rates"), "{msg}");
    }

    #[test]
    fn custom_grid_is_cartesian_in_order() {
        let c = LoadedConfig::from_text(r#"{"grids": {"Fujikawa": {"epsilon": [1, 2], "tau": [0, 0.1, 0.2]}}}"#)
            .unwrap();
        let g = c.config.grid(Design::Fujikawa, 5);
        assert_eq!(g.len(), 6);
        assert_eq!(g[1], DesignParams::Fujikawa(FujikawaParams { epsilon: 1.0, tau: 0.1 }));
        assert_eq!(g[3], DesignParams::Fujikawa(FujikawaParams { epsilon: 2.0, tau: 0.0 }));
        let app = c.config.grid(Design::App, 5);
        assert_eq!(app, vec![DesignParams::App]);
    }

    #[test]
    fn param_json_shapes() {
        assert_eq!(param_json(&DesignParams::Cpp(CppParams { a: 4.0, b: 4.5 })), r#"{"a":4.0,"b":4.5}"#);
        assert_eq!(param_json(&DesignParams::App), "{}");
    }
}
