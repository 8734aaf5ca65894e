//! Run configuration file.

use crate::error::CliError;
use pograd::baselines::softdag::{SoftDagConfig, DEFAULT_GRID};
use pograd::draws::Method;
use pograd::samplers::advi::AdviConfig;
use pograd::samplers::hmc::HmcConfig;
use pograd::samplers::mh::MhConfig;
use pograd::synth::SynthConfig;
use pograd::PriorConfig;
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const RUN_CONFIG_SCHEMA: &str = "pograd-run-1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub schema: String,
    pub method: Method,
    pub seed: u64,
    /// Decoding threshold on closure probabilities.
    pub zeta: f64,
    pub prior: PriorConfig,
    pub mh: MhConfig,
    pub hmc: HmcConfig,
    pub advi: AdviConfig,
    pub softdag: SoftDagConfig,
    /// `(λ₁, λ_h)` pairs searched by SoftDAG; empty uses the configured pair only.
    pub softdag_grid: Vec<(f64, f64)>,
    pub softdag_validation_fraction: f64,
    pub majority_theta: f64,
    pub synth: SynthConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schema: RUN_CONFIG_SCHEMA.to_string(),
            method: Method::RelaxedHmc,
            seed: 0,
            zeta: 0.5,
            prior: PriorConfig::default(),
            mh: MhConfig::default(),
            hmc: HmcConfig::default(),
            advi: AdviConfig::default(),
            softdag: SoftDagConfig::default(),
            softdag_grid: DEFAULT_GRID.to_vec(),
            softdag_validation_fraction: 0.2,
            majority_theta: 0.5,
            synth: SynthConfig::default(),
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub method: Option<Method>,
    pub zeta: Option<f64>,
    pub tau: Option<f64>,
}

impl RunConfig {
    /// Reads `path` (or defaults when absent) and applies `ov`.
    pub fn load(path: Option<&Path>, ov: &Overrides) -> Result<Self, CliError> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
                Self::from_json(&text)?
            }
            None => Self::default(),
        };
        if let Some(s) = ov.seed {
            cfg.seed = s;
        }
        if let Some(m) = ov.method {
            cfg.method = m;
        }
        if let Some(z) = ov.zeta {
            cfg.zeta = z;
        }
        if let Some(t) = ov.tau {
            cfg.prior.tau = t;
        }
        cfg.propagate_seed();
        cfg.validate()?;
        Ok(cfg)
    }

    /// Budgets left out of the `synth` block follow its `n_items`.
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let raw: serde_json::Value = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        let mut cfg: RunConfig = serde_json::from_value(raw.clone()).map_err(|e| CliError::Config(e.to_string()))?;
        if cfg.schema != RUN_CONFIG_SCHEMA {
            return Err(CliError::Config(format!("unsupported config schema {:?}", cfg.schema)));
        }
        let synth = raw.get("synth");
        let given = |k: &str| synth.and_then(|s| s.get(k)).is_some();
        let base = SynthConfig::new(cfg.synth.n_items, cfg.synth.rho_gen, cfg.synth.seed);
        if !given("trace_budget_min") {
            cfg.synth.trace_budget_min = base.trace_budget_min;
        }
        if !given("trace_budget_max") {
            cfg.synth.trace_budget_max = base.trace_budget_max.max(cfg.synth.trace_budget_min);
        }
        Ok(cfg)
    }

    fn propagate_seed(&mut self) {
        self.mh.seed = self.seed;
        self.hmc.seed = self.seed;
        self.advi.seed = self.seed;
        self.softdag.seed = self.seed;
        self.synth.seed = self.seed;
    }

    /// Checks the parts of the configuration the chosen method reads.
    pub fn validate(&self) -> Result<(), CliError> {
        let cfg_err = |e: pograd::Error| CliError::Config(e.to_string());
        if !(self.zeta > 0.0 && self.zeta < 1.0) {
            return Err(CliError::Config("zeta must lie in (0, 1)".into()));
        }
        self.prior.validate().map_err(cfg_err)?;
        self.synth.validate().map_err(cfg_err)?;
        match self.method {
            Method::HardMcmc => {
                if self.mh.n_iters == 0 || self.mh.max_draws == 0 || self.mh.chains == 0 {
                    return Err(CliError::Config("mh.n_iters, mh.max_draws and mh.chains must be positive".into()));
                }
                if !(self.mh.burn_in_fraction >= 0.0 && self.mh.burn_in_fraction < 1.0) {
                    return Err(CliError::Config("mh.burn_in_fraction must lie in [0, 1)".into()));
                }
            }
            Method::RelaxedHmc => self.hmc.validate().map_err(cfg_err)?,
            Method::FullrankVi => self.advi.validate().map_err(cfg_err)?,
            Method::Majority => {
                if !(self.majority_theta >= 0.0 && self.majority_theta < 1.0) {
                    return Err(CliError::Config("majority_theta must lie in [0, 1)".into()));
                }
            }
            Method::Softdag => {
                self.softdag.validate().map_err(cfg_err)?;
                if !(self.softdag_validation_fraction > 0.0 && self.softdag_validation_fraction < 1.0) {
                    return Err(CliError::Config("softdag_validation_fraction must lie in (0, 1)".into()));
                }
            }
        }
        Ok(())
    }
}
