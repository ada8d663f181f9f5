//! Insurance instance files (TOML).

use std::fs;
use std::path::Path;

use entrisk::insurance::InsuranceInstance;
use entrisk::GammaSpec;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Instance description: household count, risk aversions, Gamma marginals
/// as `[shape, scale]`, copula correlation, training size and seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceConfig {
    #[serde(rename = "M")]
    pub households: usize,
    pub alpha0: f64,
    pub alphas: Vec<f64>,
    pub gammas: Vec<[f64; 2]>,
    pub r: f64,
    #[serde(rename = "N")]
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
}

impl InstanceConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let cfg: Self = toml::from_str(text).map_err(|e| e.to_string())?;
        if cfg.alphas.len() != cfg.households || cfg.gammas.len() != cfg.households {
            return Err(format!(
                "M = {} but {} alphas and {} gammas given",
                cfg.households,
                cfg.alphas.len(),
                cfg.gammas.len()
            ));
        }
        if cfg.samples == 0 {
            return Err("N must be positive".into());
        }
        Ok(cfg)
    }

    pub fn instance(&self) -> CliResult<InsuranceInstance> {
        let marginals = self
            .gammas
            .iter()
            .map(|&[k, l]| GammaSpec::new(k, l))
            .collect::<entrisk::Result<Vec<_>>>()?;
        Ok(InsuranceInstance::new(self.alpha0, self.alphas.clone(), marginals, self.r)?)
    }
}
