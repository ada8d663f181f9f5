//! Batch experiments that write CSV tables and a manifest.

mod example2;
mod example3;
mod fig1;
pub mod insurance;

use std::path::PathBuf;
use std::time::Instant;

use clap::ValueEnum;
use entrisk::estimators::EstimatorConfig;
use entrisk::fitting::RiskMatchConfig;
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{CliError, CliResult};
use crate::io::OutDir;

pub use example2::{bias_estimates, bias_oracle, example2_mixture, BiasOracle};
pub use example3::{example3_mixture, PROJECT_SCALES};
pub use fig1::{FIG1_ALPHAS, FIG1_GAMMA};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[value(rename_all = "snake_case")]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Fig1,
    Example2,
    Example3,
    InsuranceNSweep,
    InsuranceRSweep,
    InsuranceHetero,
    EpsilonCurves,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Self::Fig1 => "fig1",
            Self::Example2 => "example2",
            Self::Example3 => "example3",
            Self::InsuranceNSweep => "insurance_n_sweep",
            Self::InsuranceRSweep => "insurance_r_sweep",
            Self::InsuranceHetero => "insurance_hetero",
            Self::EpsilonCurves => "epsilon_curves",
        }
    }

    /// Full-scale repetitions (samples, seeds or instances).
    pub fn full_repetitions(self) -> usize {
        match self {
            Self::Fig1 => 10_000,
            Self::Example3 => 1000,
            _ => 100,
        }
    }

    /// Default fraction of the full-scale repetitions.
    pub fn desk_scale(self) -> f64 {
        match self {
            Self::Example3 => 0.02,
            _ => 0.2,
        }
    }
}

pub const FULL_TEST_SIZE: usize = 1_000_000;
pub const DESK_TEST_SIZE: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub repetitions: usize,
    pub seed: u64,
    pub scale: f64,
    /// Sample sizes replacing the experiment's defaults.
    pub sizes: Option<Vec<usize>>,
    pub alpha: Option<f64>,
    pub bootstrap_reps: usize,
    pub test_size: usize,
    pub match_iters: usize,
    pub out: PathBuf,
}

impl ExperimentConfig {
    /// Desk-scale defaults.
    pub fn new(experiment: Experiment, seed: u64, out: PathBuf) -> Self {
        let mut cfg = Self {
            experiment,
            repetitions: 1,
            seed,
            scale: 1.0,
            sizes: None,
            alpha: None,
            bootstrap_reps: 500,
            test_size: DESK_TEST_SIZE,
            match_iters: RiskMatchConfig::default().max_iter,
            out,
        };
        cfg.set_scale(experiment.desk_scale());
        cfg
    }

    /// Repetitions become `round(full * scale)`; scale 1 also restores the
    /// full-scale test size.
    pub fn set_scale(&mut self, scale: f64) {
        self.scale = scale;
        self.repetitions = ((self.experiment.full_repetitions() as f64 * scale).round() as usize).max(1);
        self.test_size = if scale >= 1.0 { FULL_TEST_SIZE } else { DESK_TEST_SIZE };
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.repetitions == 0 {
            return Err(CliError::usage("repetitions must be at least 1"));
        }
        if !(self.scale.is_finite() && self.scale > 0.0) {
            return Err(CliError::usage("scale must be positive"));
        }
        if self.bootstrap_reps == 0 || self.test_size == 0 || self.match_iters == 0 {
            return Err(CliError::usage("bootstrap reps, test size and match iterations must be positive"));
        }
        if matches!(&self.sizes, Some(s) if s.is_empty() || s.contains(&0)) {
            return Err(CliError::usage("sizes must be positive"));
        }
        Ok(())
    }

    pub fn estimator(&self) -> EstimatorConfig {
        let mut est = EstimatorConfig { reps: self.bootstrap_reps, seed: self.seed, ..Default::default() };
        est.risk_match.max_iter = self.match_iters;
        est
    }

    pub(crate) fn sizes_or(&self, default: &[usize]) -> Vec<usize> {
        self.sizes.clone().unwrap_or_else(|| default.to_vec())
    }
}

/// Run an experiment, writing its CSVs and `manifest.json` into `cfg.out`.
pub fn run(cfg: &ExperimentConfig) -> CliResult<Value> {
    cfg.validate()?;
    let start = Instant::now();
    let mut out = OutDir::create(&cfg.out)?;
    let details = match cfg.experiment {
        Experiment::Fig1 => fig1::run(cfg, &mut out)?,
        Experiment::Example2 => example2::run(cfg, &mut out)?,
        Experiment::Example3 => example3::run(cfg, &mut out)?,
        Experiment::InsuranceNSweep
        | Experiment::InsuranceRSweep
        | Experiment::InsuranceHetero
        | Experiment::EpsilonCurves => insurance::run(cfg, &mut out)?,
    };
    let manifest = json!({
        "experiment": cfg.experiment.name(),
        "config": cfg,
        "seed": cfg.seed,
        "version": env!("CARGO_PKG_VERSION"),
        "threads": rayon::current_num_threads(),
        "wall_time_seconds": start.elapsed().as_secs_f64(),
        "files": out.files(),
        "details": details,
    });
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    crate::io::write_file(&out.root().join("manifest.json"), text.as_bytes())?;
    Ok(manifest)
}

/// Mean and 25/50/75 percentiles.
pub(crate) fn summary(xs: &[f64]) -> [f64; 4] {
    use entrisk::stats::{mean, quantile};
    [mean(xs), quantile(xs, 0.25), quantile(xs, 0.5), quantile(xs, 0.75)]
}
