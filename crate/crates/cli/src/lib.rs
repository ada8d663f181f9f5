//! Command-line front end for the `entrisk` library.

pub mod args;
pub mod commands;
pub mod config;
pub mod error;
pub mod experiments;
pub mod io;

use std::path::PathBuf;

use args::{Cli, Command, ExperimentArgs};
use error::CliResult;
use experiments::ExperimentConfig;

/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "ENTRISK_THREADS";

pub fn experiment_config(a: &ExperimentArgs) -> ExperimentConfig {
    let out = a.out.clone().unwrap_or_else(|| PathBuf::from("results").join(a.name.name()));
    let mut cfg = ExperimentConfig::new(a.name, a.seed, out);
    if a.full_scale {
        cfg.set_scale(1.0);
    } else if let Some(s) = a.scale {
        cfg.set_scale(s);
    }
    if let Some(r) = a.reps {
        cfg.repetitions = r;
    }
    cfg.sizes = a.sizes.clone();
    cfg.alpha = a.alpha;
    if let Some(b) = a.boot {
        cfg.bootstrap_reps = b;
    }
    if let Some(t) = a.test_size {
        cfg.test_size = t;
    }
    if let Some(t) = a.match_iters {
        cfg.match_iters = t;
    }
    cfg
}

pub fn run(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Estimate(a) => commands::estimate_cmd(a),
        Command::FitGmm(a) => commands::fit_gmm_cmd(a),
        Command::Dro(a) => commands::dro_cmd(a),
        Command::TuneRadius(a) => commands::tune_radius_cmd(a),
        Command::Insurance(a) => commands::insurance_cmd(a),
        Command::Experiment(a) => {
            let cfg = experiment_config(a);
            experiments::run(&cfg)?;
            println!("{}", cfg.out.join("manifest.json").display());
            Ok(())
        }
    }
}
