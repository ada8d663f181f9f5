//! Every estimator on three scaled copies of a five-component mixture loss.

use entrisk::distributions::gmm_sample;
use entrisk::estimators::{estimate, EstimatorKind};
use entrisk::risk::gmm_risk;
use entrisk::rng::derive_seed;
use entrisk::{Gmm, RiskAversion};
use rayon::prelude::*;
use serde_json::{json, Value};

use super::{summary, ExperimentConfig};
use crate::error::CliResult;
use crate::io::{num, OutDir, Table};

/// Loss multipliers of the three projects.
pub const PROJECT_SCALES: [f64; 3] = [0.4, 0.6, 0.8];
const ALPHA: f64 = 3.0;
const SIZE: usize = 10_000;

pub fn example3_mixture() -> Gmm {
    Gmm::new(
        vec![0.16, 0.28, 0.23, 0.20, 0.13],
        vec![-19.5, -19.0, -18.5, -18.0, -17.5],
        vec![4.0 / 25.0, 0.25, 4.0 / 9.0, 1.0, 4.0],
    )
    .expect("valid mixture")
}

pub(super) fn run(cfg: &ExperimentConfig, out: &mut OutDir) -> CliResult<Value> {
    let q = example3_mixture();
    let alpha = RiskAversion::new(cfg.alpha.unwrap_or(ALPHA))?;
    let sizes = cfg.sizes_or(&[SIZE]);
    let kinds = EstimatorKind::ALL;
    let truths: Vec<f64> = PROJECT_SCALES
        .iter()
        .map(|&c| Ok(gmm_risk(&q.scaled(c)?, alpha)))
        .collect::<entrisk::Result<_>>()?;
    let mut raw = Table::new(&["n", "instance", "project", "scale", "estimator", "estimate"]);
    let mut sum =
        Table::new(&["n", "project", "scale", "estimator", "true_risk", "mean", "q25", "q50", "q75", "frac_below_true"]);
    for (si, &n) in sizes.iter().enumerate() {
        let cell = derive_seed(cfg.seed, si as u64);
        // estimates[instance][project][kind]
        let estimates: Vec<Vec<Vec<f64>>> = (0..cfg.repetitions)
            .into_par_iter()
            .map(|i| {
                let inst = derive_seed(cell, i as u64);
                let xi = gmm_sample(&q, n, derive_seed(inst, 0))?;
                PROJECT_SCALES
                    .iter()
                    .enumerate()
                    .map(|(p, &c)| {
                        let losses: Vec<f64> = xi.losses().iter().map(|x| c * x).collect();
                        let mut est = cfg.estimator();
                        est.seed = derive_seed(inst, 1 + p as u64);
                        kinds.iter().map(|&k| estimate(k, &losses, alpha, &est)).collect()
                    })
                    .collect()
            })
            .collect::<entrisk::Result<_>>()?;
        for (p, &c) in PROJECT_SCALES.iter().enumerate() {
            for (k, kind) in kinds.iter().enumerate() {
                let col: Vec<f64> = estimates.iter().map(|e| e[p][k]).collect();
                for (i, v) in col.iter().enumerate() {
                    raw.row(&[n.to_string(), i.to_string(), (p + 1).to_string(), num(c), kind.name().into(), num(*v)]);
                }
                let [m, q25, q50, q75] = summary(&col);
                let below = col.iter().filter(|&&v| v < truths[p]).count() as f64 / col.len() as f64;
                sum.row(&[
                    n.to_string(),
                    (p + 1).to_string(),
                    num(c),
                    kind.name().into(),
                    num(truths[p]),
                    num(m),
                    num(q25),
                    num(q50),
                    num(q75),
                    num(below),
                ]);
            }
        }
    }
    out.write("example3_raw.csv", &raw.into_bytes())?;
    out.write("example3_summary.csv", &sum.into_bytes())?;
    let projects: Vec<Value> = PROJECT_SCALES
        .iter()
        .zip(&truths)
        .enumerate()
        .map(|(p, (c, t))| json!({ "project": p + 1, "scale": c, "true_risk": t }))
        .collect();
    Ok(json!({ "alpha": alpha.value(), "sizes": sizes, "true_risks": projects }))
}
