//! Empirical entropic risk of Gamma losses across risk aversions and
//! sample sizes, plus influence-function data for one sample.

use entrisk::risk::{empirical_risk, gamma_risk, influence_function};
use entrisk::rng::{derive_seed, rng};
use entrisk::{GammaSpec, RiskAversion};
use rand::Rng as _;
use rand_distr::Gamma;
use rayon::prelude::*;
use serde_json::{json, Value};

use super::{summary, ExperimentConfig};
use crate::error::CliResult;
use crate::io::{num, OutDir, Table};

pub const FIG1_ALPHAS: [f64; 5] = [0.0, 0.5, 1.0, 1.5, 2.0];
pub const FIG1_SIZES: [usize; 4] = [50, 100, 200, 500];
/// Shape and scale of the loss distribution.
pub const FIG1_GAMMA: (f64, f64) = (10.0, 0.24);
const INFLUENCE_SAMPLES: usize = 500;
const INFLUENCE_BINS: usize = 20;

fn gamma_draws(n: usize, seed: u64) -> Vec<f64> {
    let dist = Gamma::new(FIG1_GAMMA.0, FIG1_GAMMA.1).expect("valid gamma parameters");
    let mut g = rng(seed);
    (0..n).map(|_| g.sample(dist)).collect()
}

pub(super) fn run(cfg: &ExperimentConfig, out: &mut OutDir) -> CliResult<Value> {
    let spec = GammaSpec::new(FIG1_GAMMA.0, FIG1_GAMMA.1)?;
    let sizes = cfg.sizes_or(&FIG1_SIZES);
    let mut raw = Table::new(&["alpha", "n", "rep", "empirical_risk", "true_risk"]);
    let mut sum = Table::new(&["alpha", "n", "true_risk", "mean", "q25", "q50", "q75", "frac_below_true"]);
    let mut truths = Vec::new();
    for (ai, &a) in FIG1_ALPHAS.iter().enumerate() {
        let alpha = RiskAversion::new(a)?;
        let truth = gamma_risk(spec, alpha)?;
        truths.push(json!({ "alpha": a, "true_risk": truth }));
        for (ni, &n) in sizes.iter().enumerate() {
            let cell = derive_seed(cfg.seed, (ai * sizes.len() + ni) as u64);
            let risks: Vec<f64> = (0..cfg.repetitions)
                .into_par_iter()
                .map(|r| empirical_risk(&gamma_draws(n, derive_seed(cell, r as u64)), alpha))
                .collect::<entrisk::Result<_>>()?;
            for (r, v) in risks.iter().enumerate() {
                raw.row(&[num(a), n.to_string(), r.to_string(), num(*v), num(truth)]);
            }
            let [m, q25, q50, q75] = summary(&risks);
            let below = risks.iter().filter(|&&v| v < truth).count() as f64 / risks.len() as f64;
            sum.row(&[num(a), n.to_string(), num(truth), num(m), num(q25), num(q50), num(q75), num(below)]);
        }
    }
    out.write("fig1_raw.csv", &raw.into_bytes())?;
    out.write("fig1_summary.csv", &sum.into_bytes())?;

    let alpha = RiskAversion::new(cfg.alpha.unwrap_or(2.0))?;
    let mgf = (1.0 - spec.scale * alpha.value()).powf(-spec.shape);
    let xs = gamma_draws(INFLUENCE_SAMPLES, derive_seed(cfg.seed, u64::MAX));
    let infl: Vec<f64> = xs.iter().map(|&x| influence_function(x, alpha, mgf)).collect::<entrisk::Result<_>>()?;
    let mut t = Table::new(&["sample", "loss", "influence"]);
    for (i, (x, f)) in xs.iter().zip(&infl).enumerate() {
        t.row(&[i.to_string(), num(*x), num(*f)]);
    }
    out.write("influence.csv", &t.into_bytes())?;
    out.write("influence_bins.csv", &influence_bins(&xs, &infl).into_bytes())?;

    Ok(json!({ "gamma": FIG1_GAMMA, "sizes": sizes, "true_risks": truths, "influence_alpha": alpha.value() }))
}

/// Equal-width histogram of the losses with the mean influence per bin,
/// min-max normalized over non-empty bins.
fn influence_bins(xs: &[f64], infl: &[f64]) -> Table {
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = (hi - lo) / INFLUENCE_BINS as f64;
    let mut sums = [0.0; INFLUENCE_BINS];
    let mut counts = [0usize; INFLUENCE_BINS];
    for (&x, &f) in xs.iter().zip(infl) {
        let b = if width > 0.0 { (((x - lo) / width) as usize).min(INFLUENCE_BINS - 1) } else { 0 };
        sums[b] += f;
        counts[b] += 1;
    }
    let means: Vec<Option<f64>> = (0..INFLUENCE_BINS).map(|b| (counts[b] > 0).then(|| sums[b] / counts[b] as f64)).collect();
    let present: Vec<f64> = means.iter().flatten().copied().collect();
    let mn = present.iter().copied().fold(f64::INFINITY, f64::min);
    let mx = present.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut t = Table::new(&["bin", "lower", "upper", "count", "mean_influence", "normalized"]);
    for b in 0..INFLUENCE_BINS {
        let (m, norm) = match means[b] {
            Some(m) => (num(m), num(if mx > mn { (m - mn) / (mx - mn) } else { 0.0 })),
            None => (String::new(), String::new()),
        };
        let lower = lo + b as f64 * width;
        t.row(&[b.to_string(), num(lower), num(lower + width), counts[b].to_string(), m, norm]);
    }
    t
}
