//! Maximum-likelihood mixture fitting by expectation maximization.

use rand::Rng as _;

use super::Gmm;
use crate::error::{invalid, Result};
use crate::rng::{rng, Rng};
use crate::stats::variance;

/// Lower bound on every component variance.
pub const EM_VARIANCE_FLOOR: f64 = 1e-6;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Settings for maximum-likelihood mixture fits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmConfig {
    pub components: usize,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self { components: 2, max_iter: 300, tol: 1e-8 }
    }
}

/// EM result with the per-iteration log-likelihood trace.
#[derive(Debug, Clone)]
pub struct EmFit {
    pub gmm: Gmm,
    /// Total log-likelihood after each completed iteration (starting with
    /// the initialization).
    pub log_likelihoods: Vec<f64>,
    pub converged: bool,
}

/// Fit a `y`-component mixture to `losses`. Stops when the per-sample
/// log-likelihood improves by less than `tol` or after `max_iter` rounds.
pub fn gmm_fit_em(losses: &[f64], y: usize, max_iter: usize, tol: f64, seed: u64) -> Result<Gmm> {
    gmm_fit_em_traced(losses, y, max_iter, tol, seed).map(|f| f.gmm)
}

pub fn gmm_fit_em_traced(
    losses: &[f64],
    y: usize,
    max_iter: usize,
    tol: f64,
    seed: u64,
) -> Result<EmFit> {
    if y == 0 {
        return Err(invalid("need at least one mixture component"));
    }
    if losses.len() < y {
        return Err(invalid(format!(
            "cannot fit {y} components to {} observations",
            losses.len()
        )));
    }
    if losses.iter().any(|x| !x.is_finite()) {
        return Err(invalid("losses must be finite"));
    }
    let n = losses.len();
    let mut r = rng(seed);
    let mut means = kmeans_pp(losses, y, &mut r);
    let mut vars = vec![variance(losses).max(EM_VARIANCE_FLOOR); y];
    let mut weights = vec![1.0 / y as f64; y];

    let mut resp = vec![0.0; n * y];
    let mut ll = e_step(losses, &weights, &means, &vars, &mut resp);
    let mut trace = vec![ll];
    let mut converged = false;
    for _ in 0..max_iter {
        m_step(losses, &resp, &mut weights, &mut means, &mut vars);
        let next = e_step(losses, &weights, &means, &vars, &mut resp);
        trace.push(next);
        let gain = (next - ll) / n as f64;
        ll = next;
        if gain < tol {
            converged = true;
            break;
        }
    }

    // A component that lost all responsibility keeps a negligible weight so
    // the result stays a valid mixture.
    for w in weights.iter_mut() {
        *w = w.max(1e-12);
    }
    let total: f64 = weights.iter().sum();
    for w in weights.iter_mut() {
        *w /= total;
    }
    let gmm = Gmm::new(weights, means, vars.iter().map(|v| v.sqrt()).collect())?;
    Ok(EmFit { gmm, log_likelihoods: trace, converged })
}

/// k-means++ seeding on scalar data.
fn kmeans_pp(xs: &[f64], y: usize, r: &mut Rng) -> Vec<f64> {
    let n = xs.len();
    let mut centers = vec![xs[r.random_range(0..n)]];
    let mut d2: Vec<f64> = xs.iter().map(|x| (x - centers[0]).powi(2)).collect();
    while centers.len() < y {
        let total: f64 = d2.iter().sum();
        let idx = if total > 0.0 {
            let target = r.random::<f64>() * total;
            let mut acc = 0.0;
            d2.iter()
                .position(|&d| {
                    acc += d;
                    acc > target
                })
                .unwrap_or(n - 1)
        } else {
            r.random_range(0..n)
        };
        let c = xs[idx];
        centers.push(c);
        for (d, x) in d2.iter_mut().zip(xs) {
            *d = d.min((x - c).powi(2));
        }
    }
    centers
}

/// Fill responsibilities and return the log-likelihood of the current
/// parameters.
fn e_step(xs: &[f64], weights: &[f64], means: &[f64], vars: &[f64], resp: &mut [f64]) -> f64 {
    let y = weights.len();
    let consts: Vec<f64> = weights
        .iter()
        .zip(vars)
        .map(|(w, v)| w.ln() - 0.5 * (LN_2PI + v.ln()))
        .collect();
    let mut ll = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let row = &mut resp[i * y..(i + 1) * y];
        let mut max = f64::NEG_INFINITY;
        for k in 0..y {
            let d = x - means[k];
            row[k] = consts[k] - 0.5 * d * d / vars[k];
            max = max.max(row[k]);
        }
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
        ll += max + sum.ln();
    }
    ll
}

fn m_step(xs: &[f64], resp: &[f64], weights: &mut [f64], means: &mut [f64], vars: &mut [f64]) {
    let y = weights.len();
    let n = xs.len();
    let mut nk = vec![0.0; y];
    let mut sx = vec![0.0; y];
    for (i, &x) in xs.iter().enumerate() {
        for k in 0..y {
            let r = resp[i * y + k];
            nk[k] += r;
            sx[k] += r * x;
        }
    }
    for k in 0..y {
        if nk[k] > 0.0 {
            means[k] = sx[k] / nk[k];
        }
    }
    let mut sxx = vec![0.0; y];
    for (i, &x) in xs.iter().enumerate() {
        for k in 0..y {
            let d = x - means[k];
            sxx[k] += resp[i * y + k] * d * d;
        }
    }
    for k in 0..y {
        weights[k] = nk[k] / n as f64;
        if nk[k] > 0.0 {
            vars[k] = (sxx[k] / nk[k]).max(EM_VARIANCE_FLOOR);
        }
    }
}
