//! Gaussian mixtures, special functions and the samplers built on them.

mod copula;
mod diff;
mod em;
mod special;

pub use copula::{copula_sample, CopulaSpec};
pub use diff::{gmm_sample_diff, DiffNoise, DiffSampleBatch, DEFAULT_TEMPERATURE};
pub use em::{gmm_fit_em, gmm_fit_em_traced, EmConfig, EmFit, EM_VARIANCE_FLOOR};
pub use special::{gamma_cdf, gamma_quantile, normal_cdf, normal_quantile};

use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::error::{invalid, Result};
use crate::risk::ScenarioSet;
use crate::rng::{rng, Rng};

/// Univariate Gaussian mixture with `Y` components.
#[derive(Debug, Clone, PartialEq)]
pub struct Gmm {
    weights: Vec<f64>,
    means: Vec<f64>,
    stds: Vec<f64>,
}

impl Gmm {
    pub fn new(weights: Vec<f64>, means: Vec<f64>, stds: Vec<f64>) -> Result<Self> {
        let y = weights.len();
        if y == 0 || means.len() != y || stds.len() != y {
            return Err(invalid(format!(
                "mixture needs equal nonzero lengths, got {}/{}/{}",
                weights.len(),
                means.len(),
                stds.len()
            )));
        }
        if weights.iter().any(|&w| !(w > 0.0 && w <= 1.0)) {
            return Err(invalid(format!("mixture weights must lie in (0, 1]: {weights:?}")));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(invalid(format!("mixture weights sum to {total}, not 1")));
        }
        if means.iter().any(|m| !m.is_finite()) {
            return Err(invalid("mixture means must be finite"));
        }
        if stds.iter().any(|&s| !(s.is_finite() && s >= 0.0)) {
            return Err(invalid("mixture standard deviations must be finite and >= 0"));
        }
        Ok(Self { weights, means, stds })
    }

    /// Point mass at `c`.
    pub fn point(c: f64) -> Result<Self> {
        Self::new(vec![1.0], vec![c], vec![0.0])
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn stds(&self) -> &[f64] {
        &self.stds
    }

    /// `(weight, mean, std)` per component.
    pub fn components(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.weights
            .iter()
            .zip(&self.means)
            .zip(&self.stds)
            .map(|((&w, &m), &s)| (w, m, s))
    }

    pub fn mean(&self) -> f64 {
        self.components().map(|(w, m, _)| w * m).sum()
    }

    /// Mixture of the distribution of `c * X` for `X` drawn from `self`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(
            self.weights.clone(),
            self.means.iter().map(|m| c * m).collect(),
            self.stds.iter().map(|s| c.abs() * s).collect(),
        )
    }

    /// Mixture shifted by `m`.
    pub fn shifted(&self, m: f64) -> Self {
        Self {
            weights: self.weights.clone(),
            means: self.means.iter().map(|x| x + m).collect(),
            stds: self.stds.clone(),
        }
    }

    /// Log-density at `x`. Zero-variance components are ignored unless
    /// every component is degenerate.
    pub fn log_density(&self, x: f64) -> f64 {
        let terms: Vec<f64> = self
            .components()
            .filter(|&(_, _, s)| s > 0.0)
            .map(|(w, m, s)| {
                let z = (x - m) / s;
                w.ln() - s.ln() - 0.5 * z * z - 0.5 * (2.0 * std::f64::consts::PI).ln()
            })
            .collect();
        let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return max;
        }
        max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
    }

    /// Draw one value from the mixture.
    pub fn draw(&self, rng: &mut Rng) -> f64 {
        let y = self.pick(rng.random::<f64>());
        let z: f64 = rng.sample(StandardNormal);
        self.means[y] + self.stds[y] * z
    }

    /// Fill `out` with independent draws.
    pub fn fill(&self, rng: &mut Rng, out: &mut [f64]) {
        for x in out.iter_mut() {
            *x = self.draw(rng);
        }
    }

    fn pick(&self, u: f64) -> usize {
        let mut acc = 0.0;
        for (k, &w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                return k;
            }
        }
        self.weights.len() - 1
    }
}

/// `n` independent draws from `q`, reproducible from `seed`.
pub fn gmm_sample(q: &Gmm, n: usize, seed: u64) -> Result<ScenarioSet> {
    if n == 0 {
        return Err(invalid("sample size must be at least 1"));
    }
    let mut r = rng(seed);
    let mut out = vec![0.0; n];
    q.fill(&mut r, &mut out);
    ScenarioSet::new(out)
}
