//! Reparameterized mixture sampling (Gumbel-softmax over the component
//! choice) with exact sensitivities of every sample.

use rand::Rng as _;
use rand_distr::StandardNormal;

use super::Gmm;
use crate::error::{invalid, Result};
use crate::rng::{rng, Rng};
use crate::stats::softmax_into;

/// Default Gumbel-softmax temperature.
pub const DEFAULT_TEMPERATURE: f64 = 0.5;

const GUMBEL_CLIP: f64 = 1e-12;

/// Samples together with `d sample_i / d (logit_k, mean_k, std_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffSampleBatch {
    pub samples: Vec<f64>,
    /// Row-major `n x Y x 3`; the last axis is (logit, mean, std).
    pub sensitivity: Vec<f64>,
    pub components: usize,
}

impl DiffSampleBatch {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Sensitivities of sample `i`, as `[logit, mean, std]` per component.
    pub fn sample_sensitivity(&self, i: usize) -> &[f64] {
        let w = 3 * self.components;
        &self.sensitivity[i * w..(i + 1) * w]
    }
}

/// Frozen Gumbel and normal noise for `n` samples of a `Y`-component mixture.
/// Evaluating the same noise at different parameters gives a smooth map,
/// which is what finite-difference checks and gradient steps rely on.
#[derive(Debug, Clone)]
pub struct DiffNoise {
    n: usize,
    components: usize,
    gumbel: Vec<f64>,
    normal: Vec<f64>,
}

impl DiffNoise {
    pub fn draw(n: usize, components: usize, rng: &mut Rng) -> Self {
        let len = n * components;
        let mut gumbel = Vec::with_capacity(len);
        let mut normal = Vec::with_capacity(len);
        for _ in 0..len {
            let u: f64 = rng.random::<f64>().clamp(GUMBEL_CLIP, 1.0 - GUMBEL_CLIP);
            gumbel.push(-(-u.ln()).ln());
            normal.push(rng.sample(StandardNormal));
        }
        Self { n, components, gumbel, normal }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Samples `sum_k w_k (mean_k + std_k eps_k)` with
    /// `w = softmax((logit + g) / tau)`.
    pub fn evaluate(&self, logits: &[f64], means: &[f64], stds: &[f64], tau: f64) -> DiffSampleBatch {
        let y = self.components;
        debug_assert!(logits.len() == y && means.len() == y && stds.len() == y);
        let mut samples = Vec::with_capacity(self.n);
        let mut sensitivity = vec![0.0; self.n * y * 3];
        let mut scores = vec![0.0; y];
        let mut w = vec![0.0; y];
        let mut z = vec![0.0; y];
        for i in 0..self.n {
            let g = &self.gumbel[i * y..(i + 1) * y];
            let eps = &self.normal[i * y..(i + 1) * y];
            for k in 0..y {
                scores[k] = (logits[k] + g[k]) / tau;
                z[k] = means[k] + stds[k] * eps[k];
            }
            softmax_into(&scores, &mut w);
            let s: f64 = w.iter().zip(&z).map(|(a, b)| a * b).sum();
            let row = &mut sensitivity[i * 3 * y..(i + 1) * 3 * y];
            for k in 0..y {
                row[3 * k] = w[k] * (z[k] - s) / tau;
                row[3 * k + 1] = w[k];
                row[3 * k + 2] = w[k] * eps[k];
            }
            samples.push(s);
        }
        DiffSampleBatch { samples, sensitivity, components: y }
    }
}

/// `n` differentiable samples from `q` at temperature `tau`.
pub fn gmm_sample_diff(q: &Gmm, n: usize, tau: f64, seed: u64) -> Result<DiffSampleBatch> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(invalid(format!("temperature must be positive, got {tau}")));
    }
    let noise = DiffNoise::draw(n, q.len(), &mut rng(seed));
    let logits: Vec<f64> = q.weights().iter().map(|w| w.ln()).collect();
    Ok(noise.evaluate(&logits, q.means(), q.stds(), tau))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_component() {
        let q = Gmm::new(vec![1.0], vec![2.0], vec![3.0]).unwrap();
        let noise = DiffNoise::draw(5, 1, &mut rng(4));
        let b = noise.evaluate(&[0.0], &[2.0], &[3.0], 0.5);
        for i in 0..5 {
            let eps = noise.normal[i];
            assert!((b.samples[i] - (2.0 + 3.0 * eps)).abs() < 1e-12);
            assert_eq!(b.sample_sensitivity(i), &[0.0, 1.0, eps]);
        }
        assert_eq!(gmm_sample_diff(&q, 5, 0.5, 4).unwrap().len(), 5);
    }

    #[test]
    fn zero_std_gives_convex_combinations_of_means() {
        let q = Gmm::new(vec![0.3, 0.7], vec![-1.0, 4.0], vec![0.0, 0.0]).unwrap();
        let b = gmm_sample_diff(&q, 200, 0.5, 8).unwrap();
        assert!(b.samples.iter().all(|&s| (-1.0..=4.0).contains(&s)));
    }

    #[test]
    fn rejects_bad_temperature() {
        let q = Gmm::point(0.0).unwrap();
        assert!(gmm_sample_diff(&q, 3, 0.0, 1).is_err());
        assert!(gmm_sample_diff(&q, 3, -1.0, 1).is_err());
    }

    #[test]
    fn mean_sensitivity_matches_central_difference() {
        let logits = [0.2f64.ln(), 0.5f64.ln(), 0.3f64.ln()];
        let means = [-1.0, 0.5, 2.0];
        let stds = [0.4, 1.0, 0.7];
        let noise = DiffNoise::draw(50, 3, &mut rng(11));
        let base = noise.evaluate(&logits, &means, &stds, 0.5);
        let h = 1e-6;
        for k in 0..3 {
            let mut up = means;
            up[k] += h;
            let mut dn = means;
            dn[k] -= h;
            let a = noise.evaluate(&logits, &up, &stds, 0.5);
            let b = noise.evaluate(&logits, &dn, &stds, 0.5);
            for i in 0..50 {
                let delta = 0.5 * (a.samples[i] - b.samples[i]);
                let predicted = base.sample_sensitivity(i)[3 * k + 1] * h;
                assert!((delta - predicted).abs() < 1e-9);
            }
        }
    }
}
