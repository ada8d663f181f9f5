//! Gaussian copula with equicorrelated normal scores and Gamma marginals.

use ndarray::Array2;
use rand::Rng as _;
use rand_distr::StandardNormal;

use super::special::{gamma_quantile_upper, normal_cdf};
use crate::error::{invalid, Result};
use crate::risk::GammaSpec;
use crate::rng::rng;

/// Correlation `r` shared by every pair of normal scores, plus one Gamma
/// marginal per coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct CopulaSpec {
    pub correlation: f64,
    pub marginals: Vec<GammaSpec>,
}

impl CopulaSpec {
    pub fn new(correlation: f64, marginals: Vec<GammaSpec>) -> Result<Self> {
        if !(0.0..=1.0).contains(&correlation) {
            return Err(invalid(format!("copula correlation must lie in [0, 1], got {correlation}")));
        }
        if marginals.is_empty() {
            return Err(invalid("copula needs at least one marginal"));
        }
        Ok(Self { correlation, marginals })
    }
}

/// `n x M` matrix of draws. Normal scores are `sqrt(r) c + sqrt(1 - r) e_h`
/// with a common factor `c` per row, mapped through the normal cdf and the
/// Gamma quantile of each column.
pub fn copula_sample(c: &CopulaSpec, n: usize, seed: u64) -> Result<Array2<f64>> {
    if n == 0 {
        return Err(invalid("sample size must be at least 1"));
    }
    let m = c.marginals.len();
    let a = c.correlation.sqrt();
    let b = (1.0 - c.correlation).sqrt();
    let mut r = rng(seed);
    let mut out = Array2::zeros((n, m));
    for mut row in out.rows_mut() {
        let common: f64 = r.sample(StandardNormal);
        for (x, g) in row.iter_mut().zip(&c.marginals) {
            let e: f64 = r.sample(StandardNormal);
            let u = a * common + b * e;
            // Upper-tail probability keeps precision for large scores.
            let q = normal_cdf(-u).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON);
            *x = gamma_quantile_upper(*g, q);
        }
    }
    Ok(out)
}
