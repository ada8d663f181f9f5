use crate::error::{invalid, Result};
use crate::risk::{risk_of, RiskAversion};

/// Empirical distribution of per-bin entropic risks.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskDistribution {
    pub risks: Vec<f64>,
}

impl RiskDistribution {
    pub fn new(risks: Vec<f64>) -> Self {
        Self { risks }
    }

    pub fn len(&self) -> usize {
        self.risks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.risks.is_empty()
    }

    pub fn sorted(&self) -> Vec<f64> {
        let mut v = self.risks.clone();
        v.sort_by(f64::total_cmp);
        v
    }
}

/// Split `losses` into `bins` contiguous bins of equal size and return the
/// empirical risk of each.
pub fn bin_risks(losses: &[f64], bins: usize, alpha: RiskAversion) -> Result<RiskDistribution> {
    if bins == 0 || losses.is_empty() || losses.len() % bins != 0 {
        return Err(invalid(format!(
            "{} scenarios cannot be split into {bins} equal bins",
            losses.len()
        )));
    }
    let n = losses.len() / bins;
    Ok(RiskDistribution::new(
        losses.chunks(n).map(|c| risk_of(c, alpha.value())).collect(),
    ))
}

/// 2-Wasserstein distance between two empirical distributions on the line.
pub fn w2_1d(a: &RiskDistribution, b: &RiskDistribution) -> f64 {
    let sa = a.sorted();
    let sb = b.sorted();
    if sa.is_empty() || sb.is_empty() {
        return f64::NAN;
    }
    if sa.len() == sb.len() {
        let ss: f64 = sa.iter().zip(&sb).map(|(x, y)| (x - y) * (x - y)).sum();
        return (ss / sa.len() as f64).sqrt();
    }
    // Compare quantile functions on a shared grid of midpoints.
    let grid = sa.len().max(sb.len()) * 8;
    let at = |s: &[f64], q: f64| s[((q * s.len() as f64) as usize).min(s.len() - 1)];
    let ss: f64 = (0..grid)
        .map(|j| {
            let q = (j as f64 + 0.5) / grid as f64;
            let d = at(&sa, q) - at(&sb, q);
            d * d
        })
        .sum();
    (ss / grid as f64).sqrt()
}

/// Gradient of `w2_1d(model, target)` with respect to each model risk.
/// The target length must divide the model length; each target order
/// statistic then stands for an equal run of model order statistics.
pub fn w2_1d_grad(model: &RiskDistribution, target: &RiskDistribution) -> Result<Vec<f64>> {
    Ok(w2_with_grad(&model.risks, &target.sorted())?.1)
}

/// Distance and gradient in one pass; `target_sorted` must be sorted.
pub(crate) fn w2_with_grad(model: &[f64], target_sorted: &[f64]) -> Result<(f64, Vec<f64>)> {
    let l = model.len();
    let t = target_sorted.len();
    if l == 0 || t == 0 || l % t != 0 {
        return Err(invalid(format!(
            "model size {l} must be a nonzero multiple of target size {t}"
        )));
    }
    let rep = l / t;
    let mut order: Vec<usize> = (0..l).collect();
    order.sort_by(|&i, &j| model[i].total_cmp(&model[j]));
    let mut diff = vec![0.0; l];
    let mut ss = 0.0;
    for (rank, &i) in order.iter().enumerate() {
        let d = model[i] - target_sorted[rank / rep];
        diff[i] = d;
        ss += d * d;
    }
    let w = (ss / l as f64).sqrt();
    if w == 0.0 {
        return Ok((0.0, vec![0.0; l]));
    }
    let scale = 1.0 / (l as f64 * w);
    Ok((w, diff.into_iter().map(|d| d * scale).collect()))
}
