//! Fit a mixture whose distribution of bin-level entropic risks matches the
//! data's, by stochastic gradient descent on the 2-Wasserstein distance.

use std::io::{self, Write};

use super::wasserstein::{bin_risks, w2_with_grad};
use crate::distributions::{gmm_fit_em, DiffNoise, EmConfig, Gmm, DEFAULT_TEMPERATURE};
use crate::error::{invalid, Error, Result};
use crate::risk::RiskAversion;
use crate::rng::{derive_seed, rng};
use crate::stats::softmax;

/// Smallest standard deviation a component may take after each step.
const STD_FLOOR: f64 = 0.006_737_946_999_085_467; // exp(-5)

/// Rule for shrinking the step size during the descent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepDecay {
    /// Keep the step size fixed.
    Constant,
    /// Halve after any iteration whose distance exceeds the previous one.
    OnIncrease,
    /// Halve when the mean distance over a window of iterations fails to
    /// improve on the best earlier window.
    Plateau { window: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiskMatchConfig {
    /// Data bins `B`; `None` picks the divisor of `N` closest to `sqrt(N)`.
    pub bins: Option<usize>,
    /// Model bins `B'`; `None` uses `4 B`. Must be a multiple of `B`.
    pub model_bins: Option<usize>,
    pub step: f64,
    pub max_iter: usize,
    /// Stop once the distance falls below this value.
    pub tol: f64,
    pub temperature: f64,
    pub em: EmConfig,
    pub decay: StepDecay,
    /// Keep a per-iteration trace in the result.
    pub record_trace: bool,
}

impl Default for RiskMatchConfig {
    fn default() -> Self {
        Self {
            bins: None,
            model_bins: None,
            step: 0.01,
            max_iter: 3000,
            tol: (-9.0f64).exp(),
            temperature: DEFAULT_TEMPERATURE,
            em: EmConfig::default(),
            decay: StepDecay::Plateau { window: 100 },
            record_trace: false,
        }
    }
}

/// Unconstrained mixture parameters: weight logits, means, stds.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchParams {
    pub logits: Vec<f64>,
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl MatchParams {
    pub fn from_gmm(q: &Gmm) -> Self {
        Self {
            logits: q.weights().iter().map(|w| w.ln()).collect(),
            means: q.means().to_vec(),
            stds: q.stds().to_vec(),
        }
    }

    pub fn to_gmm(&self) -> Result<Gmm> {
        let mut w = softmax(&self.logits);
        // Keep every weight strictly positive.
        for v in w.iter_mut() {
            *v = v.max(1e-300);
        }
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|v| *v /= total);
        Gmm::new(w, self.means.clone(), self.stds.clone())
    }

    pub fn components(&self) -> usize {
        self.logits.len()
    }

    fn is_finite(&self) -> bool {
        self.logits.iter().chain(&self.means).chain(&self.stds).all(|v| v.is_finite())
    }

    /// Normalize the logits and floor the standard deviations.
    fn project(&mut self) {
        let max = self.logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + self.logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
        for l in self.logits.iter_mut() {
            *l -= lse;
        }
        for s in self.stds.iter_mut() {
            *s = s.max(STD_FLOOR);
        }
    }

    fn step(&mut self, grad: &MatchParams, gamma: f64) {
        for (p, g) in self.logits.iter_mut().zip(&grad.logits) {
            *p -= gamma * g;
        }
        for (p, g) in self.means.iter_mut().zip(&grad.means) {
            *p -= gamma * g;
        }
        for (p, g) in self.stds.iter_mut().zip(&grad.stds) {
            *p -= gamma * g;
        }
    }
}

/// One row of the optimization trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub iter: usize,
    pub distance: f64,
    pub step: f64,
    pub params: MatchParams,
}

#[derive(Debug, Clone)]
pub struct MatchFit {
    pub gmm: Gmm,
    pub iterations: usize,
    /// Distance observed at the last evaluated iteration.
    pub distance: f64,
    pub converged: bool,
    pub trace: Vec<TraceRow>,
}

impl MatchFit {
    /// Write the trace as CSV: `iter,w2,step,logit_k..,mean_k..,std_k..`.
    pub fn write_trace<W: Write>(&self, mut out: W) -> io::Result<()> {
        let y = self.gmm.len();
        let mut header = vec!["iter".to_string(), "w2".into(), "step".into()];
        for prefix in ["logit", "mean", "std"] {
            header.extend((1..=y).map(|k| format!("{prefix}_{k}")));
        }
        writeln!(out, "{}", header.join(","))?;
        for row in &self.trace {
            let p = &row.params;
            let vals: Vec<String> = p
                .logits
                .iter()
                .chain(&p.means)
                .chain(&p.stds)
                .map(|v| v.to_string())
                .collect();
            writeln!(out, "{},{},{},{}", row.iter, row.distance, row.step, vals.join(","))?;
        }
        Ok(())
    }
}

/// Divisor of `n` closest to `sqrt(n)`, preferring the larger on ties.
pub fn default_bins(n: usize) -> usize {
    let root = (n as f64).sqrt();
    (1..=n)
        .filter(|b| n % b == 0)
        .min_by(|&a, &b| {
            let da = (a as f64 - root).abs();
            let db = (b as f64 - root).abs();
            da.total_cmp(&db).then(b.cmp(&a))
        })
        .unwrap_or(1)
}

/// Distance between the model's bin-risk distribution (under frozen noise,
/// `model_bins` bins) and the sorted target risks, with its gradient in
/// the unconstrained parameters.
pub fn matching_objective(
    noise: &DiffNoise,
    target_sorted: &[f64],
    model_bins: usize,
    params: &MatchParams,
    temperature: f64,
    alpha: RiskAversion,
) -> Result<(f64, MatchParams)> {
    if model_bins == 0 || noise.len() % model_bins != 0 {
        return Err(invalid(format!(
            "{} samples cannot fill {model_bins} equal bins",
            noise.len()
        )));
    }
    let a = alpha.value();
    let n = noise.len() / model_bins;
    let y = params.components();
    let batch = noise.evaluate(&params.logits, &params.means, &params.stds, temperature);

    // Per-bin risks and the sensitivity of each risk to its samples.
    let mut risks = Vec::with_capacity(model_bins);
    let mut weights = vec![0.0; noise.len()];
    for (j, chunk) in batch.samples.chunks(n).enumerate() {
        let w = &mut weights[j * n..(j + 1) * n];
        if a == 0.0 {
            w.fill(1.0 / n as f64);
            risks.push(chunk.iter().sum::<f64>() / n as f64);
            continue;
        }
        let max = chunk.iter().fold(f64::NEG_INFINITY, |m, &s| m.max(a * s));
        let mut sum = 0.0;
        for (wi, &s) in w.iter_mut().zip(chunk) {
            *wi = (a * s - max).exp();
            sum += *wi;
        }
        w.iter_mut().for_each(|wi| *wi /= sum);
        risks.push((max + (sum / n as f64).ln()) / a);
    }

    let (dist, d_risk) = w2_with_grad(&risks, target_sorted)?;
    let mut grad = MatchParams { logits: vec![0.0; y], means: vec![0.0; y], stds: vec![0.0; y] };
    for (i, &wi) in weights.iter().enumerate() {
        let c = d_risk[i / n] * wi;
        if c == 0.0 {
            continue;
        }
        let sens = batch.sample_sensitivity(i);
        for k in 0..y {
            grad.logits[k] += c * sens[3 * k];
            grad.means[k] += c * sens[3 * k + 1];
            grad.stds[k] += c * sens[3 * k + 2];
        }
    }
    Ok((dist, grad))
}

/// Fit a mixture by entropic risk matching, starting from an EM fit.
pub fn fit_gmm_risk_match(
    losses: &[f64],
    alpha: RiskAversion,
    cfg: &RiskMatchConfig,
    seed: u64,
) -> Result<MatchFit> {
    let n_total = losses.len();
    if n_total == 0 {
        return Err(invalid("risk matching needs data"));
    }
    if !(cfg.step > 0.0 && cfg.temperature > 0.0 && cfg.tol >= 0.0) || cfg.max_iter == 0 {
        return Err(invalid("risk matching needs positive step, temperature and iteration cap"));
    }
    let bins = cfg.bins.unwrap_or_else(|| default_bins(n_total));
    let model_bins = cfg.model_bins.unwrap_or(4 * bins);
    if model_bins % bins != 0 {
        return Err(invalid(format!("model bins {model_bins} must be a multiple of bins {bins}")));
    }
    let target = bin_risks(losses, bins, alpha)?.sorted();
    let per_bin = n_total / bins;

    let init = gmm_fit_em(losses, cfg.em.components, cfg.em.max_iter, cfg.em.tol, seed)?;
    let mut params = MatchParams::from_gmm(&init);
    params.project();

    let mut gamma = cfg.step;
    let mut trace = Vec::new();
    let mut prev = f64::INFINITY;
    let mut window_sum = 0.0;
    let mut best_window = f64::INFINITY;
    let mut distance = f64::NAN;
    let mut converged = false;
    let mut iterations = 0;
    for t in 0..cfg.max_iter {
        iterations = t + 1;
        let mut r = rng(derive_seed(seed, t as u64 + 1));
        let noise = DiffNoise::draw(model_bins * per_bin, params.components(), &mut r);
        let (w, grad) = matching_objective(&noise, &target, model_bins, &params, cfg.temperature, alpha)?;
        if !w.is_finite() || !grad.is_finite() {
            return Err(Error::Numeric { iteration: t, message: format!("distance {w} is not finite") });
        }
        distance = w;
        if cfg.record_trace {
            trace.push(TraceRow { iter: t, distance: w, step: gamma, params: params.clone() });
        }
        if w < cfg.tol {
            converged = true;
            break;
        }
        match cfg.decay {
            StepDecay::Constant => {}
            StepDecay::OnIncrease => {
                if w > prev {
                    gamma *= 0.5;
                }
            }
            StepDecay::Plateau { window } => {
                window_sum += w;
                if window > 0 && (t + 1) % window == 0 {
                    let avg = window_sum / window as f64;
                    if avg >= best_window {
                        gamma *= 0.5;
                    } else {
                        best_window = avg;
                    }
                    window_sum = 0.0;
                }
            }
        }
        prev = w;
        params.step(&grad, gamma);
        params.project();
        if !params.is_finite() {
            return Err(Error::Numeric { iteration: t, message: "parameters diverged".into() });
        }
    }
    Ok(MatchFit { gmm: params.to_gmm()?, iterations, distance, converged, trace })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ra(a: f64) -> RiskAversion {
        RiskAversion::new(a).unwrap()
    }

    #[test]
    fn default_bin_choice() {
        assert_eq!(default_bins(1000), 25);
        assert_eq!(default_bins(100), 10);
        assert_eq!(default_bins(60), 6);
        assert_eq!(default_bins(7), 1);
        assert_eq!(default_bins(1), 1);
    }

    #[test]
    fn objective_gradient_matches_central_differences() {
        let params = MatchParams {
            logits: vec![0.6f64.ln(), 0.4f64.ln()],
            means: vec![0.2, 1.1],
            stds: vec![1.5, 0.7],
        };
        let target: Vec<f64> = vec![0.9, 1.4, 2.0, 2.8];
        let noise = DiffNoise::draw(8 * 10, 2, &mut rng(21));
        let (_, grad) = matching_objective(&noise, &target, 8, &params, 0.5, ra(1.0)).unwrap();
        let h = 1e-6;
        let eval = |p: &MatchParams| matching_objective(&noise, &target, 8, p, 0.5, ra(1.0)).unwrap().0;
        for k in 0..2 {
            for which in 0..3 {
                let mut up = params.clone();
                let mut dn = params.clone();
                let (pu, pd, g) = match which {
                    0 => (&mut up.logits[k], &mut dn.logits[k], grad.logits[k]),
                    1 => (&mut up.means[k], &mut dn.means[k], grad.means[k]),
                    _ => (&mut up.stds[k], &mut dn.stds[k], grad.stds[k]),
                };
                *pu += h;
                *pd -= h;
                let fd = (eval(&up) - eval(&dn)) / (2.0 * h);
                assert!((fd - g).abs() <= 1e-4 * g.abs().max(1e-6), "{k}/{which}: {fd} vs {g}");
            }
        }
    }

    #[test]
    fn projection_keeps_a_valid_mixture() {
        let xs: Vec<f64> = (0..100).map(|i| ((i * 31) % 23) as f64 * 0.1).collect();
        let cfg = RiskMatchConfig { max_iter: 50, record_trace: true, ..Default::default() };
        let fit = fit_gmm_risk_match(&xs, ra(1.0), &cfg, 3).unwrap();
        assert_eq!(fit.trace.len(), fit.iterations);
        for row in fit.trace.iter().skip(1) {
            let w = softmax(&row.params.logits);
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(row.params.stds.iter().all(|&s| s >= STD_FLOOR));
        }
        let mut buf = Vec::new();
        fit.write_trace(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("iter,w2,step,logit_1,logit_2,mean_1"));
        assert_eq!(text.lines().count(), fit.iterations + 1);
    }

    #[test]
    fn point_mass_data() {
        let xs = vec![1.5; 64];
        let cfg = RiskMatchConfig { max_iter: 500, ..Default::default() };
        let fit = fit_gmm_risk_match(&xs, ra(2.0), &cfg, 1).unwrap();
        let rho = crate::risk::gmm_risk(&fit.gmm, ra(2.0));
        assert!((rho - 1.5).abs() < 1e-3, "{rho} {:?}", fit.gmm);
    }

    #[test]
    fn rejects_bad_bins() {
        let cfg = RiskMatchConfig { bins: Some(3), ..Default::default() };
        assert!(fit_gmm_risk_match(&[1.0; 10], ra(1.0), &cfg, 0).is_err());
        let cfg = RiskMatchConfig { bins: Some(2), model_bins: Some(5), ..Default::default() };
        assert!(fit_gmm_risk_match(&[1.0; 10], ra(1.0), &cfg, 0).is_err());
    }
}
