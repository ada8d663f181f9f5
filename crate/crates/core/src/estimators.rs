//! Point estimators of the true entropic risk and the bootstrap bias
//! correction that shifts the sample estimate by a model-based bias.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

pub use crate::distributions::EmConfig;
use crate::distributions::{gmm_fit_em, Gmm};
use crate::error::{invalid, Error, Result};
use crate::fitting::{fit_gmm_evt, fit_gmm_risk_match, RiskMatchConfig};
use crate::risk::{empirical_risk, gmm_risk, risk_of, RiskAversion};
use crate::rng::{derive_seed, rng};
use crate::stats::{contiguous_blocks, mean, median};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EstimatorKind {
    Saa,
    Loocv,
    Oic,
    Mle,
    Mom,
    Bs,
    BsMle,
    BsMatch,
    BsEvt,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 9] = [
        Self::Saa,
        Self::Loocv,
        Self::Oic,
        Self::Mle,
        Self::Mom,
        Self::Bs,
        Self::BsMle,
        Self::BsMatch,
        Self::BsEvt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Saa => "SAA",
            Self::Loocv => "LOOCV",
            Self::Oic => "OIC",
            Self::Mle => "MLE",
            Self::Mom => "MOM",
            Self::Bs => "BS",
            Self::BsMle => "BS_MLE",
            Self::BsMatch => "BS_MATCH",
            Self::BsEvt => "BS_EVT",
        }
    }

    /// Source-distribution fit used by the bias-corrected kinds.
    pub fn bias_method(self) -> Option<BiasMethod> {
        match self {
            Self::BsMle => Some(BiasMethod::Mle),
            Self::BsMatch => Some(BiasMethod::Match),
            Self::BsEvt => Some(BiasMethod::Evt),
            _ => None,
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let up = s.trim().to_ascii_uppercase().replace('-', "_");
        Self::ALL
            .into_iter()
            .find(|k| k.name() == up)
            .ok_or_else(|| invalid(format!("unknown estimator '{s}'")))
    }
}

/// How the bootstrap source distribution is fitted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BiasMethod {
    /// No correction (`delta = 0`).
    None,
    /// Maximum-likelihood mixture.
    Mle,
    /// Entropic risk matching.
    Match,
    /// Block-maxima tail matching.
    Evt,
}

impl BiasMethod {
    pub const ALL: [BiasMethod; 4] = [Self::None, Self::Mle, Self::Match, Self::Evt];

    pub fn name(self) -> &'static str {
        match self {
            Self::None => "NONE",
            Self::Mle => "BS_MLE",
            Self::Match => "BS_MATCH",
            Self::Evt => "BS_EVT",
        }
    }
}

impl fmt::Display for BiasMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BiasMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let up = s.trim().to_ascii_uppercase().replace('-', "_");
        let up = up.strip_prefix("BS_").map(|r| format!("BS_{r}")).unwrap_or(up);
        match up.as_str() {
            "NONE" | "CV" => Ok(Self::None),
            "BS_MLE" | "MLE" => Ok(Self::Mle),
            "BS_MATCH" | "MATCH" => Ok(Self::Match),
            "BS_EVT" | "EVT" => Ok(Self::Evt),
            _ => Err(invalid(format!("unknown bias method '{s}'"))),
        }
    }
}

/// Everything the estimator family may need beyond the data.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorConfig {
    /// Bootstrap repetitions `M`.
    pub reps: usize,
    pub em: EmConfig,
    pub risk_match: RiskMatchConfig,
    pub seed: u64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self { reps: 500, em: EmConfig::default(), risk_match: RiskMatchConfig::default(), seed: 0 }
    }
}

/// Outcome of a bootstrap bias estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct BiasCorrection {
    pub delta_hat: f64,
    pub reps: usize,
    pub fitted: Gmm,
}

fn require_positive(alpha: RiskAversion, what: &str) -> Result<f64> {
    if alpha.is_neutral() {
        Err(Error::Unsupported(format!("{what} needs alpha > 0")))
    } else {
        Ok(alpha.value())
    }
}

/// Sample average approximation: the empirical entropic risk.
pub fn saa(losses: &[f64], alpha: RiskAversion) -> Result<f64> {
    empirical_risk(losses, alpha)
}

/// Leave-one-out cross validation of the OCE form: the average held-out
/// OCE loss, each evaluated at the risk of the remaining scenarios.
pub fn loocv(losses: &[f64], alpha: RiskAversion) -> Result<f64> {
    let n = losses.len();
    if n < 2 {
        return Err(invalid("leave-one-out needs at least two scenarios"));
    }
    let a = require_positive(alpha, "leave-one-out")?;
    let x: Vec<f64> = losses.iter().map(|l| a * l).collect();
    // prefix[i] = log sum exp(x[..i]), suffix[i] = log sum exp(x[i..])
    let mut prefix = vec![f64::NEG_INFINITY; n + 1];
    for i in 0..n {
        prefix[i + 1] = log_add_exp(prefix[i], x[i]);
    }
    let mut suffix = vec![f64::NEG_INFINITY; n + 1];
    for i in (0..n).rev() {
        suffix[i] = log_add_exp(suffix[i + 1], x[i]);
    }
    let ln_rest = ((n - 1) as f64).ln();
    let total: f64 = (0..n)
        .map(|i| {
            let t = (log_add_exp(prefix[i], suffix[i + 1]) - ln_rest) / a;
            t + (a * (losses[i] - t)).exp_m1() / a
        })
        .sum();
    Ok(total / n as f64)
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Empirical risk plus the first-order bias term
/// `Var(exp(alpha l)) / (N alpha E[exp(alpha l)]^2)`, with population variance.
pub fn oic(losses: &[f64], alpha: RiskAversion) -> Result<f64> {
    let n = losses.len();
    if n < 2 {
        return Err(invalid("the information-criterion correction needs at least two scenarios"));
    }
    let a = require_positive(alpha, "the information-criterion correction")?;
    let max = losses.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    // The ratio Var/mean^2 is unchanged by the common factor exp(-alpha max).
    let e: Vec<f64> = losses.iter().map(|l| (a * (l - max)).exp()).collect();
    let m = mean(&e);
    let var = e.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n as f64;
    Ok(risk_of(losses, a) + var / (n as f64 * a * m * m))
}

/// Median of the empirical risks of `floor(sqrt(N))` contiguous blocks.
pub fn mom(losses: &[f64], alpha: RiskAversion) -> Result<f64> {
    if losses.is_empty() {
        return Err(invalid("median of means of an empty scenario set"));
    }
    let k = ((losses.len() as f64).sqrt().floor() as usize).max(1);
    let risks: Vec<f64> = contiguous_blocks(losses.len(), k)
        .into_iter()
        .map(|r| risk_of(&losses[r], alpha.value()))
        .collect();
    Ok(median(&risks))
}

/// Mean empirical risk over `reps` resamples drawn with replacement.
pub fn bootstrap_classic(losses: &[f64], alpha: RiskAversion, reps: usize, seed: u64) -> Result<f64> {
    if losses.is_empty() {
        return Err(invalid("bootstrap of an empty scenario set"));
    }
    if reps == 0 {
        return Err(invalid("bootstrap needs at least one repetition"));
    }
    let n = losses.len();
    let risks: Vec<f64> = (0..reps)
        .into_par_iter()
        .map(|m| {
            use rand::Rng as _;
            let mut r = rng(derive_seed(seed, m as u64));
            let sample: Vec<f64> = (0..n).map(|_| losses[r.random_range(0..n)]).collect();
            risk_of(&sample, alpha.value())
        })
        .collect();
    Ok(mean(&risks))
}

/// Estimate the bias of the empirical risk at sample size `N = losses.len()`
/// by simulating from `fitted`: the median over `reps` draws of
/// `gmm_risk(fitted) - empirical_risk(draw)`.
pub fn bias_correct(
    losses: &[f64],
    alpha: RiskAversion,
    fitted: &Gmm,
    reps: usize,
    seed: u64,
) -> Result<BiasCorrection> {
    if losses.is_empty() {
        return Err(invalid("bias correction of an empty scenario set"));
    }
    if reps == 0 {
        return Err(invalid("bias correction needs at least one repetition"));
    }
    let delta_hat = simulated_bias(fitted, losses.len(), alpha, reps, seed);
    Ok(BiasCorrection { delta_hat, reps, fitted: fitted.clone() })
}

/// Median of `gmm_risk(q) - empirical_risk(n draws from q)` over `reps`
/// independent draws.
pub fn simulated_bias(q: &Gmm, n: usize, alpha: RiskAversion, reps: usize, seed: u64) -> f64 {
    let truth = gmm_risk(q, alpha);
    let gaps: Vec<f64> = (0..reps)
        .into_par_iter()
        .map_init(
            || vec![0.0; n],
            |buf, m| {
                let mut r = rng(derive_seed(seed, m as u64));
                q.fill(&mut r, buf);
                truth - risk_of(buf, alpha.value())
            },
        )
        .collect();
    median(&gaps)
}

/// Fit the bootstrap source distribution for `method`; `None` for
/// [`BiasMethod::None`].
pub fn fit_source(
    method: BiasMethod,
    losses: &[f64],
    alpha: RiskAversion,
    cfg: &EstimatorConfig,
    seed: u64,
) -> Result<Option<Gmm>> {
    Ok(match method {
        BiasMethod::None => None,
        BiasMethod::Mle => {
            Some(gmm_fit_em(losses, cfg.em.components, cfg.em.max_iter, cfg.em.tol, seed)?)
        }
        BiasMethod::Match => {
            Some(fit_gmm_risk_match(losses, alpha, &cfg.risk_match, seed)?.gmm)
        }
        BiasMethod::Evt => Some(fit_gmm_evt(losses)?.gmm),
    })
}

/// Bias estimate `delta_hat` for `method` (zero for [`BiasMethod::None`]).
pub fn bias_for(
    method: BiasMethod,
    losses: &[f64],
    alpha: RiskAversion,
    cfg: &EstimatorConfig,
    seed: u64,
) -> Result<f64> {
    match fit_source(method, losses, alpha, cfg, derive_seed(seed, 0))? {
        None => Ok(0.0),
        Some(q) => Ok(bias_correct(losses, alpha, &q, cfg.reps, derive_seed(seed, 1))?.delta_hat),
    }
}

/// Point estimate of the true entropic risk by the chosen estimator.
pub fn estimate(kind: EstimatorKind, losses: &[f64], alpha: RiskAversion, cfg: &EstimatorConfig) -> Result<f64> {
    if losses.is_empty() {
        return Err(invalid("cannot estimate risk from an empty scenario set"));
    }
    match kind {
        EstimatorKind::Saa => saa(losses, alpha),
        EstimatorKind::Loocv => loocv(losses, alpha),
        EstimatorKind::Oic => oic(losses, alpha),
        EstimatorKind::Mle => {
            let q = gmm_fit_em(losses, cfg.em.components, cfg.em.max_iter, cfg.em.tol, cfg.seed)?;
            Ok(gmm_risk(&q, alpha))
        }
        EstimatorKind::Mom => mom(losses, alpha),
        EstimatorKind::Bs => bootstrap_classic(losses, alpha, cfg.reps, cfg.seed),
        EstimatorKind::BsMle | EstimatorKind::BsMatch | EstimatorKind::BsEvt => {
            let method = kind.bias_method().expect("bootstrap kinds carry a method");
            Ok(saa(losses, alpha)? + bias_for(method, losses, alpha, cfg, cfg.seed)?)
        }
    }
}
