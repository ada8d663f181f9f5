//! Entropic risk in its closed and empirical forms.
//!
//! For a loss `L` and risk aversion `alpha > 0` the entropic risk is
//! `(1/alpha) * log E[exp(alpha * L)]`; at `alpha = 0` it is `E[L]`.

use crate::distributions::Gmm;
use crate::error::{invalid, Error, Result};
use crate::stats::{log_mean_exp, mean};

/// Arrow–Pratt risk-aversion coefficient, `alpha >= 0`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct RiskAversion(f64);

impl RiskAversion {
    pub fn new(alpha: f64) -> Result<Self> {
        if alpha.is_finite() && alpha >= 0.0 {
            Ok(Self(alpha))
        } else {
            Err(invalid(format!("risk aversion must be finite and >= 0, got {alpha}")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_neutral(self) -> bool {
        self.0 == 0.0
    }
}

/// Nonempty collection of finite scalar losses.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSet(Vec<f64>);

impl ScenarioSet {
    pub fn new(losses: Vec<f64>) -> Result<Self> {
        if losses.is_empty() {
            return Err(invalid("scenario set is empty"));
        }
        if let Some(i) = losses.iter().position(|x| !x.is_finite()) {
            return Err(invalid(format!("loss {i} is not finite ({})", losses[i])));
        }
        Ok(Self(losses))
    }

    pub fn losses(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn mean(&self) -> f64 {
        mean(&self.0)
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Empirical entropic risk of the set.
    pub fn risk(&self, alpha: RiskAversion) -> f64 {
        risk_of(&self.0, alpha.value())
    }

    /// Copy of the set with every loss shifted by `m`.
    pub fn shifted(&self, m: f64) -> Self {
        Self(self.0.iter().map(|x| x + m).collect())
    }
}

impl AsRef<[f64]> for ScenarioSet {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Gamma distribution with shape `kappa` and scale `lambda`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaSpec {
    pub shape: f64,
    pub scale: f64,
}

impl GammaSpec {
    pub fn new(shape: f64, scale: f64) -> Result<Self> {
        if !(shape.is_finite() && shape > 0.0 && scale.is_finite() && scale > 0.0) {
            return Err(invalid(format!(
                "gamma parameters must be positive, got shape={shape} scale={scale}"
            )));
        }
        Ok(Self { shape, scale })
    }

    pub fn mean(&self) -> f64 {
        self.shape * self.scale
    }

    pub fn variance(&self) -> f64 {
        self.shape * self.scale * self.scale
    }
}

/// Entropic risk of the empirical distribution over `losses`, evaluated
/// without overflow. Callers guarantee `losses` is nonempty.
pub(crate) fn risk_of(losses: &[f64], alpha: f64) -> f64 {
    if alpha == 0.0 {
        return mean(losses);
    }
    let mut scaled: Vec<f64> = losses.iter().map(|&l| alpha * l).collect();
    let lme = log_mean_exp(&scaled);
    scaled.clear();
    lme / alpha
}

/// Empirical entropic risk `(1/alpha) log((1/N) sum exp(alpha * l_i))`.
pub fn empirical_risk(losses: &[f64], alpha: RiskAversion) -> Result<f64> {
    if losses.is_empty() {
        return Err(invalid("empirical risk of an empty scenario set"));
    }
    Ok(risk_of(losses, alpha.value()))
}

/// Closed-form entropic risk of a Gamma(shape, scale) loss. The moment
/// generating function only exists for `scale * alpha < 1`.
pub fn gamma_risk(g: GammaSpec, alpha: RiskAversion) -> Result<f64> {
    let a = alpha.value();
    if a == 0.0 {
        return Ok(g.mean());
    }
    let la = g.scale * a;
    if la >= 1.0 {
        return Err(Error::Domain(format!(
            "gamma mgf diverges: scale*alpha = {la} >= 1"
        )));
    }
    Ok(-g.shape * (-la).ln_1p() / a)
}

/// Closed-form entropic risk of a Gaussian mixture:
/// `(1/alpha) log sum_y pi_y exp(alpha mu_y + alpha^2 sigma_y^2 / 2)`.
pub fn gmm_risk(q: &Gmm, alpha: RiskAversion) -> f64 {
    let a = alpha.value();
    if a == 0.0 {
        return q.mean();
    }
    let terms: Vec<f64> = q
        .components()
        .map(|(w, m, s)| w.ln() + a * m + 0.5 * a * a * s * s)
        .collect();
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = terms.iter().map(|t| (t - max).exp()).sum();
    (max + sum.ln()) / a
}

/// Optimized-certainty-equivalent loss `h(t, l) = t + (exp(alpha (l - t)) - 1) / alpha`.
/// Its expectation is minimized at `t` equal to the entropic risk.
pub fn oce_loss(t: f64, loss: f64, alpha: RiskAversion) -> Result<f64> {
    let a = alpha.value();
    if a == 0.0 {
        return Err(Error::Unsupported(
            "the OCE form of entropic risk needs alpha > 0".into(),
        ));
    }
    Ok(t + (a * (loss - t)).exp_m1() / a)
}

/// Influence of a point mass at `xi_hat` on the entropic risk of a
/// distribution whose moment generating function at `alpha` is `mgf`.
pub fn influence_function(xi_hat: f64, alpha: RiskAversion, mgf: f64) -> Result<f64> {
    let a = alpha.value();
    if a == 0.0 {
        return Err(Error::Unsupported("influence function needs alpha > 0".into()));
    }
    if !(mgf.is_finite() && mgf > 0.0) {
        return Err(invalid(format!("mgf must be positive and finite, got {mgf}")));
    }
    // exp(a x) / mgf evaluated in log space
    Ok(((a * xi_hat - mgf.ln()).exp() - 1.0) / a)
}

/// Risk of group risks: `(1/alpha) log((1/K) sum_k exp(alpha rho_k))`.
/// For equal-size groups this equals the pooled risk.
pub fn nested_risk(group_risks: &[f64], alpha: RiskAversion) -> Result<f64> {
    empirical_risk(group_risks, alpha)
}
