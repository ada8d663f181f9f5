//! Robust insurance pricing. The insurer picks coverage fractions `z_h`;
//! each premium is the largest one household `h` accepts, so premiums are
//! eliminated in closed form and the insurer solves a box-constrained
//! convex problem in `z`.

use ndarray::{Array2, ArrayView1, ArrayView2};

use crate::cv::CvProblem;
use crate::distributions::{copula_sample, CopulaSpec};
use crate::dro::{dual_norm, minimize_regularized, Bounds, Norm, SolverOptions};
use crate::error::{invalid, Result};
use crate::risk::{risk_of, GammaSpec};
use crate::stats::{log_mean_exp, softmax_into};

/// Coverage below which a household counts as uninsured in per-coverage
/// premium statistics.
pub const MIN_COVERAGE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct InsuranceInstance {
    /// Insurer risk aversion.
    pub alpha0: f64,
    /// Household risk aversions.
    pub alphas: Vec<f64>,
    /// Household loss marginals.
    pub marginals: Vec<GammaSpec>,
    /// Pairwise correlation of the copula's normal scores.
    pub correlation: f64,
}

impl InsuranceInstance {
    pub fn new(alpha0: f64, alphas: Vec<f64>, marginals: Vec<GammaSpec>, correlation: f64) -> Result<Self> {
        let inst = Self { alpha0, alphas, marginals, correlation };
        inst.validate()?;
        Ok(inst)
    }

    pub fn validate(&self) -> Result<()> {
        if self.alphas.is_empty() {
            return Err(invalid("instance needs at least one household"));
        }
        if self.alphas.len() != self.marginals.len() {
            return Err(invalid(format!(
                "{} risk aversions but {} marginals",
                self.alphas.len(),
                self.marginals.len()
            )));
        }
        if std::iter::once(&self.alpha0).chain(&self.alphas).any(|a| !(a.is_finite() && *a > 0.0)) {
            return Err(invalid("every risk aversion must be positive"));
        }
        if !(0.0..=1.0).contains(&self.correlation) {
            return Err(invalid(format!("correlation must lie in [0, 1], got {}", self.correlation)));
        }
        Ok(())
    }

    pub fn households(&self) -> usize {
        self.alphas.len()
    }

    /// Five households with risk aversions 2.9, 2.7, ..., 2.1 facing a
    /// common Gamma marginal, insurer risk aversion 2.
    pub fn standard(marginal: GammaSpec, correlation: f64) -> Result<Self> {
        Self::new(2.0, vec![2.9, 2.7, 2.5, 2.3, 2.1], vec![marginal; 5], correlation)
    }
}

/// Coverage fractions and premiums.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    pub coverage: Vec<f64>,
    pub premium: Vec<f64>,
}

impl Policy {
    pub fn total_premium(&self) -> f64 {
        self.premium.iter().sum()
    }
}

/// Joint loss scenarios, one column per household.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketData {
    pub joint: Array2<f64>,
}

impl MarketData {
    pub fn new(joint: Array2<f64>) -> Result<Self> {
        if joint.nrows() == 0 || joint.ncols() == 0 {
            return Err(invalid("market data is empty"));
        }
        Ok(Self { joint })
    }

    pub fn column(&self, h: usize) -> Vec<f64> {
        self.joint.column(h).to_vec()
    }
}

/// Largest premium household `h` accepts for coverage `zh`:
/// `(1/a) [log E exp(a xi) - log E exp(a (1 - zh) xi)]`.
pub fn premium(zh: f64, col: &[f64], ah: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&zh) {
        return Err(invalid(format!("coverage must lie in [0, 1], got {zh}")));
    }
    if col.is_empty() {
        return Err(invalid("household column is empty"));
    }
    if !(ah > 0.0) {
        return Err(invalid("household risk aversion must be positive"));
    }
    Ok(premium_unchecked(zh, col, ah))
}

fn premium_unchecked(zh: f64, col: &[f64], ah: f64) -> f64 {
    if zh == 0.0 {
        return 0.0;
    }
    let full: Vec<f64> = col.iter().map(|x| ah * x).collect();
    let kept: Vec<f64> = col.iter().map(|x| ah * (1.0 - zh) * x).collect();
    (log_mean_exp(&full) - log_mean_exp(&kept)) / ah
}

/// Derivative of the premium in `zh`: the tilted mean of the column under
/// weights proportional to `exp(a (1 - zh) xi)`.
fn premium_slope(zh: f64, col: &[f64], ah: f64) -> f64 {
    let kept: Vec<f64> = col.iter().map(|x| ah * (1.0 - zh) * x).collect();
    let mut w = vec![0.0; col.len()];
    softmax_into(&kept, &mut w);
    w.iter().zip(col).map(|(a, b)| a * b).sum()
}

fn check_decision(z: &[f64], data: &MarketData, inst: &InsuranceInstance) -> Result<()> {
    if z.len() != inst.households() || data.joint.ncols() != inst.households() {
        return Err(invalid("coverage, data and instance disagree on the household count"));
    }
    Ok(())
}

/// Smooth part of the insurer objective and its gradient.
fn smooth_part(z: &[f64], joint: &ArrayView2<'_, f64>, columns: &[Vec<f64>], inst: &InsuranceInstance) -> (f64, Vec<f64>) {
    let a0 = inst.alpha0;
    let losses: Vec<f64> = joint.rows().into_iter().map(|r| r.iter().zip(z).map(|(x, y)| x * y).sum()).collect();
    let scaled: Vec<f64> = losses.iter().map(|l| a0 * l).collect();
    let mut w = vec![0.0; losses.len()];
    softmax_into(&scaled, &mut w);
    let mut grad = vec![0.0; z.len()];
    for (row, wi) in joint.rows().into_iter().zip(&w) {
        for (g, x) in grad.iter_mut().zip(row.iter()) {
            *g += wi * x;
        }
    }
    let mut value = risk_of(&losses, a0);
    for h in 0..z.len() {
        let zh = z[h].clamp(0.0, 1.0);
        value -= premium_unchecked(zh, &columns[h], inst.alphas[h]);
        grad[h] -= premium_slope(zh, &columns[h], inst.alphas[h]);
    }
    (value, grad)
}

fn columns_of(joint: &ArrayView2<'_, f64>) -> Vec<Vec<f64>> {
    joint.columns().into_iter().map(|c| c.to_vec()).collect()
}

/// Insurer's robust objective: entropic risk at `alpha0` of the covered
/// losses, minus the premiums, plus `eps ||z||_*`.
pub fn insurer_objective(z: &[f64], data: &MarketData, inst: &InsuranceInstance, eps: f64, norm: Norm) -> Result<f64> {
    Ok(insurer_objective_grad(z, data, inst, eps, norm)?.0)
}

/// Objective and a (sub)gradient. The regularizer contributes its gradient
/// where the dual norm is differentiable.
pub fn insurer_objective_grad(
    z: &[f64],
    data: &MarketData,
    inst: &InsuranceInstance,
    eps: f64,
    norm: Norm,
) -> Result<(f64, Vec<f64>)> {
    check_decision(z, data, inst)?;
    if z.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(invalid("coverage must lie in [0, 1]"));
    }
    let joint = data.joint.view();
    let (mut value, mut grad) = smooth_part(z, &joint, &columns_of(&joint), inst);
    value += eps * dual_norm(z, norm);
    if eps > 0.0 {
        for (g, s) in grad.iter_mut().zip(dual_subgradient(z, norm)) {
            *g += eps * s;
        }
    }
    Ok((value, grad))
}

fn dual_subgradient(z: &[f64], norm: Norm) -> Vec<f64> {
    match norm.dual() {
        Norm::L1 => z.iter().map(|x| if *x == 0.0 { 0.0 } else { x.signum() }).collect(),
        Norm::L2 => {
            let n = Norm::L2.primal(z);
            if n == 0.0 {
                vec![0.0; z.len()]
            } else {
                z.iter().map(|x| x / n).collect()
            }
        }
        Norm::LInf => {
            let mut g = vec![0.0; z.len()];
            if let Some((j, _)) = z.iter().enumerate().max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()).then(b.0.cmp(&a.0))) {
                if z[j] != 0.0 {
                    g[j] = z[j].signum();
                }
            }
            g
        }
    }
}

/// Optimal policy with the solver's diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct PricingSolution {
    pub policy: Policy,
    /// Optimal objective value (in-sample robust risk).
    pub value: f64,
    pub iterations: usize,
    pub kkt_residual: f64,
}

/// Minimize the insurer objective over `[0, 1]^M` and fill in premiums.
pub fn solve_pricing(data: &MarketData, inst: &InsuranceInstance, eps: f64, norm: Norm) -> Result<PricingSolution> {
    solve_pricing_view(data.joint.view(), inst, eps, norm)
}

fn solve_pricing_view(joint: ArrayView2<'_, f64>, inst: &InsuranceInstance, eps: f64, norm: Norm) -> Result<PricingSolution> {
    inst.validate()?;
    let m = inst.households();
    if joint.ncols() != m || joint.nrows() == 0 {
        return Err(invalid("market data does not match the instance"));
    }
    let columns = columns_of(&joint);
    let bounds = Bounds::uniform(m, 0.0, 1.0)?;
    let opts = SolverOptions { max_iter: 20_000, tol: 1e-7 };
    let res = minimize_regularized(
        |z| smooth_part(z, &joint, &columns, inst),
        eps,
        norm,
        &bounds,
        &vec![0.5; m],
        opts,
    )?;
    let premium = (0..m).map(|h| premium_unchecked(res.z[h], &columns[h], inst.alphas[h])).collect();
    Ok(PricingSolution {
        policy: Policy { coverage: res.z, premium },
        value: res.value,
        iterations: res.iterations,
        kkt_residual: res.kkt_residual,
    })
}

/// Insurer loss `z^T xi - sum(pi)` of one scenario.
pub fn insurer_loss(policy: &Policy, row: ArrayView1<'_, f64>) -> f64 {
    row.iter().zip(&policy.coverage).map(|(x, z)| x * z).sum::<f64>() - policy.total_premium()
}

/// Entropic risk at `alpha0` of the insurer loss over `test` rows.
pub fn out_of_sample_risk(policy: &Policy, test: ArrayView2<'_, f64>, alpha0: f64) -> Result<f64> {
    if test.nrows() == 0 {
        return Err(invalid("test set is empty"));
    }
    if test.ncols() != policy.coverage.len() {
        return Err(invalid("test columns do not match the policy"));
    }
    let losses: Vec<f64> = test.rows().into_iter().map(|r| insurer_loss(policy, r)).collect();
    Ok(risk_of(&losses, alpha0))
}

/// `n` joint loss scenarios from the instance's copula.
pub fn generate_market(inst: &InsuranceInstance, n: usize, seed: u64) -> Result<MarketData> {
    inst.validate()?;
    let spec = CopulaSpec::new(inst.correlation, inst.marginals.clone())?;
    MarketData::new(copula_sample(&spec, n, seed)?)
}

/// Premium per unit of expected coverage, `pi_h / (z_h E[xi_h])`, or `None`
/// for households with coverage below [`MIN_COVERAGE`].
pub fn premium_per_coverage(policy: &Policy, inst: &InsuranceInstance) -> Vec<Option<f64>> {
    policy
        .coverage
        .iter()
        .zip(&policy.premium)
        .zip(&inst.marginals)
        .map(|((&z, &p), g)| (z >= MIN_COVERAGE).then(|| p / (z * g.mean())))
        .collect()
}

/// The pricing problem as a cross-validation target.
#[derive(Debug, Clone)]
pub struct PricingProblem {
    pub instance: InsuranceInstance,
    pub norm: Norm,
}

impl CvProblem for PricingProblem {
    type Decision = Policy;

    fn solve(&self, train: ArrayView2<'_, f64>, eps: f64) -> Result<Policy> {
        Ok(solve_pricing_view(train, &self.instance, eps, self.norm)?.policy)
    }

    fn loss(&self, policy: &Policy, row: ArrayView1<'_, f64>) -> f64 {
        insurer_loss(policy, row)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn one_household(a0: f64, a1: f64) -> InsuranceInstance {
        InsuranceInstance::new(a0, vec![a1], vec![GammaSpec::new(2.0, 1.0).unwrap()], 0.0).unwrap()
    }

    #[test]
    fn premium_endpoints() {
        let col = [0.5, 2.0, 1.0, 3.5];
        assert_eq!(premium(0.0, &col, 2.0).unwrap(), 0.0);
        let full = premium(1.0, &col, 2.0).unwrap();
        assert!((full - risk_of(&col, 2.0)).abs() < 1e-12);
        assert!(premium(1.5, &col, 2.0).is_err());
    }

    #[test]
    fn premium_is_monotone() {
        let col = [0.5, 2.0, 1.0, 3.5, 0.0];
        let mut prev = 0.0;
        for i in 0..=100 {
            let p = premium(i as f64 / 100.0, &col, 2.5).unwrap();
            assert!(p >= prev - 1e-15);
            prev = p;
        }
    }

    #[test]
    fn objective_examples() {
        let data = MarketData::new(array![[0.5], [2.0], [1.0]]).unwrap();
        let inst = one_household(1.5, 2.5);
        assert_eq!(insurer_objective(&[0.0], &data, &inst, 0.0, Norm::L2).unwrap(), 0.0);
        let col = data.column(0);
        let v = insurer_objective(&[1.0], &data, &inst, 0.0, Norm::L2).unwrap();
        assert!((v - (risk_of(&col, 1.5) - risk_of(&col, 2.5))).abs() < 1e-12);
    }

    #[test]
    fn shared_risk_aversion_never_loses() {
        // With equal risk aversions the objective is rho(z xi) + rho((1-z) xi)
        // - rho(xi) <= 0, zero only at the ends.
        let data = MarketData::new(array![[0.5], [2.0], [1.0], [4.0]]).unwrap();
        let inst = one_household(2.0, 2.0);
        for i in 0..=20 {
            let z = i as f64 / 20.0;
            let v = insurer_objective(&[z], &data, &inst, 0.0, Norm::L2).unwrap();
            assert!(v <= 1e-12, "{z}: {v}");
        }
        let sol = solve_pricing(&data, &inst, 0.0, Norm::L2).unwrap();
        assert!(sol.value <= 1e-8);
        assert!((sol.policy.coverage[0] - 0.5).abs() < 1e-5);
    }

    #[test]
    fn huge_radius_removes_coverage() {
        let data = MarketData::new(array![[0.5, 1.0], [2.0, 0.3], [1.0, 1.2]]).unwrap();
        let inst = InsuranceInstance::new(2.0, vec![2.9, 2.7], vec![GammaSpec::new(2.0, 1.0).unwrap(); 2], 0.5).unwrap();
        let sol = solve_pricing(&data, &inst, 1e3, Norm::L2).unwrap();
        assert!(sol.policy.coverage.iter().all(|&z| z < 1e-9), "{:?}", sol.policy);
    }

    #[test]
    fn out_of_sample_examples() {
        let test = array![[1.0, 2.0], [0.5, 0.5]];
        let none = Policy { coverage: vec![0.0, 0.0], premium: vec![0.0, 0.0] };
        assert_eq!(out_of_sample_risk(&none, test.view(), 2.0).unwrap(), 0.0);
        let p = Policy { coverage: vec![0.5, 1.0], premium: vec![0.3, 0.4] };
        let richer = Policy { premium: vec![0.5, 0.6], ..p.clone() };
        let a = out_of_sample_risk(&p, test.view(), 2.0).unwrap();
        let b = out_of_sample_risk(&richer, test.view(), 2.0).unwrap();
        assert!((a - b - 0.4).abs() < 1e-12);
    }

    #[test]
    fn per_coverage_skips_uninsured() {
        let inst = InsuranceInstance::standard(GammaSpec::new(10.0, 0.45).unwrap(), 0.5).unwrap();
        let p = Policy { coverage: vec![0.0, 0.5, 1.0, 1e-9, 0.2], premium: vec![0.0, 2.25, 4.5, 0.0, 0.9] };
        let s = premium_per_coverage(&p, &inst);
        assert_eq!(s[0], None);
        assert_eq!(s[3], None);
        assert!((s[1].unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_instances() {
        let g = GammaSpec::new(1.0, 1.0).unwrap();
        assert!(InsuranceInstance::new(0.0, vec![1.0], vec![g], 0.5).is_err());
        assert!(InsuranceInstance::new(1.0, vec![1.0, 2.0], vec![g], 0.5).is_err());
        assert!(InsuranceInstance::new(1.0, vec![1.0], vec![g], 1.5).is_err());
    }
}
