//! Robust linear, newsvendor and regression problems.

use ndarray::{Array2, ArrayView2};

use super::solver::{minimize_regularized, Bounds, SolveResult, SolverOptions};
use super::{dot, dual_norm, AmbiguityBall, Norm};
use crate::error::{invalid, Error, Result};
use crate::risk::{risk_of, RiskAversion};
use crate::stats::softmax_into;

/// Value and gradient of the empirical entropic risk of `z^T xi`.
pub(crate) fn linear_risk_and_grad(z: &[f64], scenarios: &ArrayView2<'_, f64>, a: f64) -> (f64, Vec<f64>) {
    let losses: Vec<f64> = scenarios.rows().into_iter().map(|r| r.iter().zip(z).map(|(x, y)| x * y).sum()).collect();
    let n = losses.len();
    let mut w = vec![1.0 / n as f64; n];
    if a != 0.0 {
        let scaled: Vec<f64> = losses.iter().map(|l| a * l).collect();
        softmax_into(&scaled, &mut w);
    }
    let mut grad = vec![0.0; z.len()];
    for (row, wi) in scenarios.rows().into_iter().zip(&w) {
        for (g, x) in grad.iter_mut().zip(row.iter()) {
            *g += wi * x;
        }
    }
    (risk_of(&losses, a), grad)
}

/// Minimize `empirical risk of z^T xi + radius ||z||_*` over `bounds`.
pub fn dro_solve_linear(
    scenarios: ArrayView2<'_, f64>,
    alpha: RiskAversion,
    ball: AmbiguityBall,
    bounds: &Bounds,
    opts: SolverOptions,
) -> Result<SolveResult> {
    if scenarios.nrows() == 0 {
        return Err(invalid("no scenarios"));
    }
    if scenarios.ncols() != bounds.dim() {
        return Err(invalid("bounds and scenarios differ in dimension"));
    }
    let a = alpha.value();
    let start = vec![0.0; bounds.dim()];
    minimize_regularized(
        |z| linear_risk_and_grad(z, &scenarios, a),
        ball.radius,
        ball.norm,
        bounds,
        &start,
        opts,
    )
}

/// Costs of ordering (`order`), unmet demand (`backorder`) and leftover
/// stock (`holding`) per unit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewsvendorSpec {
    pub order: f64,
    pub backorder: f64,
    pub holding: f64,
}

impl NewsvendorSpec {
    pub fn new(order: f64, backorder: f64, holding: f64) -> Result<Self> {
        if [order, backorder, holding].iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
            return Err(invalid("newsvendor costs must be finite and >= 0"));
        }
        Ok(Self { order, backorder, holding })
    }
}

/// Newsvendor loss `w z + b (xi - z)_+ + h (z - xi)_+` for order `z` and demand `xi`.
pub fn newsvendor_loss(spec: &NewsvendorSpec, z: f64, xi: f64) -> f64 {
    spec.order * z + spec.backorder * (xi - z).max(0.0) + spec.holding * (z - xi).max(0.0)
}

/// Worst-case entropic risk of ordering `z` when each demand may move by `eps`.
/// Each scenario contributes the larger of `b (xi + eps) + z (w - b)` and
/// `h (eps - xi) + z (w + h)`.
pub fn dro_value_newsvendor(spec: &NewsvendorSpec, demands: &[f64], z: f64, alpha: RiskAversion, eps: f64) -> f64 {
    let (w, b, h) = (spec.order, spec.backorder, spec.holding);
    let t: Vec<f64> = demands
        .iter()
        .map(|&xi| (b * (xi + eps) + z * (w - b)).max(h * (eps - xi) + z * (w + h)))
        .collect();
    risk_of(&t, alpha.value())
}

/// Robust order quantity by golden-section search on `[0, max demand + eps]`.
pub fn dro_solve_newsvendor(
    spec: &NewsvendorSpec,
    demands: &[f64],
    alpha: RiskAversion,
    eps: f64,
) -> Result<(f64, f64)> {
    if demands.is_empty() {
        return Err(invalid("no demand scenarios"));
    }
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(invalid(format!("radius must be finite and >= 0, got {eps}")));
    }
    let f = |z: f64| dro_value_newsvendor(spec, demands, z, alpha, eps);
    let top = demands.iter().copied().fold(f64::NEG_INFINITY, f64::max) + eps;
    let (mut lo, mut hi) = (0.0, top.max(0.0));
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = hi - ratio * (hi - lo);
    let mut d = lo + ratio * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    while hi - lo > 1e-8 {
        if fc <= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - ratio * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + ratio * (hi - lo);
            fd = f(d);
        }
    }
    // The interval ends can beat interior points on flat or monotone objectives.
    let best = [(0.5 * (lo + hi)), 0.0, top.max(0.0)]
        .into_iter()
        .map(|z| (z, f(z)))
        .fold((f64::NAN, f64::INFINITY), |acc, p| if p.1 < acc.1 { p } else { acc });
    Ok(best)
}

/// Rows of features with a scalar label.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionData {
    features: Array2<f64>,
    labels: Vec<f64>,
}

impl RegressionData {
    pub fn new(features: Array2<f64>, labels: Vec<f64>) -> Result<Self> {
        if features.nrows() != labels.len() {
            return Err(invalid(format!(
                "{} feature rows but {} labels",
                features.nrows(),
                labels.len()
            )));
        }
        if labels.is_empty() {
            return Err(invalid("regression needs at least one row"));
        }
        Ok(Self { features, labels })
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    fn residuals(&self, z: &[f64]) -> Vec<f64> {
        self.features
            .rows()
            .into_iter()
            .zip(&self.labels)
            .map(|(x, y)| y - x.iter().zip(z).map(|(a, b)| a * b).sum::<f64>())
            .collect()
    }
}

fn augmented(z: &[f64]) -> Vec<f64> {
    std::iter::once(-1.0).chain(z.iter().copied()).collect()
}

/// `empirical risk of |y - x^T z| + eps ||(-1, z)||_*`.
pub fn dro_value_regression(data: &RegressionData, z: &[f64], alpha: RiskAversion, eps: f64, norm: Norm) -> Result<f64> {
    if z.len() != data.dim() {
        return Err(invalid("coefficient length differs from feature count"));
    }
    let abs: Vec<f64> = data.residuals(z).iter().map(|r| r.abs()).collect();
    Ok(risk_of(&abs, alpha.value()) + eps * dual_norm(&augmented(z), norm))
}

/// Robust regression by subgradient descent with steps `step0 / sqrt(t)`,
/// returning the best iterate. The subgradient of `|r|` at zero is taken as 0.
pub fn dro_solve_regression(
    data: &RegressionData,
    alpha: RiskAversion,
    eps: f64,
    norm: Norm,
    max_iter: usize,
) -> Result<(Vec<f64>, f64)> {
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(invalid(format!("radius must be finite and >= 0, got {eps}")));
    }
    let d = data.dim();
    let a = alpha.value();
    let scale = data.features.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1.0);
    let step0 = 1.0 / scale;
    let mut z = vec![0.0; d];
    let mut best = (z.clone(), dro_value_regression(data, &z, alpha, eps, norm)?);
    for t in 1..=max_iter {
        let r = data.residuals(&z);
        let abs: Vec<f64> = r.iter().map(|v| v.abs()).collect();
        let mut w = vec![1.0 / abs.len() as f64; abs.len()];
        if a != 0.0 {
            let scaled: Vec<f64> = abs.iter().map(|v| a * v).collect();
            softmax_into(&scaled, &mut w);
        }
        let mut g = vec![0.0; d];
        for ((x, ri), wi) in data.features.rows().into_iter().zip(&r).zip(&w) {
            let s = if *ri > 0.0 { -1.0 } else if *ri < 0.0 { 1.0 } else { 0.0 };
            for (gj, xj) in g.iter_mut().zip(x.iter()) {
                *gj += wi * s * xj;
            }
        }
        let reg = norm_subgradient(&augmented(&z), norm.dual());
        for (gj, rj) in g.iter_mut().zip(&reg[1..]) {
            *gj += eps * rj;
        }
        let gamma = step0 / (t as f64).sqrt();
        for (zj, gj) in z.iter_mut().zip(&g) {
            *zj -= gamma * gj;
        }
        let v = dro_value_regression(data, &z, alpha, eps, norm)?;
        if !v.is_finite() {
            return Err(Error::Numeric { iteration: t, message: format!("objective {v}") });
        }
        if v < best.1 {
            best = (z.clone(), v);
        }
    }
    Ok(best)
}

/// A subgradient of `norm` at `v`; ties go to the first maximizing entry.
fn norm_subgradient(v: &[f64], norm: Norm) -> Vec<f64> {
    match norm {
        Norm::L1 => v.iter().map(|x| x.signum() * f64::from(*x != 0.0)).collect(),
        Norm::L2 => {
            let n = Norm::L2.primal(v);
            if n == 0.0 {
                vec![0.0; v.len()]
            } else {
                v.iter().map(|x| x / n).collect()
            }
        }
        Norm::LInf => {
            let mut g = vec![0.0; v.len()];
            let mut best = 0;
            for (j, x) in v.iter().enumerate() {
                if x.abs() > v[best].abs() {
                    best = j;
                }
            }
            if v[best] != 0.0 {
                g[best] = v[best].signum();
            }
            g
        }
    }
}

/// Left side of one dual constraint of the robust reformulation:
/// `phi^T xi_hat - conj(phi) + eps ||phi||_*`, where `conj` is the concave
/// conjugate of the loss piece in the scenario. `conj` returns `None` when
/// the conjugate is minus infinity at `phi`.
pub fn fenchel_constraint_value<C>(xi_hat: &[f64], phi: &[f64], conj: C, eps: f64, norm: Norm) -> Result<f64>
where
    C: Fn(&[f64]) -> Option<f64>,
{
    if xi_hat.len() != phi.len() {
        return Err(invalid("scenario and dual vector differ in length"));
    }
    match conj(phi) {
        Some(c) => Ok(dot(phi, xi_hat) - c + eps * dual_norm(phi, norm)),
        None => Err(Error::Domain("conjugate is minus infinity at this dual point".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn ra(a: f64) -> RiskAversion {
        RiskAversion::new(a).unwrap()
    }

    #[test]
    fn newsvendor_examples() {
        let s = NewsvendorSpec::new(0.0, 1.0, 1.0).unwrap();
        let (z, v) = dro_solve_newsvendor(&s, &[5.0], ra(1.0), 0.0).unwrap();
        assert!((z - 5.0).abs() < 1e-7 && v.abs() < 1e-7, "{z} {v}");
        let (z, v) = dro_solve_newsvendor(&s, &[5.0], ra(1.0), 1.0).unwrap();
        let brute = [4.0, 6.0].iter().map(|&xi| newsvendor_loss(&s, z, xi)).fold(f64::MIN, f64::max);
        assert!((v - brute).abs() < 1e-9);
        assert!((v - 1.0).abs() < 1e-7);
        let free = NewsvendorSpec::new(2.0, 0.0, 0.0).unwrap();
        let (z, v) = dro_solve_newsvendor(&free, &[5.0, 3.0], ra(1.0), 0.5).unwrap();
        assert_eq!(z, 0.0);
        assert_eq!(v, 0.0);
    }

    #[test]
    fn regression_spot_value() {
        let data = RegressionData::new(array![[1.0]], vec![2.0]).unwrap();
        let v = dro_value_regression(&data, &[2.0], ra(1.0), 0.5, Norm::L2).unwrap();
        assert!((v - 0.5 * 5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn regression_fits_exact_data() {
        let data = RegressionData::new(array![[1.0], [2.0], [-1.0]], vec![1.5, 3.0, -1.5]).unwrap();
        let (z, v) = dro_solve_regression(&data, ra(1.0), 0.0, Norm::L2, 20_000).unwrap();
        assert!((z[0] - 1.5).abs() < 1e-2, "{z:?}");
        assert!(v < 1e-2);
    }

    #[test]
    fn linear_solver_small_cases() {
        let x = array![[0.5], [1.0], [2.0]];
        let b = Bounds::uniform(1, 0.0, 1.0).unwrap();
        let ball = AmbiguityBall::new(0.0, Norm::L2).unwrap();
        let r = dro_solve_linear(x.view(), ra(1.0), ball, &b, SolverOptions::default()).unwrap();
        assert_eq!(r.z, vec![0.0]);
        assert!(r.value.abs() < 1e-15);
    }

    #[test]
    fn fenchel_branches() {
        let s = NewsvendorSpec::new(0.3, 1.2, 0.4).unwrap();
        let (z, xi, eps) = (2.5, 4.0, 0.7);
        // Overage piece w z + b (xi - z): conjugate (b - w) z at phi = b.
        let conj = |phi: &[f64]| ((phi[0] - s.backorder).abs() < 1e-15).then_some((s.backorder - s.order) * z);
        let v = fenchel_constraint_value(&[xi], &[s.backorder], conj, eps, Norm::L2).unwrap();
        assert!((v - (s.backorder * (xi + eps) + z * (s.order - s.backorder))).abs() < 1e-12);
        assert!(fenchel_constraint_value(&[xi], &[0.5], conj, eps, Norm::L2).is_err());
        let zero = fenchel_constraint_value(&[xi], &[0.0], |_| Some(0.0), eps, Norm::L2).unwrap();
        assert_eq!(zero, 0.0);
    }
}
