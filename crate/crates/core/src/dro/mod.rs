//! Type-∞ Wasserstein distributionally robust entropic risk: worst-case
//! values in closed form, brute-force oracles and solvers.
//!
//! Every scenario may move by at most `radius` in the ball's norm. For
//! losses linear in the scenario the worst case adds `radius * ||z||_*` to
//! each scenario loss, where `||.||_*` is the dual norm.

mod problems;
mod solver;

pub use problems::{
    dro_solve_linear, dro_solve_newsvendor, dro_solve_regression, dro_value_newsvendor,
    dro_value_regression, fenchel_constraint_value, newsvendor_loss, NewsvendorSpec,
    RegressionData,
};
pub use solver::{gradient_map_residual, minimize_regularized, prox, Bounds, SolveResult, SolverOptions};

use std::fmt;
use std::str::FromStr;

use ndarray::ArrayView2;

use crate::error::{invalid, Error, Result};
use crate::risk::{risk_of, RiskAversion};

/// Norm measuring how far a scenario may move.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Norm {
    L1,
    #[default]
    L2,
    LInf,
}

impl Norm {
    /// The norm itself.
    pub fn primal(self, v: &[f64]) -> f64 {
        match self {
            Norm::L1 => v.iter().map(|x| x.abs()).sum(),
            Norm::L2 => v.iter().map(|x| x * x).sum::<f64>().sqrt(),
            Norm::LInf => v.iter().fold(0.0, |m, x| m.max(x.abs())),
        }
    }

    /// Its dual: L1 and L-infinity swap, L2 is self-dual.
    pub fn dual(self) -> Norm {
        match self {
            Norm::L1 => Norm::LInf,
            Norm::L2 => Norm::L2,
            Norm::LInf => Norm::L1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Norm::L1 => "l1",
            Norm::L2 => "l2",
            Norm::LInf => "linf",
        }
    }
}

impl fmt::Display for Norm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Norm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "l1" | "1" => Ok(Norm::L1),
            "l2" | "2" => Ok(Norm::L2),
            "linf" | "inf" | "max" => Ok(Norm::LInf),
            _ => Err(invalid(format!("unknown norm '{s}' (expected l1, l2 or linf)"))),
        }
    }
}

/// `||v||_*` for the dual of `norm`.
pub fn dual_norm(v: &[f64], norm: Norm) -> f64 {
    norm.dual().primal(v)
}

/// Radius and norm of the ambiguity ball around each scenario.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmbiguityBall {
    pub radius: f64,
    pub norm: Norm,
}

impl AmbiguityBall {
    pub fn new(radius: f64, norm: Norm) -> Result<Self> {
        if !(radius.is_finite() && radius >= 0.0) {
            return Err(invalid(format!("radius must be finite and >= 0, got {radius}")));
        }
        Ok(Self { radius, norm })
    }
}

/// Loss `max_k (a_k * s + b_k)` of the scalar `s = z^T xi`.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinearLoss {
    pieces: Vec<(f64, f64)>,
}

impl PiecewiseLinearLoss {
    pub fn new(pieces: Vec<(f64, f64)>) -> Result<Self> {
        if pieces.is_empty() {
            return Err(invalid("piecewise linear loss needs at least one piece"));
        }
        if pieces.iter().any(|(a, b)| !a.is_finite() || !b.is_finite()) {
            return Err(invalid("piece coefficients must be finite"));
        }
        Ok(Self { pieces })
    }

    pub fn pieces(&self) -> &[(f64, f64)] {
        &self.pieces
    }

    pub fn eval(&self, s: f64) -> f64 {
        self.pieces.iter().map(|(a, b)| a * s + b).fold(f64::NEG_INFINITY, f64::max)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_dims(z: &[f64], scenarios: &ArrayView2<'_, f64>) -> Result<()> {
    if scenarios.nrows() == 0 {
        return Err(invalid("no scenarios"));
    }
    if scenarios.ncols() != z.len() {
        return Err(invalid(format!(
            "decision has {} entries but scenarios have {} columns",
            z.len(),
            scenarios.ncols()
        )));
    }
    Ok(())
}

fn row_losses(z: &[f64], scenarios: &ArrayView2<'_, f64>) -> Vec<f64> {
    scenarios.rows().into_iter().map(|r| r.iter().zip(z).map(|(x, y)| x * y).sum()).collect()
}

/// Worst-case entropic risk of the linear loss `z^T xi`:
/// `empirical risk of z^T xi_i + radius * ||z||_*`.
pub fn dro_value_linear(
    z: &[f64],
    scenarios: ArrayView2<'_, f64>,
    alpha: RiskAversion,
    ball: AmbiguityBall,
) -> Result<f64> {
    check_dims(z, &scenarios)?;
    let losses = row_losses(z, &scenarios);
    Ok(risk_of(&losses, alpha.value()) + ball.radius * dual_norm(z, ball.norm))
}

/// Worst-case entropic risk of a piecewise linear loss of `z^T xi`. Each
/// scenario contributes `max_k (a_k z^T xi_i + b_k + radius |a_k| ||z||_*)`.
pub fn dro_value_piecewise(
    z: &[f64],
    loss: &PiecewiseLinearLoss,
    scenarios: ArrayView2<'_, f64>,
    alpha: RiskAversion,
    ball: AmbiguityBall,
) -> Result<f64> {
    check_dims(z, &scenarios)?;
    let reach = ball.radius * dual_norm(z, ball.norm);
    let worst: Vec<f64> = row_losses(z, &scenarios)
        .into_iter()
        .map(|s| {
            loss.pieces
                .iter()
                .map(|(a, b)| a * s + b + reach * a.abs())
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    Ok(risk_of(&worst, alpha.value()))
}

/// Worst-case entropic risk by enumeration: for each scenario, the largest
/// loss over a grid of the ball around it (including boundary points),
/// then the empirical entropic risk of those maxima. `loss(z, xi)`.
///
/// In one dimension the grid spans the interval with both endpoints, so
/// `grid = 2` is exact for losses that are piecewise linear in `xi`.
/// Dimensions above three are refused.
pub fn worst_case_brute<F>(
    z: &[f64],
    loss: F,
    scenarios: ArrayView2<'_, f64>,
    alpha: RiskAversion,
    ball: AmbiguityBall,
    grid: usize,
) -> Result<f64>
where
    F: Fn(&[f64], &[f64]) -> f64,
{
    let d = scenarios.ncols();
    if d == 0 || d > 3 {
        return Err(Error::Unsupported(format!(
            "brute-force worst case supports 1 to 3 dimensions, got {d}"
        )));
    }
    if scenarios.nrows() == 0 {
        return Err(invalid("no scenarios"));
    }
    if ball.radius > 0.0 && grid < 2 {
        return Err(invalid("grid needs at least two points per axis"));
    }
    let offsets = ball_offsets(d, ball, grid);
    let mut xi = vec![0.0; d];
    let worst: Vec<f64> = scenarios
        .rows()
        .into_iter()
        .map(|row| {
            offsets
                .iter()
                .map(|off| {
                    for j in 0..d {
                        xi[j] = row[j] + off[j];
                    }
                    loss(z, &xi)
                })
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    Ok(risk_of(&worst, alpha.value()))
}

/// Grid offsets inside the ball plus their radial projections onto its
/// boundary.
fn ball_offsets(d: usize, ball: AmbiguityBall, grid: usize) -> Vec<Vec<f64>> {
    let eps = ball.radius;
    if eps == 0.0 {
        return vec![vec![0.0; d]];
    }
    let axis: Vec<f64> = (0..grid)
        .map(|i| -eps + 2.0 * eps * i as f64 / (grid - 1) as f64)
        .collect();
    let mut out = Vec::new();
    let mut idx = vec![0usize; d];
    loop {
        let p: Vec<f64> = idx.iter().map(|&i| axis[i]).collect();
        let r = ball.norm.primal(&p);
        if r <= eps * (1.0 + 1e-12) {
            out.push(p.clone());
        }
        if r > 0.0 {
            out.push(p.iter().map(|v| v * eps / r).collect());
        }
        // odometer increment
        let mut k = 0;
        loop {
            if k == d {
                return out;
            }
            idx[k] += 1;
            if idx[k] < grid {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}
