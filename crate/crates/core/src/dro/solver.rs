//! Accelerated proximal gradient for `f(z) + eps ||z||_*` over a box, with
//! `f` smooth and convex.

use super::Norm;
use crate::error::{invalid, Error, Result};

/// Per-coordinate bounds `lower <= z <= upper`.
#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Bounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(invalid("bound vectors differ in length"));
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l <= u) || l.is_nan() || u.is_nan()) {
            return Err(invalid("every lower bound must not exceed its upper bound"));
        }
        Ok(Self { lower, upper })
    }

    pub fn uniform(d: usize, lower: f64, upper: f64) -> Result<Self> {
        Self::new(vec![lower; d], vec![upper; d])
    }

    pub fn unbounded(d: usize) -> Self {
        Self { lower: vec![f64::NEG_INFINITY; d], upper: vec![f64::INFINITY; d] }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn project(&self, z: &mut [f64]) {
        for ((v, l), u) in z.iter_mut().zip(&self.lower).zip(&self.upper) {
            *v = v.clamp(*l, *u);
        }
    }

    fn clamp_at(&self, j: usize, v: f64) -> f64 {
        v.clamp(self.lower[j], self.upper[j])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub max_iter: usize,
    /// Stop once the gradient-map norm falls below this value.
    pub tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { max_iter: 20_000, tol: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub z: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    /// Unit-step gradient-map norm `||z - prox(z - grad f(z))||` at `z`;
    /// zero exactly at a minimizer.
    pub kkt_residual: f64,
}

/// `argmin_{x in bounds} ||x - v||^2 / (2 t) + eps ||x||_*`.
pub fn prox(v: &[f64], t: f64, eps: f64, norm: Norm, bounds: &Bounds) -> Vec<f64> {
    let mut z = v.to_vec();
    if eps == 0.0 {
        bounds.project(&mut z);
        return z;
    }
    let k = t * eps;
    match norm.dual() {
        // Separable: clamp of the soft threshold.
        Norm::L1 => {
            for (j, x) in z.iter_mut().enumerate() {
                let s = x.signum() * (x.abs() - k).max(0.0);
                *x = bounds.clamp_at(j, s);
            }
            z
        }
        Norm::L2 => prox_l2(v, k, bounds),
        Norm::LInf => prox_linf(v, k, bounds),
    }
}

/// Box-constrained prox of `k ||x||_2`. For `x != 0` optimality reads
/// `x = P(v / (1 + mu))` with `mu ||x|| = k`, a scalar root in `mu`.
fn prox_l2(v: &[f64], k: f64, bounds: &Bounds) -> Vec<f64> {
    let at = |mu: f64| -> Vec<f64> {
        let mut x: Vec<f64> = v.iter().map(|vi| vi / (1.0 + mu)).collect();
        bounds.project(&mut x);
        x
    };
    let phi = |mu: f64| mu * Norm::L2.primal(&at(mu));
    let contains_zero = bounds.lower.iter().zip(&bounds.upper).all(|(l, u)| *l <= 0.0 && *u >= 0.0);
    let mut hi = 1.0;
    while phi(hi) < k {
        hi *= 2.0;
        if hi > 1e300 {
            // No root: the minimizer is the origin.
            if contains_zero {
                return vec![0.0; v.len()];
            }
            break;
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if phi(mid) < k {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-16 * hi {
            break;
        }
    }
    let x = at(0.5 * (lo + hi));
    if contains_zero && objective_l2(&x, v, k) > objective_l2(&vec![0.0; v.len()], v, k) {
        return vec![0.0; v.len()];
    }
    x
}

fn objective_l2(x: &[f64], v: &[f64], k: f64) -> f64 {
    0.5 * x.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() + k * Norm::L2.primal(x)
}

/// Box-constrained prox of `k ||x||_inf`: for a level `s >= |x_j|` the best
/// `x_j` is `v_j` clamped to `[max(l_j, -s), min(u_j, s)]`; the optimal
/// level is the root of a monotone derivative.
fn prox_linf(v: &[f64], k: f64, bounds: &Bounds) -> Vec<f64> {
    let d = v.len();
    let s_min = (0..d)
        .map(|j| {
            let (l, u) = (bounds.lower[j], bounds.upper[j]);
            if l > 0.0 {
                l
            } else if u < 0.0 {
                -u
            } else {
                0.0
            }
        })
        .fold(0.0, f64::max);
    let x_at = |s: f64| -> Vec<f64> {
        (0..d)
            .map(|j| v[j].clamp(bounds.lower[j].max(-s), bounds.upper[j].min(s)))
            .collect()
    };
    // d/ds of the quadratic part plus k.
    let slope = |s: f64| -> f64 {
        let mut g = k;
        for j in 0..d {
            if v[j] > s && s < bounds.upper[j] {
                g += s - v[j];
            } else if v[j] < -s && -s > bounds.lower[j] {
                g += s + v[j];
            }
        }
        g
    };
    if slope(s_min) >= 0.0 {
        return x_at(s_min);
    }
    let mut lo = s_min;
    let mut hi = v.iter().fold(s_min, |m, x| m.max(x.abs()));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if slope(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-16 * hi.max(1e-300) {
            break;
        }
    }
    x_at(0.5 * (lo + hi))
}

/// `||z - prox_1(z - grad)||_2`, the unit-step gradient-map norm.
pub fn gradient_map_residual(z: &[f64], grad: &[f64], eps: f64, norm: Norm, bounds: &Bounds) -> f64 {
    let v: Vec<f64> = z.iter().zip(grad).map(|(a, g)| a - g).collect();
    let p = prox(&v, 1.0, eps, norm, bounds);
    z.iter().zip(&p).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

/// Steps without progress before the solver stops short of `tol`.
const STALL_LIMIT: usize = 20;

/// Minimize `f(z) + eps ||z||_*` over `bounds` by FISTA with backtracking
/// and function-value restarts. `f` returns its value and gradient. Stops
/// when the gradient map falls below `tol` or the objective stops moving.
pub fn minimize_regularized<F>(
    f: F,
    eps: f64,
    norm: Norm,
    bounds: &Bounds,
    start: &[f64],
    opts: SolverOptions,
) -> Result<SolveResult>
where
    F: Fn(&[f64]) -> (f64, Vec<f64>),
{
    if start.len() != bounds.dim() {
        return Err(invalid("start point and bounds differ in dimension"));
    }
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(invalid(format!("radius must be finite and >= 0, got {eps}")));
    }
    let reg = |z: &[f64]| eps * norm.dual().primal(z);
    let mut x = start.to_vec();
    bounds.project(&mut x);
    let (mut fx, mut gx) = f(&x);
    let mut obj_x = fx + reg(&x);
    if !obj_x.is_finite() {
        return Err(Error::Numeric { iteration: 0, message: format!("objective {obj_x} at start") });
    }
    let mut y = x.clone();
    let mut momentum = 1.0f64;
    let mut lip = 1.0f64;
    let mut iterations = 0;
    // Consecutive steps without a decrease above rounding level.
    let mut stalled = 0;
    for it in 1..=opts.max_iter {
        iterations = it;
        let (fy, gy) = if y == x { (fx, gx.clone()) } else { f(&y) };
        let mut z;
        loop {
            let v: Vec<f64> = y.iter().zip(&gy).map(|(a, g)| a - g / lip).collect();
            z = prox(&v, 1.0 / lip, eps, norm, bounds);
            let (fz, _) = f(&z);
            let diff: Vec<f64> = z.iter().zip(&y).map(|(a, b)| a - b).collect();
            let model = fy + super::dot(&gy, &diff) + 0.5 * lip * super::dot(&diff, &diff);
            if fz <= model + 1e-12 * (1.0 + fy.abs()) || lip > 1e300 {
                break;
            }
            lip *= 2.0;
        }
        let (fz, gz) = f(&z);
        let obj_z = fz + reg(&z);
        if !obj_z.is_finite() {
            return Err(Error::Numeric { iteration: it, message: format!("objective {obj_z}") });
        }
        let noise = 1e-15 * (1.0 + obj_x.abs());
        stalled = if obj_x - obj_z > noise { 0 } else { stalled + 1 };
        if stalled >= STALL_LIMIT {
            break;
        }
        if obj_z > obj_x {
            // Restart the momentum from the last accepted point.
            y = x.clone();
            momentum = 1.0;
            if z == x {
                break;
            }
            continue;
        }
        let next = 0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt());
        let beta = (momentum - 1.0) / next;
        momentum = next;
        y = z.iter().zip(&x).map(|(a, b)| a + beta * (a - b)).collect();
        bounds.project(&mut y);
        x = z;
        fx = fz;
        gx = gz;
        obj_x = obj_z;
        // Gradient-map norm at the accepted point, scaled to unit step.
        let v: Vec<f64> = x.iter().zip(&gx).map(|(a, g)| a - g / lip).collect();
        let p = prox(&v, 1.0 / lip, eps, norm, bounds);
        let gm = lip * x.iter().zip(&p).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        if gm < opts.tol {
            break;
        }
        lip *= 0.9;
    }
    let kkt_residual = gradient_map_residual(&x, &gx, eps, norm, bounds);
    Ok(SolveResult { z: x, value: obj_x, iterations, kkt_residual })
}
