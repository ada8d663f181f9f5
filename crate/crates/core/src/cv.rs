//! K-fold cross validation of robust decisions and radius selection with an
//! optional bootstrap bias correction.

use std::io::{self, Write};

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::estimators::{bias_for, BiasMethod, EstimatorConfig};
use crate::risk::{risk_of, RiskAversion};
use crate::rng::{derive_seed, rng};

/// A decision problem that can be trained at a radius and scored per row.
pub trait CvProblem: Sync {
    type Decision: Send;

    fn solve(&self, train: ArrayView2<'_, f64>, eps: f64) -> Result<Self::Decision>;

    fn loss(&self, decision: &Self::Decision, row: ArrayView1<'_, f64>) -> f64;
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvConfig {
    pub folds: usize,
    /// Candidate radii, ascending.
    pub grid: Vec<f64>,
    pub method: BiasMethod,
    /// Bootstrap repetitions and fitting settings for the correction.
    pub estimator: EstimatorConfig,
    /// Shuffle rows (seeded) before striding them into folds.
    pub shuffle: bool,
    pub seed: u64,
}

impl CvConfig {
    pub fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(invalid("cross validation needs at least two folds"));
        }
        if self.grid.is_empty() {
            return Err(invalid("radius grid is empty"));
        }
        if self.grid.iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
            return Err(invalid("radii must be finite and >= 0"));
        }
        if self.grid.windows(2).any(|w| w[0] > w[1]) {
            return Err(invalid("radius grid must be sorted ascending"));
        }
        Ok(())
    }
}

/// Pooled held-out losses and the risk of fold risks for one radius.
#[derive(Debug, Clone, PartialEq)]
pub struct KFoldOutput {
    /// Held-out losses, appended fold by fold.
    pub pooled: Vec<f64>,
    pub fold_risks: Vec<f64>,
    /// `(1/alpha) log((1/K) sum_k exp(alpha rho_k))`.
    pub risk: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvRecord {
    pub epsilon: f64,
    pub rho_raw: f64,
    /// Empirical risk of the pooled held-out losses.
    pub rho_pooled: f64,
    pub delta: f64,
    pub rho_corrected: f64,
    pub pooled: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvResult {
    pub records: Vec<CvRecord>,
    pub chosen: usize,
    pub epsilon_star: f64,
}

impl CvResult {
    /// CSV with columns `epsilon,rho_raw,rho_pooled,delta,rho_corrected,chosen`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "epsilon,rho_raw,rho_pooled,delta,rho_corrected,chosen")?;
        for (i, r) in self.records.iter().enumerate() {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                r.epsilon,
                r.rho_raw,
                r.rho_pooled,
                r.delta,
                r.rho_corrected,
                u8::from(i == self.chosen)
            )?;
        }
        Ok(())
    }
}

/// Row indices of each fold: fold `k` takes rows `k, k + K, k + 2K, ...` of
/// the (optionally shuffled) row order.
pub fn fold_indices(n: usize, folds: usize, shuffle_seed: Option<u64>) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    if let Some(seed) = shuffle_seed {
        order.shuffle(&mut rng(seed));
    }
    (0..folds).map(|k| order.iter().skip(k).step_by(folds).copied().collect()).collect()
}

/// Train on all folds but one, score the held-out fold, repeat for each fold.
pub fn kfold_cv<P: CvProblem>(
    data: ArrayView2<'_, f64>,
    folds: usize,
    eps: f64,
    problem: &P,
    alpha: RiskAversion,
    shuffle_seed: Option<u64>,
) -> Result<KFoldOutput> {
    let n = data.nrows();
    if folds < 2 {
        return Err(invalid("cross validation needs at least two folds"));
    }
    if n < folds {
        return Err(invalid(format!("{n} rows cannot fill {folds} folds")));
    }
    let parts = fold_indices(n, folds, shuffle_seed);
    let mut in_fold = vec![usize::MAX; n];
    for (k, idx) in parts.iter().enumerate() {
        for &i in idx {
            in_fold[i] = k;
        }
    }
    let mut pooled = Vec::with_capacity(n);
    let mut fold_risks = Vec::with_capacity(folds);
    for (k, held) in parts.iter().enumerate() {
        let train_idx: Vec<usize> = (0..n).filter(|&i| in_fold[i] != k).collect();
        let train: Array2<f64> = data.select(Axis(0), &train_idx);
        let decision = problem.solve(train.view(), eps)?;
        let losses: Vec<f64> = held.iter().map(|&i| problem.loss(&decision, data.row(i))).collect();
        fold_risks.push(risk_of(&losses, alpha.value()));
        pooled.extend(losses);
    }
    let risk = risk_of(&fold_risks, alpha.value());
    Ok(KFoldOutput { pooled, fold_risks, risk })
}

/// Cross-validate every radius in `grid` (in parallel, output in grid order).
pub fn cv_sweep<P: CvProblem>(
    data: ArrayView2<'_, f64>,
    folds: usize,
    grid: &[f64],
    problem: &P,
    alpha: RiskAversion,
    shuffle_seed: Option<u64>,
) -> Result<Vec<KFoldOutput>> {
    grid.par_iter()
        .map(|&eps| kfold_cv(data, folds, eps, problem, alpha, shuffle_seed))
        .collect()
}

/// Pick the radius minimizing the bias-corrected cross-validation risk.
/// Ties go to the larger radius.
pub fn select_radius(
    sweep: &[KFoldOutput],
    grid: &[f64],
    method: BiasMethod,
    estimator: &EstimatorConfig,
    alpha: RiskAversion,
    seed: u64,
) -> Result<CvResult> {
    if sweep.len() != grid.len() || grid.is_empty() {
        return Err(invalid("sweep and grid differ in length"));
    }
    let records: Vec<CvRecord> = sweep
        .par_iter()
        .zip(grid.par_iter())
        .enumerate()
        .map(|(i, (out, &eps))| {
            let delta = bias_for(method, &out.pooled, alpha, estimator, derive_seed(seed, i as u64))?;
            Ok(CvRecord {
                epsilon: eps,
                rho_raw: out.risk,
                rho_pooled: risk_of(&out.pooled, alpha.value()),
                delta,
                rho_corrected: out.risk + delta,
                pooled: out.pooled.clone(),
            })
        })
        .collect::<Result<_>>()?;
    let mut chosen = 0;
    for (i, r) in records.iter().enumerate() {
        if r.rho_corrected <= records[chosen].rho_corrected {
            chosen = i;
        }
    }
    Ok(CvResult { epsilon_star: records[chosen].epsilon, chosen, records })
}

/// Cross-validate each radius, correct for bias with `cfg.method`, and
/// select the radius with the smallest corrected risk.
pub fn tune_radius<P: CvProblem>(
    data: ArrayView2<'_, f64>,
    cfg: &CvConfig,
    problem: &P,
    alpha: RiskAversion,
) -> Result<CvResult> {
    cfg.validate()?;
    let shuffle = cfg.shuffle.then(|| derive_seed(cfg.seed, u64::MAX));
    let sweep = cv_sweep(data, cfg.folds, &cfg.grid, problem, alpha, shuffle)?;
    select_radius(&sweep, &cfg.grid, cfg.method, &cfg.estimator, alpha, cfg.seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    struct Constant(f64);

    impl CvProblem for Constant {
        type Decision = ();

        fn solve(&self, _: ArrayView2<'_, f64>, _: f64) -> Result<()> {
            Ok(())
        }

        fn loss(&self, _: &(), _: ArrayView1<'_, f64>) -> f64 {
            self.0
        }
    }

    /// Scalar decision equal to the training mean, scored by squared error.
    struct MeanFit;

    impl CvProblem for MeanFit {
        type Decision = f64;

        fn solve(&self, train: ArrayView2<'_, f64>, eps: f64) -> Result<f64> {
            Ok(train.column(0).mean().unwrap() + eps)
        }

        fn loss(&self, d: &f64, row: ArrayView1<'_, f64>) -> f64 {
            (row[0] - d).powi(2)
        }
    }

    fn ra(a: f64) -> RiskAversion {
        RiskAversion::new(a).unwrap()
    }

    #[test]
    fn folds_cover_every_row_once() {
        for shuffle in [None, Some(3)] {
            let parts = fold_indices(23, 5, shuffle);
            let mut all: Vec<usize> = parts.concat();
            all.sort();
            assert_eq!(all, (0..23).collect::<Vec<_>>());
        }
        assert_eq!(fold_indices(7, 3, None), vec![vec![0, 3, 6], vec![1, 4], vec![2, 5]]);
    }

    #[test]
    fn constant_decision() {
        let data = Array2::from_shape_fn((10, 1), |(i, _)| i as f64);
        let out = kfold_cv(data.view(), 4, 0.0, &Constant(2.5), ra(1.0), None).unwrap();
        assert_eq!(out.pooled, vec![2.5; 10]);
        assert!((out.risk - 2.5).abs() < 1e-12);
    }

    #[test]
    fn leave_one_out_folds() {
        let data = Array2::from_shape_fn((6, 1), |(i, _)| (i * i) as f64);
        let out = kfold_cv(data.view(), 6, 0.0, &MeanFit, ra(0.5), None).unwrap();
        assert_eq!(out.fold_risks.len(), 6);
        assert_eq!(out.fold_risks, out.pooled);
        assert!(kfold_cv(data.view(), 7, 0.0, &MeanFit, ra(0.5), None).is_err());
    }

    #[test]
    fn constant_data_is_fold_independent() {
        let data = Array2::from_elem((12, 1), 4.0);
        let a = kfold_cv(data.view(), 2, 0.3, &MeanFit, ra(1.0), None).unwrap().risk;
        let b = kfold_cv(data.view(), 6, 0.3, &MeanFit, ra(1.0), None).unwrap().risk;
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn ties_go_to_the_larger_radius() {
        let data = Array2::from_shape_fn((10, 1), |(i, _)| i as f64);
        let cfg = CvConfig {
            folds: 5,
            grid: vec![0.0, 0.5, 1.0],
            method: BiasMethod::None,
            estimator: EstimatorConfig::default(),
            shuffle: false,
            seed: 1,
        };
        let res = tune_radius(data.view(), &cfg, &Constant(1.0), ra(1.0)).unwrap();
        assert_eq!(res.epsilon_star, 1.0);
        let single = CvConfig { grid: vec![0.7], ..cfg.clone() };
        assert_eq!(tune_radius(data.view(), &single, &MeanFit, ra(1.0)).unwrap().epsilon_star, 0.7);
        let mut buf = Vec::new();
        res.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.lines().last().unwrap().ends_with(",1"));
    }

    #[test]
    fn radius_moves_the_decision() {
        let data = Array2::from_shape_fn((20, 1), |(i, _)| (i % 5) as f64);
        let cfg = CvConfig {
            folds: 4,
            grid: vec![0.0, 1.0, 2.0],
            method: BiasMethod::None,
            estimator: EstimatorConfig::default(),
            shuffle: true,
            seed: 2,
        };
        let res = tune_radius(data.view(), &cfg, &MeanFit, ra(0.5)).unwrap();
        assert_eq!(res.epsilon_star, 0.0);
        assert!(cfg.clone().validate().is_ok());
        assert!(CvConfig { grid: vec![1.0, 0.0], ..cfg }.validate().is_err());
    }
}
