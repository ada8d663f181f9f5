//! Insurance pricing sweeps: radius calibration methods compared out of
//! sample across training sizes, correlations and marginals.

use entrisk::cv::{cv_sweep, select_radius, CvResult};
use entrisk::dro::Norm;
use entrisk::estimators::{BiasMethod, EstimatorConfig};
use entrisk::insurance::{
    generate_market, out_of_sample_risk, premium_per_coverage, solve_pricing, InsuranceInstance, Policy,
    PricingProblem,
};
use entrisk::rng::derive_seed;
use entrisk::stats::{mean, median};
use entrisk::{GammaSpec, RiskAversion};
use rayon::prelude::*;
use serde_json::{json, Value};

use super::{summary, Experiment, ExperimentConfig};
use crate::error::{CliError, CliResult};
use crate::io::{num, OutDir, Table};

pub const COMMON_MARGINAL: (f64, f64) = (10.0, 0.45);
pub const HETERO_MARGINALS: [(f64, f64); 5] = [(8.0, 0.41), (8.5, 0.42), (9.0, 0.43), (9.5, 0.44), (10.0, 0.45)];
pub const BASE_CORRELATION: f64 = 0.5;
pub const CORRELATIONS: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];
const N_SWEEP_SIZES: [usize; 3] = [500, 1000, 5000];
const BASE_SIZE: usize = 1000;

/// Evenly spaced grid including both ends.
pub fn linspace(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => vec![],
        1 => vec![lo],
        _ => (0..points).map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64).collect(),
    }
}

/// Cross-validation and correction settings shared by every instance.
#[derive(Debug, Clone, PartialEq)]
pub struct PricingSettings {
    pub folds: usize,
    pub grid: Vec<f64>,
    pub methods: Vec<BiasMethod>,
    pub estimator: EstimatorConfig,
    pub norm: Norm,
    pub shuffle: bool,
}

impl PricingSettings {
    /// K = 5, twenty radii on [0, 6], all correction methods, L2 norm.
    pub fn standard(estimator: EstimatorConfig) -> Self {
        Self {
            folds: 5,
            grid: linspace(0.0, 6.0, 20),
            methods: BiasMethod::ALL.to_vec(),
            estimator,
            norm: Norm::L2,
            shuffle: false,
        }
    }
}

/// Full-data solutions at every radius and the radius chosen by each method.
#[derive(Debug, Clone)]
pub struct InstanceRun {
    pub seed: u64,
    pub in_sample: Vec<f64>,
    pub out_of_sample: Vec<f64>,
    pub policies: Vec<Policy>,
    pub saa: (Policy, f64, f64),
    pub tuned: Vec<(BiasMethod, CvResult)>,
}

/// One calibration method's decision on one instance.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub method: String,
    pub epsilon: f64,
    pub policy: Policy,
    /// The method's own estimate of the optimal risk.
    pub in_sample: f64,
    pub out_of_sample: f64,
}

/// Sample training and test data, cross-validate every radius once, select
/// a radius per correction method and solve on the full training set.
pub fn run_instance(
    inst: &InsuranceInstance,
    n: usize,
    test_size: usize,
    settings: &PricingSettings,
    seed: u64,
) -> CliResult<InstanceRun> {
    let train = generate_market(inst, n, derive_seed(seed, 0))?;
    let test = generate_market(inst, test_size, derive_seed(seed, 1))?;
    let alpha = RiskAversion::new(inst.alpha0)?;
    let problem = PricingProblem { instance: inst.clone(), norm: settings.norm };
    let shuffle = settings.shuffle.then(|| derive_seed(seed, 3));
    let sweep = cv_sweep(train.joint.view(), settings.folds, &settings.grid, &problem, alpha, shuffle)?;
    let tuned = settings
        .methods
        .iter()
        .map(|&m| Ok((m, select_radius(&sweep, &settings.grid, m, &settings.estimator, alpha, derive_seed(seed, 2))?)))
        .collect::<entrisk::Result<Vec<_>>>()?;
    let evaluate = |eps: f64| -> entrisk::Result<(Policy, f64, f64)> {
        let sol = solve_pricing(&train, inst, eps, settings.norm)?;
        let oos = out_of_sample_risk(&sol.policy, test.joint.view(), inst.alpha0)?;
        Ok((sol.policy, sol.value, oos))
    };
    let mut policies = Vec::with_capacity(settings.grid.len());
    let mut in_sample = Vec::with_capacity(settings.grid.len());
    let mut out_of_sample = Vec::with_capacity(settings.grid.len());
    for &eps in &settings.grid {
        let (p, v, o) = evaluate(eps)?;
        policies.push(p);
        in_sample.push(v);
        out_of_sample.push(o);
    }
    let saa = evaluate(0.0)?;
    Ok(InstanceRun { seed, in_sample, out_of_sample, policies, saa, tuned })
}

impl InstanceRun {
    /// SAA, each tuned method, and the test-set oracle (ties to the larger radius).
    pub fn outcomes(&self, grid: &[f64]) -> Vec<Outcome> {
        let mut v = vec![Outcome {
            method: "SAA".into(),
            epsilon: 0.0,
            policy: self.saa.0.clone(),
            in_sample: self.saa.1,
            out_of_sample: self.saa.2,
        }];
        for (m, res) in &self.tuned {
            v.push(Outcome {
                method: m.name().into(),
                epsilon: res.epsilon_star,
                policy: self.policies[res.chosen].clone(),
                in_sample: res.records[res.chosen].rho_corrected,
                out_of_sample: self.out_of_sample[res.chosen],
            });
        }
        let mut best = 0;
        for (i, &o) in self.out_of_sample.iter().enumerate() {
            if o <= self.out_of_sample[best] {
                best = i;
            }
        }
        v.push(Outcome {
            method: "ORACLE".into(),
            epsilon: grid[best],
            policy: self.policies[best].clone(),
            in_sample: self.out_of_sample[best],
            out_of_sample: self.out_of_sample[best],
        });
        v
    }
}

/// One sweep point: parameter value, instance and training size.
pub struct SweepPoint {
    pub param: f64,
    pub instance: InsuranceInstance,
    pub n: usize,
}

/// Run `reps` instances at each point (in parallel, results in order).
pub fn run_points(
    points: &[SweepPoint],
    reps: usize,
    test_size: usize,
    settings: &PricingSettings,
    seed: u64,
) -> CliResult<Vec<Vec<InstanceRun>>> {
    points
        .iter()
        .enumerate()
        .map(|(pi, p)| {
            let cell = derive_seed(seed, pi as u64);
            (0..reps)
                .into_par_iter()
                .map(|i| run_instance(&p.instance, p.n, test_size, settings, derive_seed(cell, i as u64)))
                .collect()
        })
        .collect()
}

fn marginals(specs: &[(f64, f64)]) -> entrisk::Result<Vec<GammaSpec>> {
    specs.iter().map(|&(k, l)| GammaSpec::new(k, l)).collect()
}

fn standard_instance(r: f64) -> entrisk::Result<InsuranceInstance> {
    InsuranceInstance::standard(GammaSpec::new(COMMON_MARGINAL.0, COMMON_MARGINAL.1)?, r)
}

fn sweep_points(cfg: &ExperimentConfig) -> CliResult<(&'static str, Vec<SweepPoint>)> {
    let by_size = |inst: InsuranceInstance, sizes: Vec<usize>| {
        sizes.into_iter().map(|n| SweepPoint { param: n as f64, instance: inst.clone(), n }).collect()
    };
    Ok(match cfg.experiment {
        Experiment::InsuranceNSweep => ("n", by_size(standard_instance(BASE_CORRELATION)?, cfg.sizes_or(&N_SWEEP_SIZES))),
        Experiment::EpsilonCurves => ("n", by_size(standard_instance(BASE_CORRELATION)?, cfg.sizes_or(&[BASE_SIZE]))),
        Experiment::InsuranceHetero => {
            let base = standard_instance(BASE_CORRELATION)?;
            let inst = InsuranceInstance::new(base.alpha0, base.alphas, marginals(&HETERO_MARGINALS)?, BASE_CORRELATION)?;
            ("n", by_size(inst, cfg.sizes_or(&N_SWEEP_SIZES)))
        }
        Experiment::InsuranceRSweep => {
            let n = match cfg.sizes.as_deref() {
                None => BASE_SIZE,
                Some([n]) => *n,
                Some(_) => return Err(CliError::usage("the correlation sweep takes a single size")),
            };
            let points = CORRELATIONS
                .iter()
                .map(|&r| Ok(SweepPoint { param: r, instance: standard_instance(r)?, n }))
                .collect::<entrisk::Result<_>>()?;
            ("r", points)
        }
        _ => unreachable!("not an insurance experiment"),
    })
}

pub(super) fn run(cfg: &ExperimentConfig, out: &mut OutDir) -> CliResult<Value> {
    let (param, points) = sweep_points(cfg)?;
    let settings = PricingSettings::standard(cfg.estimator());
    let runs = run_points(&points, cfg.repetitions, cfg.test_size, &settings, cfg.seed)?;
    let name = cfg.experiment.name();
    let tables = write_tables(param, &points, &runs, &settings.grid);
    for (suffix, table) in ["policies", "summary", "households", "curves", "curves_raw"].iter().zip(tables) {
        out.write(&format!("{name}_{suffix}.csv"), &table.into_bytes())?;
    }
    let pts: Vec<Value> = points
        .iter()
        .map(|p| {
            json!({
                param: p.param,
                "n": p.n,
                "alpha0": p.instance.alpha0,
                "alphas": p.instance.alphas,
                "marginals": p.instance.marginals.iter().map(|g| [g.shape, g.scale]).collect::<Vec<_>>(),
                "correlation": p.instance.correlation,
            })
        })
        .collect();
    Ok(json!({
        "points": pts,
        "folds": settings.folds,
        "grid": settings.grid,
        "norm": settings.norm.name(),
        "methods": settings.methods.iter().map(|m| m.name()).collect::<Vec<_>>(),
    }))
}

fn write_tables(param: &str, points: &[SweepPoint], runs: &[Vec<InstanceRun>], grid: &[f64]) -> [Table; 5] {
    let m = points.first().map_or(0, |p| p.instance.households());
    let mut head: Vec<String> = [param, "instance", "seed", "epsilon", "method"].iter().map(|s| s.to_string()).collect();
    head.extend((1..=m).map(|h| format!("z_{h}")));
    head.extend((1..=m).map(|h| format!("pi_{h}")));
    head.extend(["in_sample".to_string(), "out_of_sample".to_string()]);
    let mut policies = Table::new(&head);
    let mut summary_t = Table::new(&[
        param,
        "method",
        "oos_mean",
        "oos_q25",
        "oos_q50",
        "oos_q75",
        "eps_mean",
        "eps_q25",
        "eps_q50",
        "eps_q75",
        "estimate_mean",
        "estimate_q25",
        "estimate_q50",
        "estimate_q75",
        "premium_per_coverage_mean",
        "premium_per_coverage_excluded",
    ]);
    let mut households = Table::new(&[
        param,
        "method",
        "household",
        "coverage_mean",
        "premium_per_coverage_mean",
        "frac_premium_above_twice",
        "excluded",
    ]);
    let mut curves = Table::new(&[param, "epsilon", "series", "mean", "q25", "q50", "q75"]);
    let mut curves_raw = Table::new(&[param, "instance", "epsilon", "series", "value"]);

    for (p, point_runs) in points.iter().zip(runs) {
        let pv = num(p.param);
        let outcomes: Vec<Vec<Outcome>> = point_runs.iter().map(|r| r.outcomes(grid)).collect();
        for (i, (run, outs)) in point_runs.iter().zip(&outcomes).enumerate() {
            for o in outs {
                let mut row = vec![pv.clone(), i.to_string(), run.seed.to_string(), num(o.epsilon), o.method.clone()];
                row.extend(o.policy.coverage.iter().map(|&v| num(v)));
                row.extend(o.policy.premium.iter().map(|&v| num(v)));
                row.extend([num(o.in_sample), num(o.out_of_sample)]);
                policies.row(&row);
            }
        }
        let n_methods = outcomes.first().map_or(0, Vec::len);
        for k in 0..n_methods {
            let col: Vec<&Outcome> = outcomes.iter().map(|o| &o[k]).collect();
            let oos: Vec<f64> = col.iter().map(|o| o.out_of_sample).collect();
            let eps: Vec<f64> = col.iter().map(|o| o.epsilon).collect();
            let est: Vec<f64> = col.iter().map(|o| o.in_sample).collect();
            let ratios: Vec<Vec<Option<f64>>> = col.iter().map(|o| premium_per_coverage(&o.policy, &p.instance)).collect();
            let per_instance: Vec<f64> = ratios
                .iter()
                .filter_map(|r| {
                    let kept: Vec<f64> = r.iter().flatten().copied().collect();
                    (!kept.is_empty()).then(|| mean(&kept))
                })
                .collect();
            let excluded = ratios.iter().flatten().filter(|r| r.is_none()).count();
            let mut row = vec![pv.clone(), col[0].method.clone()];
            for xs in [&oos, &eps, &est] {
                row.extend(summary(xs).iter().map(|&v| num(v)));
            }
            row.push(if per_instance.is_empty() { String::new() } else { num(mean(&per_instance)) });
            row.push(excluded.to_string());
            summary_t.row(&row);

            for h in 0..p.instance.households() {
                let cov: Vec<f64> = col.iter().map(|o| o.policy.coverage[h]).collect();
                let kept: Vec<f64> = ratios.iter().filter_map(|r| r[h]).collect();
                let above = kept.iter().filter(|&&r| r >= 2.0).count();
                households.row(&[
                    pv.clone(),
                    col[0].method.clone(),
                    (h + 1).to_string(),
                    num(mean(&cov)),
                    if kept.is_empty() { String::new() } else { num(mean(&kept)) },
                    if kept.is_empty() { String::new() } else { num(above as f64 / kept.len() as f64) },
                    (cov.len() - kept.len()).to_string(),
                ]);
            }
        }

        let mut series: Vec<(String, Vec<Vec<f64>>)> = vec![
            ("in_sample".into(), point_runs.iter().map(|r| r.in_sample.clone()).collect()),
            ("out_of_sample".into(), point_runs.iter().map(|r| r.out_of_sample.clone()).collect()),
        ];
        if let Some(first) = point_runs.first() {
            series.push((
                "cv_raw".into(),
                point_runs.iter().map(|r| r.tuned[0].1.records.iter().map(|c| c.rho_raw).collect()).collect(),
            ));
            for (j, (m, _)) in first.tuned.iter().enumerate() {
                series.push((
                    m.name().into(),
                    point_runs.iter().map(|r| r.tuned[j].1.records.iter().map(|c| c.rho_corrected).collect()).collect(),
                ));
            }
        }
        for (e, &eps) in grid.iter().enumerate() {
            for (label, values) in &series {
                let col: Vec<f64> = values.iter().map(|v| v[e]).collect();
                let s = summary(&col);
                curves.row(&[pv.clone(), num(eps), label.clone(), num(s[0]), num(s[1]), num(s[2]), num(s[3])]);
                for (i, v) in col.iter().enumerate() {
                    curves_raw.row(&[pv.clone(), i.to_string(), num(eps), label.clone(), num(*v)]);
                }
            }
        }
    }
    [policies, summary_t, households, curves, curves_raw]
}

/// Mean out-of-sample risk and median chosen radius per method.
pub fn method_stats(runs: &[InstanceRun], grid: &[f64]) -> Vec<(String, f64, f64)> {
    let outcomes: Vec<Vec<Outcome>> = runs.iter().map(|r| r.outcomes(grid)).collect();
    let k = outcomes.first().map_or(0, Vec::len);
    (0..k)
        .map(|j| {
            let oos: Vec<f64> = outcomes.iter().map(|o| o[j].out_of_sample).collect();
            let eps: Vec<f64> = outcomes.iter().map(|o| o[j].epsilon).collect();
            (outcomes[0][j].method.clone(), mean(&oos), median(&eps))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linspace_ends() {
        let g = linspace(0.0, 6.0, 20);
        assert_eq!(g.len(), 20);
        assert_eq!(g[0], 0.0);
        assert_eq!(g[19], 6.0);
        assert!((g[1] - 6.0 / 19.0).abs() < 1e-15);
        assert_eq!(linspace(1.0, 2.0, 1), vec![1.0]);
    }

    #[test]
    fn small_instance_outcomes() {
        let inst = standard_instance(0.5).unwrap();
        let mut est = EstimatorConfig { reps: 20, ..Default::default() };
        est.risk_match.max_iter = 20;
        let mut settings = PricingSettings::standard(est);
        settings.grid = linspace(0.0, 2.0, 3);
        let run = run_instance(&inst, 100, 2000, &settings, 5).unwrap();
        let outs = run.outcomes(&settings.grid);
        let names: Vec<&str> = outs.iter().map(|o| o.method.as_str()).collect();
        assert_eq!(names, ["SAA", "NONE", "BS_MLE", "BS_MATCH", "BS_EVT", "ORACLE"]);
        let best = run.out_of_sample.iter().copied().fold(f64::INFINITY, f64::min);
        assert_eq!(outs[5].out_of_sample, best);
        for o in &outs {
            assert!(o.policy.coverage.iter().all(|&z| (0.0..=1.0).contains(&z)));
        }
        assert_eq!(run.saa.1, run.in_sample[0]);
    }
}
