//! One-shot subcommands.

use entrisk::cv::{cv_sweep, select_radius, tune_radius, CvConfig};
use entrisk::distributions::gmm_fit_em;
use entrisk::dro::{
    dro_solve_linear, dro_solve_newsvendor, dro_solve_regression, dro_value_linear, dro_value_newsvendor,
    dro_value_regression, AmbiguityBall, Bounds, NewsvendorSpec, RegressionData, SolverOptions,
};
use entrisk::estimators::{estimate, BiasMethod, EstimatorConfig, EstimatorKind};
use entrisk::fitting::{fit_gmm_evt, fit_gmm_risk_match, RiskMatchConfig};
use entrisk::insurance::{generate_market, out_of_sample_risk, solve_pricing, MarketData, PricingProblem};
use entrisk::risk::gmm_risk;
use entrisk::rng::derive_seed;
use entrisk::{Gmm, RiskAversion};
use ndarray::{s, Array2};

use crate::args::{DroArgs, DroProblem, EstimateArgs, FitGmmArgs, FitMethod, InsuranceArgs, InstanceArgs, TuneRadiusArgs, TuningArgs};
use crate::config::InstanceConfig;
use crate::error::{CliError, CliResult};
use crate::experiments::insurance::linspace;
use crate::io::{emit, num, read_loss_column, read_matrix, write_file, Table};

pub fn estimate_cmd(a: &EstimateArgs) -> CliResult<()> {
    let losses = read_loss_column(&a.file)?;
    let alpha = RiskAversion::new(a.alpha)?;
    let mut cfg = EstimatorConfig { reps: a.reps, seed: a.seed, ..Default::default() };
    cfg.em.components = a.components;
    cfg.risk_match.em.components = a.components;
    let kinds = a.estimators.clone().unwrap_or_else(|| EstimatorKind::ALL.to_vec());
    let mut t = Table::new(&["estimator", "value"]);
    for k in kinds {
        t.row(&[k.name().to_string(), num(estimate(k, &losses, alpha, &cfg)?)]);
    }
    emit(a.out.as_deref(), &t.into_bytes())
}

fn mixture_table(q: &Gmm, alpha: RiskAversion) -> Table {
    let mut t = Table::new(&["component", "weight", "mean", "std"]);
    for (k, (w, m, s)) in q.components().enumerate() {
        t.row(&[(k + 1).to_string(), num(w), num(m), num(s)]);
    }
    t.row(&["risk".to_string(), String::new(), num(gmm_risk(q, alpha)), String::new()]);
    t
}

pub fn fit_gmm_cmd(a: &FitGmmArgs) -> CliResult<()> {
    let losses = read_loss_column(&a.file)?;
    let alpha = RiskAversion::new(a.alpha)?;
    let q = match a.method {
        FitMethod::Em => gmm_fit_em(&losses, a.components, a.max_iter.unwrap_or(300), 1e-8, a.seed)?,
        FitMethod::Evt => fit_gmm_evt(&losses)?.gmm,
        FitMethod::Match => {
            let mut cfg = RiskMatchConfig { record_trace: a.trace.is_some(), ..Default::default() };
            cfg.em.components = a.components;
            if let Some(t) = a.max_iter {
                cfg.max_iter = t;
            }
            let fit = fit_gmm_risk_match(&losses, alpha, &cfg, a.seed)?;
            if let Some(path) = &a.trace {
                let mut buf = Vec::new();
                fit.write_trace(&mut buf).expect("writing to memory");
                write_file(path, &buf)?;
            }
            fit.gmm
        }
    };
    if a.trace.is_some() && a.method != FitMethod::Match {
        return Err(CliError::usage("--trace is only available for the match method"));
    }
    emit(a.out.as_deref(), &mixture_table(&q, alpha).into_bytes())
}

fn need(v: Option<f64>, flag: &str) -> CliResult<f64> {
    v.ok_or_else(|| CliError::usage(format!("newsvendor needs --{flag}")))
}

pub fn dro_cmd(a: &DroArgs) -> CliResult<()> {
    let (_, m) = read_matrix(&a.file)?;
    let alpha = RiskAversion::new(a.alpha)?;
    let (z, value) = match a.problem {
        DroProblem::Linear => {
            let ball = AmbiguityBall::new(a.eps, a.norm)?;
            match &a.z {
                Some(z) => (z.clone(), dro_value_linear(z, m.view(), alpha, ball)?),
                None => {
                    let bounds = Bounds::uniform(m.ncols(), a.lower, a.upper)?;
                    let r = dro_solve_linear(m.view(), alpha, ball, &bounds, SolverOptions::default())?;
                    (r.z, r.value)
                }
            }
        }
        DroProblem::Newsvendor => {
            let spec = NewsvendorSpec::new(need(a.order, "order")?, need(a.backorder, "backorder")?, need(a.holding, "holding")?)?;
            let demands: Vec<f64> = m.column(0).to_vec();
            match &a.z {
                Some(z) if z.len() == 1 => (z.clone(), dro_value_newsvendor(&spec, &demands, z[0], alpha, a.eps)),
                Some(_) => return Err(CliError::usage("newsvendor takes a single order quantity")),
                None => {
                    let (z, v) = dro_solve_newsvendor(&spec, &demands, alpha, a.eps)?;
                    (vec![z], v)
                }
            }
        }
        DroProblem::Regression => {
            if m.ncols() < 2 {
                return Err(CliError::usage("regression needs feature columns and a label column"));
            }
            let d = m.ncols() - 1;
            let features: Array2<f64> = m.slice(s![.., ..d]).to_owned();
            let data = RegressionData::new(features, m.column(d).to_vec())?;
            match &a.z {
                Some(z) => (z.clone(), dro_value_regression(&data, z, alpha, a.eps, a.norm)?),
                None => dro_solve_regression(&data, alpha, a.eps, a.norm, a.max_iter)?,
            }
        }
    };
    let mut head = vec!["value".to_string()];
    head.extend((1..=z.len()).map(|i| format!("z_{i}")));
    let mut t = Table::new(&head);
    let mut row = vec![num(value)];
    row.extend(z.iter().map(|&v| num(v)));
    t.row(&row);
    emit(a.out.as_deref(), &t.into_bytes())
}

/// Instance, seed and training market of an insurance command.
fn load_market(a: &InstanceArgs) -> CliResult<(InstanceConfig, u64, MarketData)> {
    let cfg = InstanceConfig::load(&a.config)?;
    let inst = cfg.instance()?;
    let seed = a.seed.unwrap_or(cfg.seed);
    let market = match &a.data {
        Some(p) => {
            let (_, m) = read_matrix(p)?;
            if m.ncols() != inst.households() {
                return Err(CliError::usage(format!("{}: expected {} columns", p.display(), inst.households())));
            }
            MarketData::new(m)?
        }
        None => generate_market(&inst, cfg.samples, derive_seed(seed, 0))?,
    };
    Ok((cfg, seed, market))
}

fn cv_config(t: &TuningArgs, method: BiasMethod, seed: u64) -> CvConfig {
    let mut est = EstimatorConfig { reps: t.reps, seed, ..Default::default() };
    est.risk_match.max_iter = t.match_iters;
    CvConfig {
        folds: t.folds,
        grid: linspace(t.eps_min, t.eps_max, t.eps_points),
        method,
        estimator: est,
        shuffle: t.shuffle,
        seed: derive_seed(seed, 2),
    }
}

pub fn tune_radius_cmd(a: &TuneRadiusArgs) -> CliResult<()> {
    let (cfg, seed, market) = load_market(&a.instance)?;
    let inst = cfg.instance()?;
    let problem = PricingProblem { instance: inst.clone(), norm: a.instance.norm };
    let cv = cv_config(&a.tuning, a.method, seed);
    let res = tune_radius(market.joint.view(), &cv, &problem, RiskAversion::new(inst.alpha0)?)?;
    let mut buf = Vec::new();
    res.write_csv(&mut buf).expect("writing to memory");
    emit(a.out.as_deref(), &buf)?;
    if a.out.is_some() {
        println!("epsilon_star,{}", num(res.epsilon_star));
    }
    Ok(())
}

pub fn insurance_cmd(a: &InsuranceArgs) -> CliResult<()> {
    let (cfg, seed, market) = load_market(&a.instance)?;
    let inst = cfg.instance()?;
    let norm = a.instance.norm;
    if a.test_size == 0 {
        return Err(CliError::usage("--test-size must be positive"));
    }
    let test = generate_market(&inst, a.test_size, derive_seed(seed, 1))?;
    let m = inst.households();
    let mut head: Vec<String> = ["seed", "epsilon", "method"].iter().map(|s| s.to_string()).collect();
    head.extend((1..=m).map(|h| format!("z_{h}")));
    head.extend((1..=m).map(|h| format!("pi_{h}")));
    head.extend(["in_sample".to_string(), "out_of_sample".to_string()]);
    let mut t = Table::new(&head);
    let mut push = |eps: f64, method: &str, estimate: Option<f64>| -> CliResult<()> {
        let sol = solve_pricing(&market, &inst, eps, norm)?;
        let oos = out_of_sample_risk(&sol.policy, test.joint.view(), inst.alpha0)?;
        let mut row = vec![seed.to_string(), num(eps), method.to_string()];
        row.extend(sol.policy.coverage.iter().map(|&v| num(v)));
        row.extend(sol.policy.premium.iter().map(|&v| num(v)));
        row.extend([num(estimate.unwrap_or(sol.value)), num(oos)]);
        t.row(&row);
        Ok(())
    };
    match a.eps {
        Some(eps) => push(eps, "FIXED", None)?,
        None => {
            let problem = PricingProblem { instance: inst.clone(), norm };
            let alpha = RiskAversion::new(inst.alpha0)?;
            let base = cv_config(&a.tuning, BiasMethod::None, seed);
            base.validate()?;
            let shuffle = base.shuffle.then(|| derive_seed(base.seed, u64::MAX));
            let sweep = cv_sweep(market.joint.view(), base.folds, &base.grid, &problem, alpha, shuffle)?;
            for &method in &a.methods {
                let res = select_radius(&sweep, &base.grid, method, &base.estimator, alpha, base.seed)?;
                push(res.epsilon_star, method.name(), Some(res.records[res.chosen].rho_corrected))?;
            }
        }
    }
    emit(a.out.as_deref(), &t.into_bytes())
}
