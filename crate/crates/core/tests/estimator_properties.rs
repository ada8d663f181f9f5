use entrisk::distributions::gmm_sample;
use entrisk::estimators::{bias_correct, estimate, oic, saa, EstimatorConfig, EstimatorKind};
use entrisk::{Gmm, RiskAversion};
use proptest::prelude::*;

fn ra(a: f64) -> RiskAversion {
    RiskAversion::new(a).unwrap()
}

fn example2() -> Gmm {
    Gmm::new(vec![0.7, 0.3], vec![0.5, 1.0], vec![2.0, 1.0]).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn oic_never_below_saa(s in prop::collection::vec(-4.0..4.0f64, 2..60), a in 0.0..3.0f64) {
        prop_assert!(oic(&s, ra(a)).unwrap() >= saa(&s, ra(a)).unwrap());
    }

    #[test]
    fn plain_estimators_are_translation_equivariant(
        s in prop::collection::vec(-4.0..4.0f64, 2..60),
        a in 0.0..2.0f64,
        m in -20.0..20.0f64,
    ) {
        let cfg = EstimatorConfig { reps: 30, ..Default::default() };
        let shifted: Vec<f64> = s.iter().map(|x| x + m).collect();
        for kind in [EstimatorKind::Saa, EstimatorKind::Loocv, EstimatorKind::Mom, EstimatorKind::Bs] {
            let lhs = estimate(kind, &shifted, ra(a), &cfg).unwrap();
            let rhs = estimate(kind, &s, ra(a), &cfg).unwrap() + m;
            prop_assert!((lhs - rhs).abs() <= 1e-9 * rhs.abs().max(1.0), "{kind}: {lhs} vs {rhs}");
        }
    }
}

#[test]
fn bootstrap_kinds_are_translation_equivariant() {
    let mut cfg = EstimatorConfig { reps: 100, seed: 3, ..Default::default() };
    cfg.risk_match.max_iter = 100;
    for (i, m) in [-7.5, 0.25, 12.0].into_iter().enumerate() {
        let s = gmm_sample(&example2(), 400, 70 + i as u64).unwrap();
        let shifted: Vec<f64> = s.losses().iter().map(|x| x + m).collect();
        for kind in [EstimatorKind::BsMle, EstimatorKind::BsMatch, EstimatorKind::BsEvt] {
            let lhs = estimate(kind, &shifted, ra(1.0), &cfg).unwrap();
            let rhs = estimate(kind, s.losses(), ra(1.0), &cfg).unwrap() + m;
            assert!((lhs - rhs).abs() <= 1e-6, "{kind} shift {m}: {lhs} vs {rhs}");
        }
    }
}

#[test]
fn true_source_bias_is_positive() {
    let q = example2();
    let positive = (0..50u64)
        .filter(|&seed| {
            let s = gmm_sample(&q, 1000, 1000 + seed).unwrap();
            bias_correct(s.losses(), ra(1.0), &q, 500, seed).unwrap().delta_hat > 0.0
        })
        .count();
    assert!(positive >= 48, "{positive} of 50 seeds");
}
