use entrisk::dro::Norm;
use entrisk::insurance::{generate_market, insurer_objective, insurer_objective_grad, premium, solve_pricing, InsuranceInstance};
use entrisk::risk::empirical_risk;
use entrisk::RiskAversion;
use entrisk::rng::rng;
use entrisk::GammaSpec;
use proptest::prelude::*;

fn risk_of(x: &[f64], a: f64) -> f64 {
    empirical_risk(x, RiskAversion::new(a).unwrap()).unwrap()
}
use rand::Rng as _;

fn instance(r: f64) -> InsuranceInstance {
    InsuranceInstance::standard(GammaSpec::new(10.0, 0.45).unwrap(), r).unwrap()
}

#[test]
fn household_is_indifferent_at_the_premium() {
    let inst = instance(0.5);
    let data = generate_market(&inst, 400, 3).unwrap();
    let mut g = rng(4);
    for _ in 0..50 {
        let h = g.random_range(0..inst.households());
        let zh: f64 = g.random_range(0.0..=1.0);
        let col = data.column(h);
        let a = inst.alphas[h];
        let p = premium(zh, &col, a).unwrap();
        let insured: Vec<f64> = col.iter().map(|x| p + (1.0 - zh) * x).collect();
        assert!((risk_of(&insured, a) - risk_of(&col, a)).abs() < 1e-9);
        assert!(p >= 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn objective_shape(seed in 0u64..1000, e1 in 0.0..2.0f64, de in 0.0..2.0f64, ni in 0usize..3) {
        let inst = instance(0.25);
        let data = generate_market(&inst, 60, seed).unwrap();
        let norm = [Norm::L1, Norm::L2, Norm::LInf][ni];
        let mut g = rng(seed ^ 0x55);
        let z1: Vec<f64> = (0..5).map(|_| g.random_range(0.0..=1.0)).collect();
        let z2: Vec<f64> = (0..5).map(|_| g.random_range(0.0..=1.0)).collect();
        let mid: Vec<f64> = z1.iter().zip(&z2).map(|(a, b)| 0.5 * (a + b)).collect();
        let f = |z: &[f64], e: f64| insurer_objective(z, &data, &inst, e, norm).unwrap();
        prop_assert!(f(&z1, e1) <= f(&z1, e1 + de) + 1e-12);
        prop_assert!(f(&mid, e1) <= 0.5 * (f(&z1, e1) + f(&z2, e1)) + 1e-9);
    }
}

#[test]
fn gradient_matches_finite_differences() {
    let inst = instance(0.5);
    let data = generate_market(&inst, 200, 11).unwrap();
    let mut g = rng(12);
    for _ in 0..20 {
        let z: Vec<f64> = (0..5).map(|_| g.random_range(0.05..0.95)).collect();
        let eps = g.random_range(0.0..1.0);
        let (_, grad) = insurer_objective_grad(&z, &data, &inst, eps, Norm::L2).unwrap();
        for j in 0..5 {
            let h = 1e-6;
            let mut up = z.clone();
            let mut down = z.clone();
            up[j] += h;
            down[j] -= h;
            let fd = (insurer_objective(&up, &data, &inst, eps, Norm::L2).unwrap()
                - insurer_objective(&down, &data, &inst, eps, Norm::L2).unwrap())
                / (2.0 * h);
            assert!((fd - grad[j]).abs() <= 1e-6 * grad[j].abs().max(1.0), "{fd} vs {}", grad[j]);
        }
    }
}

#[test]
fn solved_policy_has_nonnegative_premiums_and_beats_corners() {
    let inst = instance(0.5);
    let data = generate_market(&inst, 300, 21).unwrap();
    for eps in [0.0, 0.5, 2.0] {
        let sol = solve_pricing(&data, &inst, eps, Norm::L2).unwrap();
        assert!(sol.policy.premium.iter().all(|p| *p >= 0.0));
        assert!(sol.policy.coverage.iter().all(|z| (0.0..=1.0).contains(z)));
        for corner in [vec![0.0; 5], vec![1.0; 5], vec![0.5; 5]] {
            assert!(sol.value <= insurer_objective(&corner, &data, &inst, eps, Norm::L2).unwrap() + 1e-7);
        }
    }
}
