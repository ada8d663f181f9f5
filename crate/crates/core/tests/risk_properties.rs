use entrisk::distributions::gmm_sample;
use entrisk::risk::{empirical_risk, gmm_risk, nested_risk};
use entrisk::stats::{mean, variance};
use entrisk::{Gmm, RiskAversion};
use proptest::prelude::*;

fn ra(a: f64) -> RiskAversion {
    RiskAversion::new(a).unwrap()
}

fn losses() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0..5.0f64, 1..40)
}

proptest! {
    #[test]
    fn cash_invariance(s in losses(), a in 0.0..3.0f64, m in -50.0..50.0f64) {
        let shifted: Vec<f64> = s.iter().map(|x| x + m).collect();
        let lhs = empirical_risk(&shifted, ra(a)).unwrap();
        let rhs = empirical_risk(&s, ra(a)).unwrap() + m;
        prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1.0));
    }

    #[test]
    fn monotone_in_losses(s in losses(), bumps in prop::collection::vec(0.0..2.0f64, 40), a in 0.0..3.0f64) {
        let bigger: Vec<f64> = s.iter().zip(&bumps).map(|(x, b)| x + b).collect();
        prop_assert!(empirical_risk(&s, ra(a)).unwrap() <= empirical_risk(&bigger, ra(a)).unwrap() + 1e-12);
    }

    #[test]
    fn monotone_in_alpha(s in losses(), a in 0.0..3.0f64, da in 0.0..2.0f64) {
        prop_assert!(empirical_risk(&s, ra(a)).unwrap() <= empirical_risk(&s, ra(a + da)).unwrap() + 1e-12);
    }

    #[test]
    fn jensen_bound(s in prop::collection::vec(-5.0..5.0f64, 2..40), a in 0.05..3.0f64) {
        let r = empirical_risk(&s, ra(a)).unwrap();
        let m = mean(&s);
        if variance(&s) > 1e-6 {
            prop_assert!(r > m);
        } else {
            prop_assert!(r >= m - 1e-12);
        }
    }

    #[test]
    fn tower_property(groups in 1usize..6, size in 1usize..12, seed in any::<u64>(), a in 0.0..3.0f64) {
        let q = Gmm::new(vec![0.5, 0.5], vec![0.0, 1.0], vec![1.0, 0.5]).unwrap();
        let pooled = gmm_sample(&q, groups * size, seed).unwrap();
        let risks: Vec<f64> = pooled
            .losses()
            .chunks(size)
            .map(|c| empirical_risk(c, ra(a)).unwrap())
            .collect();
        let nested = nested_risk(&risks, ra(a)).unwrap();
        let direct = pooled.risk(ra(a));
        prop_assert!((nested - direct).abs() <= 1e-12 * direct.abs().max(1.0));
    }
}

#[test]
fn mixture_risk_is_the_sample_limit() {
    let q = Gmm::new(vec![0.7, 0.3], vec![0.5, 1.0], vec![2.0, 1.0]).unwrap();
    let alpha = ra(0.5);
    let n = 1_000_000;
    let s = gmm_sample(&q, n, 2024).unwrap();
    let a = alpha.value();
    // Delta method on log of the sample mean of exp(a x).
    let e: Vec<f64> = s.losses().iter().map(|x| (a * x).exp()).collect();
    let m = mean(&e);
    let se = (variance(&e) / n as f64).sqrt() / (a * m);
    let gap = (s.risk(alpha) - gmm_risk(&q, alpha)).abs();
    assert!(gap <= 3.0 * se, "gap {gap} vs 3 se {}", 3.0 * se);
}
