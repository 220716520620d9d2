mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rmfg_core::risk::{
    composite_risk_tree, validate_ambiguity, worst_case_expectation, AmbiguitySet, DiscreteNoise, ScenarioTree,
};

fn config() -> ProptestConfig {
    ProptestConfig { cases: 128, failure_persistence: None, ..ProptestConfig::default() }
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn one_step_worst_case_is_bracketed(seed in any::<u64>(), k in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = common::random_noise(&mut rng, k, 2.0);
        let amb = common::random_ambiguity(&mut rng, k);
        let vals: Vec<f64> = noise.points().iter().map(|y| y * y - 0.5).collect();
        let (v, z) = worst_case_expectation(&vals, &noise, &amb).unwrap();
        let mean: f64 = vals.iter().zip(noise.weights()).map(|(a, w)| a * w).sum();
        let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(v >= mean - 1e-12 && v <= max + 1e-12);
        let (floors, caps) = amb.bounds(k).unwrap();
        let mass: f64 = z.iter().zip(noise.weights()).map(|(z, w)| z * w).sum();
        prop_assert!((mass - 1.0).abs() <= 1e-12);
        for j in 0..k {
            prop_assert!(z[j] >= floors[j] - 1e-12 && z[j] <= caps[j] + 1e-12);
        }
    }

    #[test]
    fn composite_risk_is_monotone_in_levels(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (tree, _) = common::random_tree(&mut rng, 3, 3);
        let neutral = vec![AmbiguitySet::RiskNeutral; tree.depth()];
        let loose = vec![AmbiguitySet::CVaR { alpha: 0.5 }; tree.depth()];
        let tight = vec![AmbiguitySet::CVaR { alpha: 0.2 }; tree.depth()];
        let e = composite_risk_tree(&tree, &neutral).unwrap();
        let a = composite_risk_tree(&tree, &loose).unwrap();
        let b = composite_risk_tree(&tree, &tight).unwrap();
        prop_assert!(e <= a + 1e-12 && a <= b + 1e-12);
    }
}

#[test]
fn cvar_of_two_point_law() {
    let noise = DiscreteNoise::new(vec![(0.0, 0.75), (1.0, 0.25)]).unwrap();
    let (v, z) = worst_case_expectation(&[0.0, 1.0], &noise, &AmbiguitySet::CVaR { alpha: 0.5 }).unwrap();
    assert!((v - 0.5).abs() < 1e-15);
    assert_eq!(z, vec![2.0 / 3.0, 2.0]);
}

#[test]
fn nested_tree_by_hand() {
    // two roots, one coin level: CVaR(0.5) of a fair coin is the max
    let tree = ScenarioTree::new(vec![0.5, 0.5], vec![vec![0.5, 0.5]], vec![1.0, 3.0, -1.0, 0.0]).unwrap();
    let v = composite_risk_tree(&tree, &[AmbiguitySet::CVaR { alpha: 0.5 }]).unwrap();
    assert_eq!(v, 0.5 * 3.0 + 0.5 * 0.0);
}

#[test]
fn infeasible_and_weak_sets_are_reported() {
    let noise = DiscreteNoise::new(vec![(-1.0, 0.5), (1.0, 0.5)]).unwrap();
    let bad = AmbiguitySet::Box { floors: vec![1.5, 1.5], caps: vec![2.0, 2.0] };
    assert!(worst_case_expectation(&[0.0, 1.0], &noise, &bad).is_err());
    assert!(!validate_ambiguity(&bad, &noise, 10.0).ok);
    let cvar = validate_ambiguity(&AmbiguitySet::CVaR { alpha: 0.05 }, &noise, 10.0);
    assert!(!cvar.cap_ok);
    assert!(validate_ambiguity(&AmbiguitySet::CVaR { alpha: 0.5 }, &noise, 10.0).ok);
}
