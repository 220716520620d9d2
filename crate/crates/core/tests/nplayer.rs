mod common;

use proptest::prelude::*;
use rmfg_core::measure::{belief_distance, DistanceOptions, GridMeasure};
use rmfg_core::nplayer::{fournier_guillin_rate, simulate_closed_loop, stream_seed, SimConfig};
use rmfg_core::risk::DiscreteNoise;
use rmfg_core::solver::{fixed_point, forward_pass, Policy};

#[test]
fn single_player_follows_deterministic_path() {
    let mut model = common::config("decoupled");
    let grid = model.grid;
    model.initial = GridMeasure::dirac(grid, grid.n / 2 + 7).unwrap();
    model.noise = vec![DiscreteNoise::new(vec![(0.25, 1.0)]).unwrap(); model.horizon];
    let policy = Policy::new(grid, (0..model.horizon).map(|t| grid.nodes().iter().map(|x| -0.5 * x + 0.1 * t as f64).collect()).collect()).unwrap();
    let path = simulate_closed_loop(&model, &policy, 1, 99, 0).unwrap();
    let mut x = grid.node(grid.n / 2 + 7);
    assert_eq!(path.states[0][0], x);
    for t in 0..model.horizon {
        let a = policy.eval(t, x);
        assert!((path.actions[t][0] - a).abs() < 1e-12);
        x += a + 0.25;
        assert!((path.states[t + 1][0] - x).abs() < 1e-12);
    }
}

#[test]
fn empirical_atoms_carry_multiples_of_one_over_n() {
    let model = common::config("decoupled");
    let policy = Policy::zero(model.grid, model.horizon);
    let n = 37;
    let path = simulate_closed_loop(&model, &policy, n, 3, 1).unwrap();
    let b = path.belief(n).unwrap();
    for mu in b.joints.iter().chain(std::iter::once(&b.terminal)) {
        let total: f64 = mu.weights().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        for w in mu.weights() {
            let k = w * n as f64;
            assert!((k - k.round()).abs() < 1e-9 && k.round() >= 1.0, "{w}");
        }
    }
}

#[test]
fn large_population_mean_matches_mean_field() {
    let model = common::config("decoupled");
    let sol = fixed_point(&model, &Default::default()).unwrap();
    let fwd = forward_pass(&sol.policy, &model).unwrap();
    let n = 10_000;
    let path = simulate_closed_loop(&model, &sol.policy, n, 11, 0).unwrap();
    for t in 0..=model.horizon {
        let xs = &path.states[t];
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let target = fwd.m[t].mean();
        assert!((mean - target).abs() <= 4.0 * (var / n as f64).sqrt() + 1e-12, "t={t}: {mean} vs {target}");
    }
}

#[test]
fn identical_players_reproduce_the_mean_field_belief() {
    let mut model = common::config("decoupled");
    let grid = model.grid;
    model.initial = GridMeasure::dirac(grid, grid.n / 2).unwrap();
    model.noise = vec![DiscreteNoise::new(vec![(2.0 * grid.h(), 1.0)]).unwrap(); model.horizon];
    let policy = Policy::zero(grid, model.horizon);
    let b_bar = forward_pass(&policy, &model).unwrap().belief;
    let b_n = simulate_closed_loop(&model, &policy, 25, 0, 0).unwrap().belief(25).unwrap();
    assert!(belief_distance(&b_n, &b_bar, &DistanceOptions::default()).unwrap() < 1e-12);
}

#[test]
fn point_mass_has_no_sampling_error() {
    let grid = rmfg_core::measure::Grid1D::new(-1.0, 1.0, 5).unwrap();
    let law = GridMeasure::dirac(grid, 1).unwrap();
    for d in [1, 2] {
        let rep = fournier_guillin_rate(&law, d, &SimConfig::new(vec![1, 4, 16], 5, 0)).unwrap();
        assert!(rep.rows.iter().all(|r| r.mean == 0.0 && r.stderr == 0.0));
    }
}

#[test]
fn doubling_repetitions_halves_squared_error() {
    let grid = rmfg_core::measure::Grid1D::new(-1.0, 1.0, 41).unwrap();
    let law = GridMeasure::uniform(grid).unwrap();
    let se = |reps| fournier_guillin_rate(&law, 1, &SimConfig::new(vec![64], reps, 21)).unwrap().rows[0].stderr;
    let ratio = (se(1600) / se(800)).powi(2);
    assert!((0.4..0.6).contains(&ratio), "{ratio}");
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 256, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn player_streams_are_distinct(m in any::<u64>(), r in 0u64..1000, p in 0u64..1000, q in 0u64..1000) {
        prop_assume!(p != q);
        prop_assert_ne!(stream_seed(m, r, p), stream_seed(m, r, q));
        prop_assert_ne!(stream_seed(m, r, p), stream_seed(m, r + 1, p));
    }
}
