#![allow(dead_code)]

use std::path::PathBuf;

use rand::Rng;
use rmfg_core::config::RunConfig;
use rmfg_core::convex::PwlConvex;
use rmfg_core::measure::{Grid1D, GridMeasure};
use rmfg_core::model::{Caps, CongestionSpec, ModelSpec, Numerics, PriceSpec};
use rmfg_core::risk::{AmbiguitySet, DiscreteNoise, ScenarioTree};

pub fn config(name: &str) -> ModelSpec {
    load(name).1
}

pub fn load(name: &str) -> (RunConfig, ModelSpec) {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(format!("{name}.json"));
    RunConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

/// Convex piecewise-linear function bounded below: chord slopes sorted,
/// left tail slope <= 0 <= right tail slope.
pub fn random_convex(rng: &mut impl Rng, grid: Grid1D) -> PwlConvex {
    let n = grid.n;
    let mut slopes: Vec<f64> = (0..n + 1).map(|_| rng.random_range(-3.0..3.0)).collect();
    slopes.sort_by(f64::total_cmp);
    slopes[0] = slopes[0].min(0.0);
    slopes[n] = slopes[n].max(0.0);
    let h = grid.h();
    let mut values = Vec::with_capacity(n);
    let mut v = rng.random_range(-2.0..2.0);
    values.push(v);
    for s in &slopes[1..n] {
        v += s * h;
        values.push(v);
    }
    PwlConvex::new(grid, values, slopes[0], slopes[n]).expect("convex by construction")
}

pub fn random_grid(rng: &mut impl Rng) -> Grid1D {
    let lo = rng.random_range(-5.0..-1.0);
    let hi = rng.random_range(1.0..5.0);
    Grid1D::new(lo, hi, rng.random_range(3..40)).unwrap()
}

pub fn random_noise(rng: &mut impl Rng, k: usize, scale: f64) -> DiscreteNoise {
    let atoms = (0..k).map(|_| (rng.random_range(-scale..=scale), rng.random_range(0.05..1.0))).collect::<Vec<_>>();
    let total: f64 = atoms.iter().map(|a| a.1).sum();
    DiscreteNoise::new(atoms.into_iter().map(|(y, w)| (y, w / total)).collect()).unwrap()
}

/// CVaR, a feasible box around 1, or risk neutral.
pub fn random_ambiguity(rng: &mut impl Rng, k: usize) -> AmbiguitySet {
    match rng.random_range(0..3) {
        0 => AmbiguitySet::CVaR { alpha: rng.random_range(0.1..=1.0) },
        1 => {
            let floors = (0..k).map(|_| rng.random_range(0.2..1.0)).collect();
            let caps = (0..k).map(|_| rng.random_range(1.0..3.0)).collect();
            AmbiguitySet::Box { floors, caps }
        }
        _ => AmbiguitySet::RiskNeutral,
    }
}

fn probabilities(rng: &mut impl Rng, k: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

/// Tree with depth `<= max_depth`, branching `<= max_k` and random leaves,
/// together with one ambiguity set per level.
pub fn random_tree(rng: &mut impl Rng, max_depth: usize, max_k: usize) -> (ScenarioTree, Vec<AmbiguitySet>) {
    let depth = rng.random_range(1..=max_depth);
    let roots = rng.random_range(1..=max_k);
    let levels: Vec<Vec<f64>> = (0..depth)
        .map(|_| {
            let k = rng.random_range(1..=max_k);
            probabilities(rng, k)
        })
        .collect();
    let ambs = levels.iter().map(|w| random_ambiguity(rng, w.len())).collect();
    let leaves = levels.iter().fold(roots, |n, w| n * w.len());
    let tree = ScenarioTree::new(
        probabilities(rng, roots),
        levels,
        (0..leaves).map(|_| rng.random_range(-5.0..5.0)).collect(),
    )
    .unwrap();
    (tree, ambs)
}

/// Coupled model with random coefficients, horizon `t`, `k` noise atoms
/// and an initial law charging `atoms` nodes near the origin.
pub fn random_model(rng: &mut impl Rng, t: usize, k: usize, n: usize, atoms: usize) -> ModelSpec {
    let grid = Grid1D::new(-6.0, 6.0, n).unwrap();
    let mut w = vec![0.0; n];
    let mid = n / 2;
    let spread = (n / 12).max(1);
    for _ in 0..atoms {
        let i = rng.random_range(mid - spread..=mid + spread);
        w[i] += rng.random_range(0.1..1.0);
    }
    ModelSpec {
        horizon: t,
        grid,
        initial: GridMeasure::from_unnormalized(grid, w).unwrap(),
        noise: (0..t).map(|_| random_noise(rng, k, 0.5)).collect(),
        ambiguity: (0..t).map(|_| random_ambiguity(rng, k)).collect(),
        congestion: CongestionSpec::AbsMeanQuadratic {
            eta: (0..=t).map(|_| rng.random_range(0.0..1.0)).collect(),
            theta: (0..=t).map(|_| rng.random_range(0.0..0.5)).collect(),
            offset: (0..=t).map(|_| rng.random_range(-1.0..1.0)).collect(),
        },
        price: PriceSpec {
            p0: (0..t).map(|_| rng.random_range(-0.5..0.5)).collect(),
            kappa: rng.random_range(0.0..1.0),
            clip: rng.random_range(0.0..2.0),
        },
        caps: Caps { c: 20.0, belief_moment: None },
        numerics: Numerics::default(),
    }
}

/// Evaluation points: a wide uniform sweep plus the grid nodes.
pub fn probe_points(grid: &Grid1D) -> Vec<f64> {
    let mut xs: Vec<f64> = (0..=800).map(|i| -40.0 + 0.1 * i as f64).collect();
    xs.extend(grid.nodes());
    xs
}
