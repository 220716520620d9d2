use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{backward_pass, evaluate_policy_tree, Policy, TREE_CAP};
use crate::error::Result;
use crate::measure::Belief;
use crate::model::ModelSpec;
use crate::par::try_map_range;

/// Settings of the dynamic-programming oracle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleOptions {
    pub perturbations: usize,
    /// Sup-norm size of each random policy perturbation.
    pub amplitude: f64,
    pub seed: u64,
    pub tree_cap: usize,
    /// Allowed gap between the grid value and the tree value.
    pub tolerance: f64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self { perturbations: 50, amplitude: 0.1, seed: 17, tree_cap: TREE_CAP, tolerance: 5e-3 }
    }
}

/// Outcome of [`dp_oracle`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OracleReport {
    /// `integral of u(0) against the initial law`.
    pub dp_value: f64,
    /// Exact tree cost of the grid-optimal feedback.
    pub tree_value: f64,
    pub gap: f64,
    /// Tree costs of the perturbed feedbacks.
    pub perturbed: Vec<f64>,
    /// `min(perturbed) - tree_value`; negative values mean a perturbation
    /// did better.
    pub worst_margin: f64,
    pub passed: bool,
}

/// Random smooth perturbations `amp * (a + b sin(w x + phi)) / 2` per period.
pub fn random_perturbation(policy: &Policy, amplitude: f64, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let grid = policy.grid();
    let span = (grid.x_max - grid.x_min).max(f64::MIN_POSITIVE);
    (0..policy.horizon())
        .map(|_| {
            let a: f64 = rng.random_range(-1.0..=1.0);
            let b: f64 = rng.random_range(-1.0..=1.0);
            let w = rng.random_range(0.5..4.0) * std::f64::consts::PI / span;
            let phi = rng.random_range(0.0..std::f64::consts::TAU);
            grid.nodes().iter().map(|x| 0.5 * amplitude * (a + b * (w * x + phi).sin())).collect()
        })
        .collect()
}

/// Compares the grid dynamic-programming value against exact scenario-tree
/// costs of the optimal feedback and of random perturbations of it.
pub fn dp_oracle(model: &ModelSpec, b: &Belief, opts: &OracleOptions) -> Result<OracleReport> {
    let back = backward_pass(b, model)?;
    let dp_value = model.initial.integrate(back.u[0].values());
    let tree_value = evaluate_policy_tree(model, &back.policy, b, opts.tree_cap)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let deltas: Vec<Vec<Vec<f64>>> =
        (0..opts.perturbations).map(|_| random_perturbation(&back.policy, opts.amplitude, &mut rng)).collect();
    let perturbed = try_map_range(deltas.len(), |k| {
        let p = back.policy.perturbed(&deltas[k])?;
        evaluate_policy_tree(model, &p, b, opts.tree_cap)
    })?;
    let worst_margin = perturbed.iter().map(|v| v - tree_value).fold(f64::INFINITY, f64::min);
    let gap = (dp_value - tree_value).abs();
    let passed = gap <= opts.tolerance && perturbed.iter().all(|&v| v >= dp_value - opts.tolerance);
    Ok(OracleReport { dp_value, tree_value, gap, perturbed, worst_margin, passed })
}
