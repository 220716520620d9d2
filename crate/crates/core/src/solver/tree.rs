use super::Policy;
use crate::error::{Error, Result};
use crate::measure::Belief;
use crate::model::{Coupling, ModelSpec};
use crate::risk::{composite_risk_tree, ScenarioTree};

/// Default limit on scenario-tree leaves.
pub const TREE_CAP: usize = 1_000_000;

/// Scenario tree of closed-loop costs under `policy` against a frozen
/// belief. Roots are the charged nodes of the initial law; leaf values are
/// `sum_t l(t, X_t, alpha_t(X_t), b) + F(T, X_T, b)`.
pub fn policy_tree(model: &ModelSpec, policy: &Policy, b: &Belief, cap: usize) -> Result<ScenarioTree> {
    let coupling = Coupling::new(model, b)?;
    let roots: Vec<(f64, f64)> = model
        .initial
        .weights()
        .iter()
        .enumerate()
        .filter(|(_, &w)| w > 0.0)
        .map(|(i, &w)| (model.grid.node(i), w))
        .collect();
    let size = model.noise.iter().fold(roots.len(), |n, nu| n.saturating_mul(nu.len()));
    if size > cap {
        return Err(Error::TreeCap { size, cap });
    }
    let mut states: Vec<f64> = roots.iter().map(|r| r.0).collect();
    let mut costs = vec![0.0; states.len()];
    for t in 0..model.horizon {
        let ys = model.noise[t].points();
        let mut next_states = Vec::with_capacity(states.len() * ys.len());
        let mut next_costs = Vec::with_capacity(states.len() * ys.len());
        for (&x, &c) in states.iter().zip(&costs) {
            let a = policy.eval(t, x);
            let cost = c + coupling.running_cost(model, t, x, a);
            for y in ys {
                next_states.push(x + a + y);
                next_costs.push(cost);
            }
        }
        states = next_states;
        costs = next_costs;
    }
    let big_t = model.horizon;
    let leaves = states
        .iter()
        .zip(&costs)
        .map(|(&x, &c)| c + coupling.congestion(model, big_t, x))
        .collect();
    ScenarioTree::new(
        roots.iter().map(|r| r.1).collect(),
        model.noise.iter().map(|n| n.weights().to_vec()).collect(),
        leaves,
    )
}

/// Nested risk-averse cost of `policy` against the frozen belief `b`,
/// evaluated exactly on the full scenario tree.
pub fn evaluate_policy_tree(model: &ModelSpec, policy: &Policy, b: &Belief, cap: usize) -> Result<f64> {
    let tree = policy_tree(model, policy, b, cap)?;
    composite_risk_tree(&tree, &model.ambiguity)
}
