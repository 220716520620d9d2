use crate::error::{Error, Result};
use crate::measure::{AtomMeasure, Belief};
use crate::model::{Coupling, ModelSpec};
use crate::par::{map_range, ordered_sum};
use crate::risk::worst_case_weighted;
use crate::solver::Policy;

/// Default limit on joint scenario paths.
pub const EXACT_CAP: usize = 100_000;

/// Which belief enters the players' costs.
#[derive(Clone, Copy, Debug)]
pub enum BeliefMode<'a> {
    /// The empirical belief `b^N` of the realised joint path.
    Empirical,
    /// A frozen belief, typically the mean-field one.
    Fixed(&'a Belief),
}

/// Exhaustive evaluation of a small N-player game.
#[derive(Clone, Debug, PartialEq)]
pub struct SmallGame {
    /// Nested risk-averse cost of each player.
    pub values: Vec<f64>,
    /// `leaf_costs[i][l]`: total cost of player `i` on joint path `l`.
    pub leaf_costs: Vec<Vec<f64>>,
    /// Probability of each joint path.
    pub leaf_weights: Vec<f64>,
}

impl SmallGame {
    /// `E |cost_i - other.cost_i|` over joint paths.
    pub fn mean_abs_difference(&self, other: &SmallGame, player: usize) -> f64 {
        ordered_sum(
            self.leaf_weights
                .iter()
                .zip(&self.leaf_costs[player])
                .zip(&other.leaf_costs[player])
                .map(|((w, a), b)| w * (a - b).abs()),
        )
    }
}

fn digit(code: usize, k: usize, n: usize, base: usize) -> usize {
    (code / base.pow((n - 1 - k) as u32)) % base
}

/// Evaluates every player's nested risk exactly on the joint scenario tree.
///
/// Player `i`'s one-step risk at period `t` takes the worst case over its own
/// noise only; the other players' noise is averaged out inside. The root is a
/// plain expectation over the i.i.d. initial states.
pub fn exact_small_game_eval(model: &ModelSpec, policies: &[Policy], mode: BeliefMode, cap: usize) -> Result<SmallGame> {
    let n = policies.len();
    if n == 0 {
        return Err(crate::error::invalid("need at least one player"));
    }
    for p in policies {
        if p.horizon() != model.horizon {
            return Err(Error::HorizonMismatch { left: model.horizon, right: p.horizon() });
        }
    }
    let big_t = model.horizon;
    let roots: Vec<(f64, f64)> = model
        .initial
        .weights()
        .iter()
        .enumerate()
        .filter(|(_, &w)| w > 0.0)
        .map(|(i, &w)| (model.grid.node(i), w))
        .collect();
    let r = roots.len();
    let ks: Vec<usize> = model.noise.iter().map(|nu| nu.len()).collect();
    let pow = |b: usize| -> Option<usize> { b.checked_pow(n as u32) };
    let root_combos = pow(r);
    let level_combos: Option<Vec<usize>> = ks.iter().map(|&k| pow(k)).collect();
    let size = match (root_combos, &level_combos) {
        (Some(rc), Some(lc)) => lc.iter().try_fold(rc, |a, &b| a.checked_mul(b)),
        _ => None,
    };
    let size = match size {
        Some(s) if s <= cap => s,
        s => return Err(Error::TreeCap { size: s.unwrap_or(usize::MAX), cap }),
    };
    let root_combos = root_combos.unwrap_or(0);
    let level_combos = level_combos.unwrap_or_default();

    let fixed = match mode {
        BeliefMode::Fixed(b) => Some(Coupling::new(model, b)?),
        BeliefMode::Empirical => None,
    };

    // Leaf index: root combo most significant, then periods 0..T-1.
    let leaves: Vec<Result<(Vec<f64>, f64)>> = map_range(size, |leaf| {
        let mut rest = leaf;
        let mut codes = vec![0usize; big_t];
        for t in (0..big_t).rev() {
            codes[t] = rest % level_combos[t];
            rest /= level_combos[t];
        }
        let root = rest;
        let mut weight = 1.0;
        let mut states = vec![vec![0.0; n]; big_t + 1];
        let mut actions = vec![vec![0.0; n]; big_t];
        for k in 0..n {
            let (x0, w) = roots[digit(root, k, n, r)];
            states[0][k] = x0;
            weight *= w;
        }
        for t in 0..big_t {
            let nu = &model.noise[t];
            for k in 0..n {
                let j = digit(codes[t], k, n, ks[t]);
                let a = policies[k].eval(t, states[t][k]);
                actions[t][k] = a;
                states[t + 1][k] = states[t][k] + a + nu.points()[j];
                weight *= nu.weights()[j];
            }
        }
        let coupling = match &fixed {
            Some(c) => c.clone(),
            None => {
                let joints = (0..big_t)
                    .map(|t| {
                        let coords = states[t].iter().zip(&actions[t]).flat_map(|(&x, &a)| [x, a]).collect();
                        AtomMeasure::empirical(2, coords)
                    })
                    .collect::<Result<Vec<_>>>()?;
                let terminal = AtomMeasure::empirical(1, states[big_t].clone())?;
                Coupling::new(model, &Belief::new(joints, terminal)?)?
            }
        };
        let costs = (0..n)
            .map(|k| {
                let mut c = 0.0;
                for t in 0..big_t {
                    c += coupling.running_cost(model, t, states[t][k], actions[t][k]);
                }
                c + coupling.congestion(model, big_t, states[big_t][k])
            })
            .collect();
        Ok((costs, weight))
    });
    let leaves = leaves.into_iter().collect::<Result<Vec<_>>>()?;
    let leaf_weights: Vec<f64> = leaves.iter().map(|l| l.1).collect();
    let leaf_costs: Vec<Vec<f64>> = (0..n).map(|i| leaves.iter().map(|l| l.0[i]).collect()).collect();

    let values = (0..n)
        .map(|i| {
            let mut vals = leaf_costs[i].clone();
            for t in (0..big_t).rev() {
                let k = ks[t];
                let group = level_combos[t];
                let w = model.noise[t].weights();
                vals = vals
                    .chunks(group)
                    .map(|chunk| {
                        let mut own = vec![0.0; k];
                        for (c, v) in chunk.iter().enumerate() {
                            let mut others = 1.0;
                            for p in (0..n).filter(|&p| p != i) {
                                others *= w[digit(c, p, n, k)];
                            }
                            own[digit(c, i, n, k)] += others * v;
                        }
                        worst_case_weighted(&own, w, &model.ambiguity[t]).map(|r| r.0)
                    })
                    .collect::<Result<Vec<f64>>>()?;
            }
            debug_assert_eq!(vals.len(), root_combos);
            Ok(ordered_sum(vals.iter().enumerate().map(|(c, v)| {
                let mut w = 1.0;
                for p in 0..n {
                    w *= roots[digit(c, p, n, r)].1;
                }
                w * v
            })))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(SmallGame { values, leaf_costs, leaf_weights })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{Grid1D, GridMeasure};
    use crate::model::fixtures;
    use crate::risk::AmbiguitySet;
    use crate::solver::{evaluate_policy_tree, fixed_point, FixedPointOptions};

    fn tiny(horizon: usize) -> ModelSpec {
        let mut m = fixtures::small(horizon, 81);
        let grid = m.grid.clone();
        let mut w = vec![0.0; grid.n];
        w[38] = 0.3;
        w[40] = 0.5;
        w[43] = 0.2;
        m.initial = GridMeasure::new(grid, w).unwrap();
        m
    }

    #[test]
    fn single_player_matches_the_policy_tree() {
        let m = tiny(2);
        let sol = fixed_point(&m, &FixedPointOptions::default()).unwrap();
        let g = exact_small_game_eval(&m, &[sol.policy.clone()], BeliefMode::Fixed(&sol.induced), EXACT_CAP).unwrap();
        let v = evaluate_policy_tree(&m, &sol.policy, &sol.induced, EXACT_CAP).unwrap();
        assert!((g.values[0] - v).abs() < 1e-12, "{} vs {v}", g.values[0]);
    }

    #[test]
    fn risk_neutral_is_plain_expectation() {
        let mut m = tiny(2);
        m.ambiguity = vec![AmbiguitySet::RiskNeutral; 2];
        let p = Policy::constant(m.grid.clone(), 2, 0.1);
        let g = exact_small_game_eval(&m, &[p.clone(), p], BeliefMode::Empirical, EXACT_CAP).unwrap();
        let total: f64 = g.leaf_weights.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        for i in 0..2 {
            let e: f64 = g.leaf_weights.iter().zip(&g.leaf_costs[i]).map(|(w, c)| w * c).sum();
            assert!((g.values[i] - e).abs() < 1e-12);
        }
    }

    #[test]
    fn symmetric_players_have_equal_values() {
        let m = tiny(2);
        let p = Policy::zero(m.grid.clone(), 2);
        let g = exact_small_game_eval(&m, &[p.clone(), p], BeliefMode::Empirical, EXACT_CAP).unwrap();
        assert!((g.values[0] - g.values[1]).abs() < 1e-12);
    }

    #[test]
    fn fixed_belief_ignores_the_other_players() {
        let m = tiny(1);
        let b = crate::model::point_belief(1, 0.0, 0.0).unwrap();
        let p = Policy::zero(m.grid.clone(), 1);
        let q = Policy::constant(m.grid.clone(), 1, 0.3);
        let alone = exact_small_game_eval(&m, &[p.clone()], BeliefMode::Fixed(&b), EXACT_CAP).unwrap();
        let pair = exact_small_game_eval(&m, &[p, q], BeliefMode::Fixed(&b), EXACT_CAP).unwrap();
        assert!((alone.values[0] - pair.values[0]).abs() < 1e-12);
    }

    #[test]
    fn cap_is_enforced() {
        let m = fixtures::small(2, 81);
        let p = Policy::zero(Grid1D::new(-4.0, 4.0, 81).unwrap(), 2);
        let err = exact_small_game_eval(&m, &[p.clone(), p], BeliefMode::Empirical, EXACT_CAP).unwrap_err();
        assert!(matches!(err, Error::TreeCap { .. }));
    }
}
