use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::stats::GapReport;
use crate::error::{invalid, Result};
use crate::measure::emd::splitmix;
use crate::measure::{belief_distance, emd_small, sample_with, wasserstein1_1d, AtomMeasure, Belief, GridMeasure};
use crate::model::{Coupling, ModelSpec};
use crate::par::{map_range, try_map_range};
use crate::solver::Policy;

/// Population sizes, repetitions and master seed of a Monte Carlo
/// experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub n_values: Vec<usize>,
    pub reps: usize,
    pub seed: u64,
    /// Rate offset in `(0, 1/2)`; the predicted one-dimensional decay
    /// exponent is `1/2 - xi`.
    #[serde(default = "default_xi")]
    pub xi: f64,
}

fn default_xi() -> f64 {
    0.05
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_values.is_empty() || self.n_values.contains(&0) {
            return Err(invalid("n_values must be a non-empty list of positive sizes"));
        }
        if self.reps == 0 {
            return Err(invalid("reps must be positive"));
        }
        if !(self.xi > 0.0 && self.xi < 0.5) {
            return Err(invalid(format!("xi must lie in (0, 1/2), got {}", self.xi)));
        }
        Ok(())
    }

    pub fn new(n_values: Vec<usize>, reps: usize, seed: u64) -> Self {
        Self { n_values, reps, seed, xi: default_xi() }
    }

    /// Predicted slope of `log E[d1]` against `log N` in dimension `d`.
    pub fn predicted_slope(&self, d: usize) -> f64 {
        if d <= 2 {
            -(0.5 - self.xi)
        } else {
            -1.0 / d as f64
        }
    }

    fn n_max(&self) -> usize {
        self.n_values.iter().copied().max().unwrap_or(0)
    }
}

/// Seed of the random stream owned by `player` in repetition `rep`.
///
/// A player's draws depend only on `(master, rep, player)`, so runs with
/// different population sizes share the first players' randomness.
pub fn stream_seed(master: u64, rep: u64, player: u64) -> u64 {
    splitmix(splitmix(splitmix(master) ^ rep.wrapping_add(1)) ^ player.wrapping_add(1))
}

/// One simulated path of the N-player closed loop.
#[derive(Clone, Debug, PartialEq)]
pub struct ClosedLoop {
    /// `states[t][k]`, `t = 0..=T`.
    pub states: Vec<Vec<f64>>,
    /// `actions[t][k]`, `t < T`.
    pub actions: Vec<Vec<f64>>,
}

impl ClosedLoop {
    pub fn players(&self) -> usize {
        self.states[0].len()
    }

    /// Empirical belief of the first `n` players.
    pub fn belief(&self, n: usize) -> Result<Belief> {
        if n == 0 || n > self.players() {
            return Err(invalid(format!("cannot take {n} of {} players", self.players())));
        }
        let joints = self
            .actions
            .iter()
            .zip(&self.states)
            .map(|(a, x)| {
                let coords = x[..n].iter().zip(&a[..n]).flat_map(|(&x, &a)| [x, a]).collect();
                AtomMeasure::empirical(2, coords).map(|m| m.compacted())
            })
            .collect::<Result<Vec<_>>>()?;
        let terminal = AtomMeasure::empirical(1, self.states[self.actions.len()][..n].to_vec())?.compacted();
        Belief::new(joints, terminal)
    }
}

fn inverse_cdf(cdf: &[f64], u: f64) -> usize {
    cdf.partition_point(|&c| c <= u).min(cdf.len() - 1)
}

fn cumulative(w: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    w.iter()
        .map(|x| {
            acc += x;
            acc
        })
        .collect()
}

/// Simulates `n` players who all use `policy` from i.i.d. initial states.
///
/// Each player draws its initial state and then its noise increments, in
/// that order, from its own stream (see [`stream_seed`]).
pub fn simulate_closed_loop(model: &ModelSpec, policy: &Policy, n: usize, seed: u64, rep: u64) -> Result<ClosedLoop> {
    if policy.horizon() != model.horizon {
        return Err(crate::Error::HorizonMismatch { left: model.horizon, right: policy.horizon() });
    }
    let big_t = model.horizon;
    let init_cdf = model.initial.cdf();
    let noise_cdf: Vec<Vec<f64>> = model.noise.iter().map(|nu| cumulative(nu.weights())).collect();
    let paths: Vec<(Vec<f64>, Vec<f64>)> = map_range(n, |k| {
        let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, rep, k as u64));
        let mut x = sample_with(&model.initial, &init_cdf, &mut rng, 1)[0];
        let mut xs = Vec::with_capacity(big_t + 1);
        let mut acts = Vec::with_capacity(big_t);
        for t in 0..big_t {
            let a = policy.eval(t, x);
            let u: f64 = rng.random::<f64>() * noise_cdf[t][noise_cdf[t].len() - 1];
            let y = model.noise[t].points()[inverse_cdf(&noise_cdf[t], u)];
            xs.push(x);
            acts.push(a);
            x = x + a + y;
        }
        xs.push(x);
        (xs, acts)
    });
    let states = (0..=big_t).map(|t| paths.iter().map(|p| p.0[t]).collect()).collect();
    let actions = (0..big_t).map(|t| paths.iter().map(|p| p.1[t]).collect()).collect();
    Ok(ClosedLoop { states, actions })
}

/// Cost difference `l(b^N) - l(b_bar)` accumulated along one player's path;
/// the quadratic control term cancels.
pub fn delta_ell(model: &ModelSpec, path: &ClosedLoop, player: usize, empirical: &Coupling, mean_field: &Coupling) -> f64 {
    let big_t = model.horizon;
    let mut d = 0.0;
    for t in 0..big_t {
        let x = path.states[t][player];
        let a = path.actions[t][player];
        d += a * (empirical.prices[t] - mean_field.prices[t]);
        d += empirical.congestion(model, t, x) - mean_field.congestion(model, t, x);
    }
    let x = path.states[big_t][player];
    d + empirical.congestion(model, big_t, x) - mean_field.congestion(model, big_t, x)
}

/// Runs every repetition once with the largest population and evaluates
/// `f(path, n)` on the first `n` players for each configured size.
fn per_size_samples<F>(model: &ModelSpec, policy: &Policy, cfg: &SimConfig, f: F) -> Result<Vec<Vec<f64>>>
where
    F: Fn(&ClosedLoop, usize) -> Result<f64> + Sync + Send,
{
    cfg.validate()?;
    let by_rep: Vec<Vec<f64>> = try_map_range(cfg.reps, |r| {
        let path = simulate_closed_loop(model, policy, cfg.n_max(), cfg.seed, r as u64)?;
        cfg.n_values.iter().map(|&n| f(&path, n)).collect::<Result<Vec<f64>>>()
    })?;
    Ok((0..cfg.n_values.len()).map(|i| by_rep.iter().map(|r| r[i]).collect()).collect())
}

/// `d(b^N, b_bar)` statistics as N grows.
pub fn belief_gap_experiment(model: &ModelSpec, policy: &Policy, b_bar: &Belief, cfg: &SimConfig) -> Result<GapReport> {
    let opts = model.numerics.distance_options();
    let samples = per_size_samples(model, policy, cfg, |path, n| belief_distance(&path.belief(n)?, b_bar, &opts))?;
    Ok(GapReport::from_samples(&cfg.n_values, &samples))
}

/// `|Delta l|` statistics for player 0 as N grows.
pub fn deltaell_gap_experiment(model: &ModelSpec, policy: &Policy, b_bar: &Belief, cfg: &SimConfig) -> Result<GapReport> {
    let mean_field = Coupling::new(model, b_bar)?;
    let samples = per_size_samples(model, policy, cfg, |path, n| {
        let empirical = Coupling::new(model, &path.belief(n)?)?;
        Ok(delta_ell(model, path, 0, &empirical, &mean_field).abs())
    })?;
    Ok(GapReport::from_samples(&cfg.n_values, &samples))
}

/// Largest sample size accepted for `d >= 2`.
pub const FG_MULTI_DIM_MAX: usize = 512;

/// Empirical measure convergence for `law` (or its `d`-fold product).
///
/// For `d = 1` the distance is the exact W1 to the law itself. For
/// `d >= 2` it is the exact W1 between two independent samples of size N,
/// which decays at the same rate.
pub fn fournier_guillin_rate(law: &GridMeasure, d: usize, cfg: &SimConfig) -> Result<GapReport> {
    cfg.validate()?;
    if !(1..=3).contains(&d) {
        return Err(invalid(format!("dimension must be 1, 2 or 3, got {d}")));
    }
    let n_max = cfg.n_max();
    if d > 1 && n_max > FG_MULTI_DIM_MAX {
        return Err(invalid(format!("d >= 2 supports N <= {FG_MULTI_DIM_MAX}, got {n_max}")));
    }
    let cdf = law.cdf();
    let target = law.to_atoms();
    let by_rep: Vec<Vec<f64>> = try_map_range(cfg.reps, |r| {
        let draw = |stream: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(cfg.seed, r as u64, stream));
            sample_with(law, &cdf, &mut rng, n_max * d)
        };
        let a = draw(0);
        let b = if d > 1 { draw(1) } else { Vec::new() };
        cfg.n_values
            .iter()
            .map(|&n| {
                let pa = AtomMeasure::empirical(d, a[..n * d].to_vec())?;
                if d == 1 {
                    Ok(wasserstein1_1d(&pa, &target))
                } else {
                    let pb = AtomMeasure::empirical(d, b[..n * d].to_vec())?;
                    emd_small(&pa, &pb, 2 * n)
                }
            })
            .collect::<Result<Vec<f64>>>()
    })?;
    let samples: Vec<Vec<f64>> = (0..cfg.n_values.len()).map(|i| by_rep.iter().map(|r| r[i]).collect()).collect();
    Ok(GapReport::from_samples(&cfg.n_values, &samples))
}
