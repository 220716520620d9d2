use super::Policy;
use crate::error::{invalid, Error, Result};
use crate::measure::{convolve, pushforward, rebin, AtomMeasure, Belief, GridMeasure};
use crate::model::ModelSpec;

/// Output of [`forward_pass`].
#[derive(Clone, Debug)]
pub struct Forward {
    /// `m(0..=T)` on the model grid.
    pub m: Vec<GridMeasure>,
    /// `mu(t) = (id, alpha_t) # m(t)`, zero-weight nodes dropped.
    pub mu: Vec<AtomMeasure>,
    pub belief: Belief,
    /// Largest per-step mass clamped at the grid ends.
    pub clamped: f64,
    /// Second-moment cap the components were checked against.
    pub moment_cap: f64,
}

/// Joint law of `(X, alpha_t(X))` for `X ~ m`.
pub fn joint_law(m: &GridMeasure, alpha: &[f64]) -> Result<AtomMeasure> {
    let coords = m
        .grid()
        .nodes()
        .into_iter()
        .zip(alpha)
        .flat_map(|(x, &a)| [x, a])
        .collect();
    Ok(AtomMeasure::new(2, coords, m.weights().to_vec())?.compacted())
}

/// Kolmogorov recursion `m(t+1) = nu(t) * (id + alpha_t) # m(t)`, projected
/// back onto the grid, and the induced belief.
pub fn forward_pass(policy: &Policy, model: &ModelSpec) -> Result<Forward> {
    if policy.horizon() != model.horizon {
        return Err(Error::HorizonMismatch { left: model.horizon, right: policy.horizon() });
    }
    if policy.grid() != &model.grid {
        return Err(invalid("policy lives on a different grid"));
    }
    let grid = model.grid;
    let nodes = grid.nodes();
    let mut m = vec![model.initial.clone()];
    let mut mu = Vec::with_capacity(model.horizon);
    let mut clamped = 0.0f64;
    for t in 0..model.horizon {
        let cur = m.last().expect("initial law present");
        let alpha = policy.nodes(t);
        mu.push(joint_law(cur, alpha)?);
        let moved: Vec<f64> = nodes.iter().zip(alpha).map(|(x, a)| x + a).collect();
        let pushed = pushforward(cur, &moved)?;
        let spread = convolve(&pushed, &model.noise[t])?;
        let r = rebin(&spread, &grid, model.numerics.clamp_threshold)?;
        clamped = clamped.max(r.clamped);
        m.push(r.measure);
    }
    let terminal = m.last().expect("terminal law present").to_atoms().compacted();
    let belief = Belief::new(mu.clone(), terminal)?;
    let moment_cap = model.belief_moment_cap(policy.growth_constant());
    for (t, mt) in m.iter().enumerate() {
        let mom = mt.moment(2.0);
        if mom > moment_cap {
            return Err(Error::MomentCap { what: format!("m({t})"), moment: mom, cap: moment_cap });
        }
    }
    belief.check_moment_cap(moment_cap)?;
    Ok(Forward { m, mu, belief, clamped, moment_cap })
}
