use super::Policy;
use crate::convex::PwlConvex;
use crate::error::Result;
use crate::measure::Belief;
use crate::model::{Coupling, ModelSpec};
use crate::par::map_range;
use crate::risk::upsilon;

/// Output of [`backward_pass`].
#[derive(Clone, Debug)]
pub struct Backward {
    /// `u(0..=T)`.
    pub u: Vec<PwlConvex>,
    /// `ubar[t]` is the smoothed continuation `Υ[u(t+1)]`, `t < T`.
    pub ubar: Vec<PwlConvex>,
    pub policy: Policy,
    pub coupling: Coupling,
}

/// Value functions and optimal feedback for a frozen belief.
///
/// `u(T) = F(T, ., b)`, and for `t < T`, with `P = P(t, b)`:
/// `u(t, x) = V_{ubar}(x - P) + F(t, x, b) - P^2 / 2` and
/// `alpha_t(x) = prox_{ubar}(x - P) - x`.
pub fn backward_pass(b: &Belief, model: &ModelSpec) -> Result<Backward> {
    let coupling = Coupling::new(model, b)?;
    let grid = model.grid;
    let big_t = model.horizon;
    let mut u = vec![model.congestion_curve(big_t, coupling.mean_states[big_t])?];
    let mut ubar = Vec::with_capacity(big_t);
    let mut maps = Vec::with_capacity(big_t);
    for t in (0..big_t).rev() {
        let next = u.last().expect("terminal value present");
        let smooth = upsilon(next, &model.noise[t], &model.ambiguity[t], &grid)?;
        let p = coupling.prices[t];
        let env = smooth.moreau_curve(&grid, p)?;
        let f = model.congestion_curve(t, coupling.mean_states[t])?;
        let half_p2 = 0.5 * p * p;
        let values: Vec<f64> = env
            .values()
            .iter()
            .zip(f.values())
            .map(|(v, fv)| v + fv - half_p2)
            .collect();
        let tol = 1e-9 * (1.0 + values.iter().fold(0.0f64, |m, v| m.max(v.abs())));
        let ut = PwlConvex::repaired(
            grid,
            values,
            env.slope_left() + f.slope_left(),
            env.slope_right() + f.slope_right(),
            tol,
        )?;
        maps.push(map_range(grid.n, |i| {
            let x = grid.node(i);
            smooth.prox(x - p) - x
        }));
        ubar.push(smooth);
        u.push(ut);
    }
    u.reverse();
    ubar.reverse();
    maps.reverse();
    Ok(Backward { u, ubar, policy: Policy::new(grid, maps)?, coupling })
}
