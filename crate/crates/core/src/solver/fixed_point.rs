use super::{backward_pass, forward_pass, Policy};
use crate::convex::PwlConvex;
use crate::error::{invalid, Result};
use crate::measure::{belief_distance, mix_atoms, AtomMeasure, Belief, GridMeasure};
use crate::model::ModelSpec;

/// Settings for the damped Picard iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct FixedPointOptions {
    /// Weight of the new belief in each update, in `[0, 1]`.
    pub damping: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// Starting belief; defaults to the belief of the zero feedback.
    pub initial: Option<Belief>,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        Self { damping: 0.5, tol: 1e-3, max_iter: 200, initial: None }
    }
}

/// Result of [`fixed_point`].
#[derive(Clone, Debug)]
pub struct MfgSolution {
    pub u: Vec<PwlConvex>,
    pub ubar: Vec<PwlConvex>,
    pub policy: Policy,
    /// State laws generated by `policy`.
    pub m: Vec<GridMeasure>,
    pub mu: Vec<AtomMeasure>,
    /// Last iterate `b_k`; `policy` is optimal against it.
    pub belief: Belief,
    /// Belief generated by `policy`.
    pub induced: Belief,
    /// `d(b_k, b*(alpha*(b_k)))` for every visited iterate.
    pub residuals: Vec<f64>,
    /// Number of belief updates performed.
    pub iterations: usize,
    pub converged: bool,
}

impl MfgSolution {
    pub fn final_residual(&self) -> f64 {
        *self.residuals.last().expect("at least one residual")
    }

    /// `int u(0, x) dm0(x)`.
    pub fn value(&self) -> f64 {
        self.m[0].integrate(self.u[0].values())
    }
}

/// `(1 - lambda) b1 + lambda b2`, componentwise.
pub fn mix_beliefs(b1: &Belief, b2: &Belief, lambda: f64) -> Result<Belief> {
    if b1.horizon() != b2.horizon() {
        return Err(crate::Error::HorizonMismatch { left: b1.horizon(), right: b2.horizon() });
    }
    let joints = b1
        .joints
        .iter()
        .zip(&b2.joints)
        .map(|(p, q)| mix_atoms(p, q, lambda))
        .collect::<Result<Vec<_>>>()?;
    Belief::new(joints, mix_atoms(&b1.terminal, &b2.terminal, lambda)?)
}

/// Damped Picard iteration `b_{k+1} = (1 - lambda) b_k + lambda b*(alpha*(b_k))`.
///
/// Stops as soon as the residual `d(b_k, b*(alpha*(b_k)))` is at most `tol`
/// or after `max_iter` updates. Non-convergence is reported through
/// `converged`, not as an error.
pub fn fixed_point(model: &ModelSpec, opts: &FixedPointOptions) -> Result<MfgSolution> {
    model.validate()?;
    if !(0.0..=1.0).contains(&opts.damping) {
        return Err(invalid(format!("damping {} outside [0, 1]", opts.damping)));
    }
    let dist = model.numerics.distance_options();
    let mut b = match &opts.initial {
        Some(b) => b.clone(),
        None => forward_pass(&Policy::zero(model.grid, model.horizon), model)?.belief,
    };
    let mut residuals = Vec::new();
    let mut iterations = 0;
    loop {
        let back = backward_pass(&b, model)?;
        let fwd = forward_pass(&back.policy, model)?;
        let r = belief_distance(&b, &fwd.belief, &dist)?;
        residuals.push(r);
        let converged = r <= opts.tol;
        if converged || iterations >= opts.max_iter {
            return Ok(MfgSolution {
                u: back.u,
                ubar: back.ubar,
                policy: back.policy,
                m: fwd.m,
                mu: fwd.mu,
                belief: b,
                induced: fwd.belief,
                residuals,
                iterations,
                converged,
            });
        }
        b = mix_beliefs(&b, &fwd.belief, opts.damping)?;
        iterations += 1;
    }
}
