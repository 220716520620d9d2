//! Problem data: horizon, grid, initial law, noise and ambiguity per period,
//! the congestion cost `F` and the price `P`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::convex::{q_class_constant, PwlConvex};
use crate::error::{invalid, Result};
use crate::measure::{AtomMeasure, Belief, DistanceOptions, Grid1D, GridMeasure};
use crate::risk::{validate_ambiguity, AmbiguitySet, DiscreteNoise};

/// Congestion cost family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", deny_unknown_fields)]
pub enum CongestionSpec {
    /// `F(t, x, b) = eta_t |x - mean_state(b, t)| + theta_t x^2 + offset_t`,
    /// one entry per period `0..=T`.
    #[serde(rename = "abs_mean_quadratic")]
    AbsMeanQuadratic { eta: Vec<f64>, theta: Vec<f64>, offset: Vec<f64> },
}

impl CongestionSpec {
    pub fn eval(&self, t: usize, x: f64, mean_state: f64) -> f64 {
        match self {
            Self::AbsMeanQuadratic { eta, theta, offset } => {
                eta[t] * (x - mean_state).abs() + theta[t] * x * x + offset[t]
            }
        }
    }

    fn validate(&self, horizon: usize) -> Result<()> {
        match self {
            Self::AbsMeanQuadratic { eta, theta, offset } => {
                for (name, v) in [("eta", eta), ("theta", theta), ("offset", offset)] {
                    if v.len() != horizon + 1 {
                        return Err(invalid(format!("congestion {name} needs {} entries", horizon + 1)));
                    }
                    if v.iter().any(|x| !x.is_finite()) {
                        return Err(invalid(format!("congestion {name} has non-finite entries")));
                    }
                }
                if eta.iter().chain(theta).any(|&x| x < 0.0) {
                    return Err(invalid("congestion eta and theta must be nonnegative for convexity"));
                }
                Ok(())
            }
        }
    }

    /// True when `F` does not depend on the belief.
    pub fn is_decoupled(&self) -> bool {
        match self {
            Self::AbsMeanQuadratic { eta, .. } => eta.iter().all(|&e| e == 0.0),
        }
    }

    /// Lipschitz constant of `b -> F(t, x, b)` with respect to the belief
    /// distance (mean state is 1-Lipschitz in W1).
    pub fn belief_lipschitz(&self, t: usize) -> f64 {
        match self {
            Self::AbsMeanQuadratic { eta, .. } => eta[t],
        }
    }
}

/// Price `P(t, b) = p0_t + kappa * clamp(mean_action(b, t), -clip, clip)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriceSpec {
    pub p0: Vec<f64>,
    pub kappa: f64,
    pub clip: f64,
}

impl PriceSpec {
    pub fn eval(&self, t: usize, mean_action: f64) -> f64 {
        self.p0[t] + self.kappa * mean_action.clamp(-self.clip, self.clip)
    }

    /// `sup_b |P(t, b)|`.
    pub fn bound(&self, t: usize) -> f64 {
        self.p0[t].abs() + self.kappa.abs() * self.clip
    }

    fn validate(&self, horizon: usize) -> Result<()> {
        if self.p0.len() != horizon {
            return Err(invalid(format!("price p0 needs {horizon} entries")));
        }
        if !(self.clip >= 0.0) || !self.kappa.is_finite() || self.p0.iter().any(|p| !p.is_finite()) {
            return Err(invalid("price parameters must be finite with clip >= 0"));
        }
        Ok(())
    }
}

/// Constants of the standing assumptions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Caps {
    /// Moment and density constant `C`.
    pub c: f64,
    /// Second-moment cap for belief components. When absent it is derived
    /// from the policy through the Kolmogorov moment recursion.
    #[serde(default)]
    pub belief_moment: Option<f64>,
}

/// Numerical settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Numerics {
    /// Largest mass allowed to leave the grid window per forward step.
    pub clamp_threshold: f64,
    /// Largest combined support solved exactly by the transport solver.
    pub support_cap: usize,
    /// Seed for subsampling in belief distances.
    pub distance_seed: u64,
}

impl Default for Numerics {
    fn default() -> Self {
        Self { clamp_threshold: 1e-6, support_cap: 512, distance_seed: 0x5eed }
    }
}

impl Numerics {
    pub fn distance_options(&self) -> DistanceOptions {
        DistanceOptions { cap: self.support_cap, seed: self.distance_seed }
    }
}

/// Full problem data.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelSpec {
    pub horizon: usize,
    pub grid: Grid1D,
    pub initial: GridMeasure,
    pub noise: Vec<DiscreteNoise>,
    pub ambiguity: Vec<AmbiguitySet>,
    pub congestion: CongestionSpec,
    pub price: PriceSpec,
    pub caps: Caps,
    pub numerics: Numerics,
}

impl ModelSpec {
    /// Structural validation: lengths, grid agreement, ambiguity shapes.
    pub fn validate(&self) -> Result<()> {
        let t = self.horizon;
        if t == 0 {
            return Err(invalid("horizon must be at least 1"));
        }
        self.grid.validate()?;
        if self.initial.grid() != &self.grid {
            return Err(invalid("initial law lives on a different grid"));
        }
        if self.noise.len() != t || self.ambiguity.len() != t {
            return Err(invalid(format!("noise and ambiguity need {t} entries each")));
        }
        for (amb, nu) in self.ambiguity.iter().zip(&self.noise) {
            amb.bounds(nu.len())?;
        }
        self.congestion.validate(t)?;
        self.price.validate(t)?;
        if !(self.caps.c > 0.0) {
            return Err(invalid("constant C must be positive"));
        }
        if let Some(cb) = self.caps.belief_moment {
            if !(cb > 0.0) {
                return Err(invalid("belief moment cap must be positive"));
            }
        }
        if !(self.numerics.clamp_threshold >= 0.0) || self.numerics.support_cap < 4 {
            return Err(invalid("numerics: clamp_threshold >= 0 and support_cap >= 4 required"));
        }
        Ok(())
    }

    pub fn is_decoupled(&self) -> bool {
        self.congestion.is_decoupled() && self.price.kappa == 0.0
    }

    /// `F(t, x, b)`.
    pub fn congestion_eval(&self, t: usize, x: f64, b: &Belief) -> f64 {
        self.congestion.eval(t, x, b.mean_state(t))
    }

    /// `P(t, b)` for `t < T`.
    pub fn price_eval(&self, t: usize, b: &Belief) -> f64 {
        self.price.eval(t, b.mean_action(t))
    }

    /// Product of per-period density caps.
    pub fn density_constant(&self) -> f64 {
        crate::risk::cap_product(&self.ambiguity)
    }

    /// Largest noise second moment.
    pub fn noise_moment(&self) -> f64 {
        self.noise.iter().map(|n| n.moment(2.0)).fold(0.0, f64::max)
    }

    /// Upper bounds on the second moments of `m(0..=T)` and of `mu(0..T)`
    /// under a feedback with `|alpha(x)| <= c_alpha (1 + |x|)`.
    ///
    /// Uses `E|X + alpha(X)|^2 <= 2 (1 + c_alpha)^2 (1 + M)`, the doubling
    /// bound for adding noise, `h^2 / 4` for rebinning, and the fact that
    /// rebinned laws live in the grid window.
    pub fn moment_bounds(&self, c_alpha: f64) -> (Vec<f64>, Vec<f64>) {
        let h = self.grid.h();
        let window = self.grid.x_min.powi(2).max(self.grid.x_max.powi(2));
        let mut m = Vec::with_capacity(self.horizon + 1);
        let mut mu = Vec::with_capacity(self.horizon);
        let mut cur = self.initial.moment(2.0);
        m.push(cur);
        for t in 0..self.horizon {
            mu.push(cur + 2.0 * c_alpha * c_alpha * (1.0 + cur));
            let c_nu = self.noise[t].moment(2.0);
            let next = 4.0 * (1.0 + c_alpha).powi(2) * (1.0 + cur) + 2.0 * c_nu + 0.25 * h * h;
            cur = next.min(window);
            m.push(cur);
        }
        (m, mu)
    }

    /// Belief moment cap `C_b`: the configured one, or the largest bound
    /// from [`ModelSpec::moment_bounds`].
    pub fn belief_moment_cap(&self, c_alpha: f64) -> f64 {
        self.caps.belief_moment.unwrap_or_else(|| {
            let (m, mu) = self.moment_bounds(c_alpha);
            m.into_iter().chain(mu).fold(0.0, f64::max)
        })
    }

    /// `F(t, ., b)` sampled on the grid as a convex function.
    pub fn congestion_curve(&self, t: usize, mean_state: f64) -> Result<PwlConvex> {
        PwlConvex::from_fn(self.grid, |x| self.congestion.eval(t, x, mean_state))
    }

    /// Assumption checks with human-readable outcomes.
    pub fn assumption_report(&self, probes: usize, seed: u64) -> Vec<Check> {
        let c = self.caps.c;
        let mut out = Vec::new();
        let m0 = self.initial.moment(2.0);
        out.push(Check::new("initial second moment", m0 <= c, format!("{m0:.6} vs C = {c}")));
        for (t, nu) in self.noise.iter().enumerate() {
            let m = nu.moment(2.0);
            out.push(Check::new(&format!("noise {t} second moment"), m <= c, format!("{m:.6} vs C = {c}")));
        }
        for (t, (amb, nu)) in self.ambiguity.iter().zip(&self.noise).enumerate() {
            let r = validate_ambiguity(amb, nu, c);
            let detail = if r.messages.is_empty() {
                format!("cap {} worst moment {:.6}", amb.density_cap(), r.worst_moment)
            } else {
                r.messages.join("; ")
            };
            out.push(Check::new(&format!("ambiguity {t}"), r.ok, detail));
            if !r.floor_ok {
                out.push(Check::warning(&format!("ambiguity {t} floor"), "no density floor of 1/C"));
            }
        }
        for t in 0..self.horizon {
            let p = self.price.bound(t);
            out.push(Check::new(&format!("price bound {t}"), p <= c, format!("|P| <= {p} vs C = {c}")));
        }
        // congestion convexity and growth at random beliefs
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (lo, hi) = (self.grid.x_min, self.grid.x_max);
        let mut worst = 0.0f64;
        let mut convex = true;
        for _ in 0..probes {
            for t in 0..=self.horizon {
                let mean = rng.random_range(lo..=hi);
                match self.congestion_curve(t, mean) {
                    Ok(f) => worst = worst.max(q_class_constant(&f, 2).0),
                    Err(_) => convex = false,
                }
            }
        }
        out.push(Check::new("congestion convex", convex, format!("{probes} random beliefs")));
        out.push(Check::new("congestion growth", worst <= c, format!("Q2 constant {worst:.6} vs C = {c}")));
        out
    }
}

/// One assumption check.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub ok: bool,
    /// Warnings never fail validation.
    pub warning: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, ok: bool, detail: String) -> Self {
        Self { name: name.into(), ok, warning: false, detail }
    }

    fn warning(name: &str, detail: &str) -> Self {
        Self { name: name.into(), ok: true, warning: true, detail: detail.into() }
    }
}

/// Belief-dependent coefficients precomputed for one belief.
#[derive(Clone, Debug, PartialEq)]
pub struct Coupling {
    /// `P(t, b)` for `t < T`.
    pub prices: Vec<f64>,
    /// Mean state of each component, `t = 0..=T`.
    pub mean_states: Vec<f64>,
}

impl Coupling {
    pub fn new(model: &ModelSpec, b: &Belief) -> Result<Self> {
        if b.horizon() != model.horizon {
            return Err(crate::Error::HorizonMismatch { left: model.horizon, right: b.horizon() });
        }
        Ok(Self {
            prices: (0..model.horizon).map(|t| model.price_eval(t, b)).collect(),
            mean_states: (0..=model.horizon).map(|t| b.mean_state(t)).collect(),
        })
    }

    /// `F(t, x, b)`.
    pub fn congestion(&self, model: &ModelSpec, t: usize, x: f64) -> f64 {
        model.congestion.eval(t, x, self.mean_states[t])
    }

    /// `l(t, x, a, b) = a^2 / 2 + a P(t, b) + F(t, x, b)`.
    pub fn running_cost(&self, model: &ModelSpec, t: usize, x: f64, a: f64) -> f64 {
        0.5 * a * a + a * self.prices[t] + self.congestion(model, t, x)
    }
}

/// Belief with every joint component a single atom `(x, a)` and terminal
/// atom `x`; handy for tests and probes.
pub fn point_belief(horizon: usize, x: f64, a: f64) -> Result<Belief> {
    let joints = (0..horizon).map(|_| AtomMeasure::dirac(&[x, a])).collect::<Result<Vec<_>>>()?;
    Belief::new(joints, AtomMeasure::dirac(&[x])?)
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    /// Small coupled model on `[-4, 4]`.
    pub fn small(horizon: usize, n: usize) -> ModelSpec {
        let grid = Grid1D::new(-4.0, 4.0, n).unwrap();
        let coin = DiscreteNoise::new(vec![(-0.25, 0.5), (0.25, 0.5)]).unwrap();
        ModelSpec {
            horizon,
            grid,
            initial: GridMeasure::discretized_gaussian(grid, 0.2, 0.5).unwrap(),
            noise: vec![coin; horizon],
            ambiguity: vec![AmbiguitySet::CVaR { alpha: 0.5 }; horizon],
            congestion: CongestionSpec::AbsMeanQuadratic {
                eta: vec![0.5; horizon + 1],
                theta: vec![0.1; horizon + 1],
                offset: vec![0.0; horizon + 1],
            },
            price: PriceSpec { p0: vec![0.1; horizon], kappa: 0.5, clip: 2.0 },
            caps: Caps { c: 10.0, belief_moment: None },
            numerics: Numerics::default(),
        }
    }
}
