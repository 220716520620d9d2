//! Density-band ambiguity sets over discrete noise, worst-case expectations,
//! the smoothing operator `Υ` and nested risk on scenario trees.

use serde::{Deserialize, Serialize};

use crate::convex::PwlConvex;
use crate::error::{invalid, Error, Result};
use crate::measure::{Grid1D, Law1D, MASS_TOL};
use crate::par::ordered_sum;

/// One atom `(y, w)` of a noise law.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseAtom {
    pub y: f64,
    pub w: f64,
}

/// Finitely supported noise law with positive weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NoiseRepr", into = "NoiseRepr")]
pub struct DiscreteNoise {
    ys: Vec<f64>,
    ws: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NoiseRepr {
    atoms: Vec<NoiseAtom>,
}

impl TryFrom<NoiseRepr> for DiscreteNoise {
    type Error = Error;
    fn try_from(r: NoiseRepr) -> Result<Self> {
        Self::new(r.atoms.iter().map(|a| (a.y, a.w)).collect())
    }
}

impl From<DiscreteNoise> for NoiseRepr {
    fn from(n: DiscreteNoise) -> Self {
        Self { atoms: n.ys.iter().zip(&n.ws).map(|(&y, &w)| NoiseAtom { y, w }).collect() }
    }
}

impl DiscreteNoise {
    pub fn new(atoms: Vec<(f64, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(invalid("noise law needs at least one atom"));
        }
        for &(y, w) in &atoms {
            if !y.is_finite() {
                return Err(invalid(format!("noise atom at {y}")));
            }
            if !(w > 0.0) || !w.is_finite() {
                return Err(invalid(format!("noise weight {w} must be positive")));
            }
        }
        let total = ordered_sum(atoms.iter().map(|a| a.1));
        if (total - 1.0).abs() > MASS_TOL {
            return Err(invalid(format!("noise weights sum to {total}")));
        }
        Ok(Self { ys: atoms.iter().map(|a| a.0).collect(), ws: atoms.iter().map(|a| a.1).collect() })
    }

    /// Point mass at `y`.
    pub fn dirac(y: f64) -> Self {
        Self { ys: vec![y], ws: vec![1.0] }
    }

    pub fn len(&self) -> usize {
        self.ys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ys.is_empty()
    }

    pub fn points(&self) -> &[f64] {
        &self.ys
    }

    pub fn weights(&self) -> &[f64] {
        &self.ws
    }

    pub fn moment(&self, p: f64) -> f64 {
        ordered_sum(self.ys.iter().zip(&self.ws).map(|(y, w)| w * y.abs().powf(p)))
    }

    pub fn max_abs(&self) -> f64 {
        self.ys.iter().fold(0.0, |m, y| m.max(y.abs()))
    }
}

impl Law1D for DiscreteNoise {
    fn atoms_1d(&self) -> Vec<(f64, f64)> {
        self.ys.iter().copied().zip(self.ws.iter().copied()).collect()
    }
}

/// Admissible densities `Z` against the noise law: `floor_j <= Z_j <= cap_j`
/// with `sum_j w_j Z_j = 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", deny_unknown_fields)]
pub enum AmbiguitySet {
    /// Only `Z = 1`.
    RiskNeutral,
    /// Densities in `[0, 1/alpha]`.
    #[serde(rename = "CVaR")]
    CVaR { alpha: f64 },
    /// Per-atom bounds.
    Box { floors: Vec<f64>, caps: Vec<f64> },
}

impl AmbiguitySet {
    /// Structural checks that do not depend on the noise law.
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::RiskNeutral => Ok(()),
            Self::CVaR { alpha } => {
                if !(*alpha > 0.0 && *alpha <= 1.0) {
                    return Err(invalid(format!("CVaR level {alpha} outside (0, 1]")));
                }
                Ok(())
            }
            Self::Box { floors, caps } => {
                if floors.len() != caps.len() {
                    return Err(invalid("box floors and caps differ in length"));
                }
                for (j, (l, c)) in floors.iter().zip(caps).enumerate() {
                    if !(l.is_finite() && c.is_finite()) || *l < 0.0 || l > c {
                        return Err(Error::InfeasibleAmbiguity(format!(
                            "atom {j}: need 0 <= floor <= cap, got [{l}, {c}]"
                        )));
                    }
                }
                Ok(())
            }
        }
    }

    /// Floors and caps for `k` atoms.
    pub fn bounds(&self, k: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        self.validate()?;
        match self {
            Self::RiskNeutral => Ok((vec![1.0; k], vec![1.0; k])),
            Self::CVaR { alpha } => Ok((vec![0.0; k], vec![1.0 / alpha; k])),
            Self::Box { floors, caps } => {
                if floors.len() != k {
                    return Err(invalid(format!("box has {} bounds for {k} noise atoms", floors.len())));
                }
                Ok((floors.clone(), caps.clone()))
            }
        }
    }

    /// Largest admissible density value.
    pub fn density_cap(&self) -> f64 {
        match self {
            Self::RiskNeutral => 1.0,
            Self::CVaR { alpha } => 1.0 / alpha,
            Self::Box { caps, .. } => caps.iter().copied().fold(0.0, f64::max),
        }
    }

    /// Smallest admissible density floor.
    pub fn density_floor(&self) -> f64 {
        match self {
            Self::RiskNeutral => 1.0,
            Self::CVaR { .. } => 0.0,
            Self::Box { floors, .. } => floors.iter().copied().fold(f64::INFINITY, f64::min),
        }
    }
}

/// `sup_Z sum_j w_j Z_j v_j` over the densities of `amb`, with the
/// maximising density.
pub fn worst_case_expectation(values: &[f64], noise: &DiscreteNoise, amb: &AmbiguitySet) -> Result<(f64, Vec<f64>)> {
    worst_case_weighted(values, noise.weights(), amb)
}

/// [`worst_case_expectation`] against explicit base weights.
///
/// Greedy fill: start from the floors and spend the remaining budget on the
/// largest values first, up to their caps. This is exact for box-with-budget
/// polytopes.
pub fn worst_case_weighted(values: &[f64], weights: &[f64], amb: &AmbiguitySet) -> Result<(f64, Vec<f64>)> {
    let k = weights.len();
    if values.len() != k {
        return Err(invalid(format!("{} values for {k} atoms", values.len())));
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(invalid(format!("non-finite cost {v}")));
    }
    let z = match amb {
        AmbiguitySet::RiskNeutral => vec![1.0; k],
        _ => {
            let (floors, caps) = amb.bounds(k)?;
            fill_density(values, weights, &floors, &caps)?
        }
    };
    let value = ordered_sum((0..k).map(|j| weights[j] * z[j] * values[j]));
    Ok((value, z))
}

fn fill_density(values: &[f64], weights: &[f64], floors: &[f64], caps: &[f64]) -> Result<Vec<f64>> {
    let low = ordered_sum(weights.iter().zip(floors).map(|(w, l)| w * l));
    let high = ordered_sum(weights.iter().zip(caps).map(|(w, c)| w * c));
    if low > 1.0 + 1e-12 || high < 1.0 - 1e-12 {
        return Err(Error::InfeasibleAmbiguity(format!(
            "density mass range [{low}, {high}] does not contain 1"
        )));
    }
    if high <= 1.0 + 1e-12 {
        return Ok(caps.to_vec());
    }
    let mut z = floors.to_vec();
    let mut budget = 1.0 - low;
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    for j in order {
        if budget <= 0.0 {
            break;
        }
        let room = (caps[j] - floors[j]) * weights[j];
        if room <= budget {
            z[j] = caps[j];
            budget -= room;
        } else {
            z[j] = floors[j] + budget / weights[j];
            budget = 0.0;
        }
    }
    Ok(z)
}

/// `Υ[u](x) = sup_Z sum_j w_j Z_j u(x + y_j)` sampled on `grid`, keeping
/// the tail slopes of `u`.
pub fn upsilon(u: &PwlConvex, noise: &DiscreteNoise, amb: &AmbiguitySet, grid: &Grid1D) -> Result<PwlConvex> {
    amb.bounds(noise.len())?;
    let values = crate::par::try_map_range(grid.n, |i| {
        let x = grid.node(i);
        let vals: Vec<f64> = noise.points().iter().map(|y| u.eval(x + y)).collect();
        worst_case_expectation(&vals, noise, amb).map(|r| r.0)
    })?;
    let tol = 1e-9 * (1.0 + values.iter().fold(0.0f64, |m, v| m.max(v.abs())));
    PwlConvex::repaired(*grid, values, u.slope_left(), u.slope_right(), tol)
}

/// Complete scenario tree: a root layer of initial atoms, then level `t`
/// branching into `level_weights[t].len()` children. Leaves are stored in
/// lexicographic path order with the root index most significant.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioTree {
    pub root_weights: Vec<f64>,
    pub level_weights: Vec<Vec<f64>>,
    pub leaves: Vec<f64>,
}

impl ScenarioTree {
    pub fn new(root_weights: Vec<f64>, level_weights: Vec<Vec<f64>>, leaves: Vec<f64>) -> Result<Self> {
        let t = Self { root_weights, level_weights, leaves };
        t.validate()?;
        Ok(t)
    }

    pub fn depth(&self) -> usize {
        self.level_weights.len()
    }

    pub fn leaf_count(&self) -> usize {
        self.level_weights.iter().fold(self.root_weights.len(), |n, l| n * l.len())
    }

    pub fn validate(&self) -> Result<()> {
        for (name, w) in std::iter::once(("root", &self.root_weights))
            .chain(self.level_weights.iter().map(|l| ("level", l)))
        {
            if w.is_empty() || w.iter().any(|x| !(*x >= 0.0) || !x.is_finite()) {
                return Err(invalid(format!("malformed {name} weights")));
            }
            let s = ordered_sum(w.iter().copied());
            if (s - 1.0).abs() > MASS_TOL {
                return Err(invalid(format!("{name} weights sum to {s}")));
            }
        }
        if self.leaves.len() != self.leaf_count() {
            return Err(invalid(format!(
                "tree expects {} leaves, got {}",
                self.leaf_count(),
                self.leaves.len()
            )));
        }
        Ok(())
    }

    /// Same tree shape with different leaf values.
    pub fn with_leaves(&self, leaves: Vec<f64>) -> Result<Self> {
        Self::new(self.root_weights.clone(), self.level_weights.clone(), leaves)
    }

    /// Plain expectation of the leaves under the base weights.
    pub fn expectation(&self) -> Result<f64> {
        composite_risk_tree(self, &vec![AmbiguitySet::RiskNeutral; self.depth()])
    }
}

/// Nested risk `E[rho_0 ∘ ... ∘ rho_{T-1}(U)]` by backward recursion: each
/// internal node takes the worst-case expectation of its children, and the
/// root layer is averaged under the initial weights.
pub fn composite_risk_tree(tree: &ScenarioTree, ambs: &[AmbiguitySet]) -> Result<f64> {
    tree.validate()?;
    if ambs.len() != tree.depth() {
        return Err(Error::HorizonMismatch { left: tree.depth(), right: ambs.len() });
    }
    let mut layer = tree.leaves.clone();
    for t in (0..tree.depth()).rev() {
        let w = &tree.level_weights[t];
        let k = w.len();
        let amb = &ambs[t];
        amb.bounds(k)?;
        let parents = layer.len() / k;
        layer = if parents >= 256 {
            crate::par::try_map_range(parents, |p| worst_case_weighted(&layer[p * k..(p + 1) * k], w, amb).map(|r| r.0))?
        } else {
            (0..parents)
                .map(|p| worst_case_weighted(&layer[p * k..(p + 1) * k], w, amb).map(|r| r.0))
                .collect::<Result<_>>()?
        };
    }
    Ok(ordered_sum(tree.root_weights.iter().zip(&layer).map(|(w, v)| w * v)))
}

/// Outcome of [`validate_ambiguity`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AmbiguityReport {
    pub ok: bool,
    pub cap_ok: bool,
    /// Whether some admissible density has floor at least `1/C`. Reported
    /// only; CVaR sets have floor 0 and still qualify.
    pub floor_ok: bool,
    pub moment_ok: bool,
    /// `sup_Z E[Z |Y|^2]`.
    pub worst_moment: f64,
    pub messages: Vec<String>,
}

/// Checks an ambiguity set against its noise law and the constant `c`:
/// feasibility, `sup Z <= C`, and `sup_Z E[Z |Y|^2] <= C E|Y|^2`.
pub fn validate_ambiguity(amb: &AmbiguitySet, noise: &DiscreteNoise, c: f64) -> AmbiguityReport {
    let mut messages = Vec::new();
    let (floors, caps) = match amb.bounds(noise.len()) {
        Ok(b) => b,
        Err(e) => {
            return AmbiguityReport {
                ok: false,
                cap_ok: false,
                floor_ok: false,
                moment_ok: false,
                worst_moment: f64::NAN,
                messages: vec![e.to_string()],
            }
        }
    };
    let sq: Vec<f64> = noise.points().iter().map(|y| y * y).collect();
    let worst_moment = match worst_case_expectation(&sq, noise, amb) {
        Ok((v, _)) => v,
        Err(e) => {
            messages.push(e.to_string());
            f64::NAN
        }
    };
    let max_cap = caps.iter().copied().fold(0.0, f64::max);
    let cap_ok = max_cap <= c;
    if !cap_ok {
        let j = caps.iter().position(|&x| x == max_cap).unwrap_or(0);
        messages.push(format!("density cap {max_cap} at atom {j} exceeds C = {c}"));
    }
    // Z = 1 is admissible whenever floors <= 1 <= caps, and satisfies the
    // floor requirement when C >= 1.
    let unit_ok = floors.iter().zip(&caps).all(|(l, u)| *l <= 1.0 && *u >= 1.0);
    let floor_ok = floors.iter().all(|&l| l >= 1.0 / c) || (unit_ok && c >= 1.0);
    if !floor_ok {
        messages.push(format!("no admissible density with floor 1/C = {}", 1.0 / c));
    }
    let moment_ok = worst_moment.is_finite() && worst_moment <= c * noise.moment(2.0) * (1.0 + 1e-12) + 1e-300;
    if !moment_ok {
        messages.push(format!("worst-case second moment {worst_moment} exceeds C E|Y|^2"));
    }
    AmbiguityReport { ok: cap_ok && moment_ok, cap_ok, floor_ok, moment_ok, worst_moment, messages }
}

/// Product over levels of the density caps; the two-sided constant relating
/// nested risk of a nonnegative cost to its expectation.
pub fn cap_product(ambs: &[AmbiguitySet]) -> f64 {
    ambs.iter().map(AmbiguitySet::density_cap).product()
}

/// Product over levels of the density floors.
pub fn floor_product(ambs: &[AmbiguitySet]) -> f64 {
    ambs.iter().map(AmbiguitySet::density_floor).product()
}
