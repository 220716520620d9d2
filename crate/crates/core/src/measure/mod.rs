//! Discrete probability measures on a uniform 1-D grid and on point clouds.

pub(crate) mod emd;
mod ops;
mod wasserstein;

pub use emd::{emd_capped, emd_small, stratified_subsample, DistanceOptions};
pub use ops::{convolve, mean_1d, mix_atoms, mix_grid, pushforward, rebin, sample, sample_with, Rebinned};
pub use wasserstein::wasserstein1_1d;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::par::ordered_sum;

/// Tolerance on total mass of a probability measure.
pub const MASS_TOL: f64 = 1e-12;

/// Uniform grid `x_min = x_0 < x_1 < ... < x_{n-1} = x_max`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid1D {
    pub x_min: f64,
    pub x_max: f64,
    pub n: usize,
}

/// Position of a point relative to a grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Located {
    Below,
    Above,
    /// `x = (1 - frac) x_cell + frac x_{cell+1}` with `frac` in `[0, 1]`.
    Inside { cell: usize, frac: f64 },
}

impl Grid1D {
    pub fn new(x_min: f64, x_max: f64, n: usize) -> Result<Self> {
        let g = Self { x_min, x_max, n };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.x_min.is_finite() && self.x_max.is_finite()) || self.x_min >= self.x_max {
            return Err(invalid(format!(
                "grid bounds must satisfy x_min < x_max, got [{}, {}]",
                self.x_min, self.x_max
            )));
        }
        if self.n < 2 {
            return Err(invalid(format!("grid needs at least 2 nodes, got {}", self.n)));
        }
        Ok(())
    }

    #[inline]
    pub fn h(&self) -> f64 {
        (self.x_max - self.x_min) / (self.n - 1) as f64
    }

    #[inline]
    pub fn node(&self, i: usize) -> f64 {
        if i + 1 == self.n {
            self.x_max
        } else {
            self.x_min + i as f64 * self.h()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.node(i)).collect()
    }

    /// Grid with half the spacing on the same window; node `i` of `self` is
    /// node `2i` of the result.
    pub fn refined(&self) -> Self {
        Self { n: 2 * self.n - 1, ..*self }
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.x_min && x <= self.x_max
    }

    pub fn locate(&self, x: f64) -> Located {
        if x < self.x_min {
            return Located::Below;
        }
        if x > self.x_max {
            return Located::Above;
        }
        let h = self.h();
        let last = self.n - 2;
        let cell = (((x - self.x_min) / h).floor() as usize).min(last);
        let left = self.node(cell);
        let right = self.node(cell + 1);
        let frac = if x == left {
            0.0
        } else if x == right {
            1.0
        } else {
            ((x - left) / (right - left)).clamp(0.0, 1.0)
        };
        Located::Inside { cell, frac }
    }

    /// Linear interpolation of node values, linear extrapolation with the
    /// given end slopes outside the window.
    pub fn interpolate(&self, values: &[f64], slope_left: f64, slope_right: f64, x: f64) -> f64 {
        debug_assert_eq!(values.len(), self.n);
        match self.locate(x) {
            Located::Below => values[0] + slope_left * (x - self.x_min),
            Located::Above => values[self.n - 1] + slope_right * (x - self.x_max),
            Located::Inside { cell, frac } => {
                if frac == 0.0 {
                    values[cell]
                } else if frac == 1.0 {
                    values[cell + 1]
                } else {
                    (1.0 - frac) * values[cell] + frac * values[cell + 1]
                }
            }
        }
    }
}

fn check_weights(weights: &[f64]) -> Result<()> {
    if weights.is_empty() {
        return Err(invalid("measure has no atoms"));
    }
    for (i, &w) in weights.iter().enumerate() {
        if !w.is_finite() || w < 0.0 {
            return Err(invalid(format!("weight {i} is {w}; weights must be finite and nonnegative")));
        }
    }
    let total = ordered_sum(weights.iter().copied());
    if (total - 1.0).abs() > MASS_TOL {
        return Err(invalid(format!("weights sum to {total}, expected 1")));
    }
    Ok(())
}

/// Probability measure carried by the nodes of a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct GridMeasure {
    grid: Grid1D,
    weights: Vec<f64>,
}

impl GridMeasure {
    pub fn new(grid: Grid1D, weights: Vec<f64>) -> Result<Self> {
        grid.validate()?;
        if weights.len() != grid.n {
            return Err(invalid(format!(
                "grid has {} nodes but {} weights were given",
                grid.n,
                weights.len()
            )));
        }
        check_weights(&weights)?;
        Ok(Self { grid, weights })
    }

    /// Dirac mass at node `i`.
    pub fn dirac(grid: Grid1D, i: usize) -> Result<Self> {
        if i >= grid.n {
            return Err(invalid(format!("node index {i} out of range")));
        }
        let mut w = vec![0.0; grid.n];
        w[i] = 1.0;
        Self::new(grid, w)
    }

    /// Uniform weights on all nodes.
    pub fn uniform(grid: Grid1D) -> Result<Self> {
        let w = vec![1.0 / grid.n as f64; grid.n];
        Self::new(grid, w)
    }

    /// Normalises nonnegative node weights (e.g. a sampled density).
    pub fn from_unnormalized(grid: Grid1D, mut weights: Vec<f64>) -> Result<Self> {
        let total = ordered_sum(weights.iter().copied());
        if !(total > 0.0) || !total.is_finite() {
            return Err(invalid("weights must have positive finite total"));
        }
        for w in &mut weights {
            *w /= total;
        }
        Self::new(grid, weights)
    }

    /// Gaussian density sampled at the nodes and normalised.
    pub fn discretized_gaussian(grid: Grid1D, mean: f64, std: f64) -> Result<Self> {
        if !(std > 0.0) {
            return Err(invalid("gaussian std must be positive"));
        }
        let w = grid
            .nodes()
            .iter()
            .map(|&x| (-0.5 * ((x - mean) / std).powi(2)).exp())
            .collect();
        Self::from_unnormalized(grid, w)
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total_mass(&self) -> f64 {
        ordered_sum(self.weights.iter().copied())
    }

    pub fn mean(&self) -> f64 {
        ordered_sum(self.weights.iter().enumerate().map(|(i, w)| w * self.grid.node(i)))
    }

    /// `sum_i w_i |x_i|^p`.
    pub fn moment(&self, p: f64) -> f64 {
        ordered_sum(
            self.weights
                .iter()
                .enumerate()
                .map(|(i, w)| w * self.grid.node(i).abs().powf(p)),
        )
    }

    /// Integral of a function given by its node values.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        ordered_sum(self.weights.iter().zip(values).map(|(w, v)| w * v))
    }

    /// Atom cloud with one atom per node (zero-weight nodes included).
    pub fn to_atoms(&self) -> AtomMeasure {
        AtomMeasure {
            dim: 1,
            coords: self.grid.nodes(),
            weights: self.weights.clone(),
        }
    }

    /// Smallest node index whose cumulative weight reaches `u`.
    pub fn quantile_index(&self, cdf: &[f64], u: f64) -> usize {
        let idx = cdf.partition_point(|&c| c < u);
        let mut i = idx.min(self.grid.n - 1);
        // never land on a zero-weight node
        while i > 0 && self.weights[i] == 0.0 {
            i -= 1;
        }
        while self.weights[i] == 0.0 && i + 1 < self.grid.n {
            i += 1;
        }
        i
    }

    pub fn cdf(&self) -> Vec<f64> {
        let mut acc = 0.0;
        self.weights
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect()
    }
}

/// Finite weighted point cloud in `R^dim`, `dim` in {1, 2, 3}.
#[derive(Clone, Debug, PartialEq)]
pub struct AtomMeasure {
    dim: usize,
    coords: Vec<f64>,
    weights: Vec<f64>,
}

impl AtomMeasure {
    /// `coords` is row-major: atom `i` occupies `coords[i*dim..(i+1)*dim]`.
    pub fn new(dim: usize, coords: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        let m = Self::unchecked(dim, coords, weights)?;
        check_weights(&m.weights)?;
        Ok(m)
    }

    fn unchecked(dim: usize, coords: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(invalid(format!("atom dimension must be 1, 2 or 3, got {dim}")));
        }
        if coords.len() != dim * weights.len() {
            return Err(invalid("coordinate count does not match weights"));
        }
        if let Some(c) = coords.iter().find(|c| !c.is_finite()) {
            return Err(invalid(format!("non-finite atom coordinate {c}")));
        }
        Ok(Self { dim, coords, weights })
    }

    pub fn from_pairs_1d(pairs: &[(f64, f64)]) -> Result<Self> {
        Self::new(1, pairs.iter().map(|p| p.0).collect(), pairs.iter().map(|p| p.1).collect())
    }

    pub fn dirac(point: &[f64]) -> Result<Self> {
        Self::new(point.len(), point.to_vec(), vec![1.0])
    }

    /// Empirical measure `1/N sum delta_{x_i}` (duplicates kept).
    pub fn empirical(dim: usize, coords: Vec<f64>) -> Result<Self> {
        let n = coords.len() / dim.max(1);
        if n == 0 {
            return Err(invalid("empirical measure needs at least one point"));
        }
        Self::new(dim, coords, vec![1.0 / n as f64; n])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        self.coords.chunks_exact(self.dim).zip(self.weights.iter().copied())
    }

    pub fn total_mass(&self) -> f64 {
        ordered_sum(self.weights.iter().copied())
    }

    /// Weighted mean of coordinate `k`.
    pub fn mean_component(&self, k: usize) -> f64 {
        assert!(k < self.dim);
        ordered_sum(self.iter().map(|(p, w)| w * p[k]))
    }

    /// `sum_i w_i |x_i|^p` with the Euclidean norm.
    pub fn moment(&self, p: f64) -> f64 {
        ordered_sum(self.iter().map(|(x, w)| {
            let r2: f64 = x.iter().map(|c| c * c).sum();
            w * r2.sqrt().powf(p)
        }))
    }

    /// Sorts atoms lexicographically, merges exact duplicates and drops
    /// zero-weight atoms. The represented measure is unchanged.
    pub fn compacted(&self) -> Self {
        let mut order: Vec<usize> = (0..self.len()).filter(|&i| self.weights[i] > 0.0).collect();
        order.sort_by(|&a, &b| lex_cmp(self.point(a), self.point(b)).then(a.cmp(&b)));
        let mut coords = Vec::with_capacity(order.len() * self.dim);
        let mut weights: Vec<f64> = Vec::with_capacity(order.len());
        let mut last: Option<usize> = None;
        for i in order {
            match last {
                Some(j) if self.point(j) == self.point(i) => {
                    *weights.last_mut().expect("nonempty") += self.weights[i];
                }
                _ => {
                    coords.extend_from_slice(self.point(i));
                    weights.push(self.weights[i]);
                }
            }
            last = Some(i);
        }
        Self { dim: self.dim, coords, weights }
    }

    /// Projection on coordinate `k` as a 1-D cloud.
    pub fn marginal(&self, k: usize) -> Self {
        assert!(k < self.dim);
        Self {
            dim: 1,
            coords: self.coords.chunks_exact(self.dim).map(|p| p[k]).collect(),
            weights: self.weights.clone(),
        }
    }
}

pub(crate) fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Equal => continue,
            o => return o,
        }
    }
    std::cmp::Ordering::Equal
}

/// One-dimensional law exposed as sorted-or-unsorted `(point, weight)` atoms.
pub trait Law1D {
    fn atoms_1d(&self) -> Vec<(f64, f64)>;
}

impl Law1D for GridMeasure {
    fn atoms_1d(&self) -> Vec<(f64, f64)> {
        self.weights
            .iter()
            .enumerate()
            .map(|(i, &w)| (self.grid.node(i), w))
            .collect()
    }
}

impl Law1D for AtomMeasure {
    fn atoms_1d(&self) -> Vec<(f64, f64)> {
        assert_eq!(self.dim, 1, "1-D law required");
        self.coords.iter().copied().zip(self.weights.iter().copied()).collect()
    }
}

/// Belief `(mu(0), ..., mu(T-1), m(T))`: joint state-action laws per period
/// and the terminal state law.
#[derive(Clone, Debug, PartialEq)]
pub struct Belief {
    pub joints: Vec<AtomMeasure>,
    pub terminal: AtomMeasure,
}

impl Belief {
    pub fn new(joints: Vec<AtomMeasure>, terminal: AtomMeasure) -> Result<Self> {
        if joints.iter().any(|j| j.dim() != 2) {
            return Err(invalid("joint belief components must be 2-D"));
        }
        if terminal.dim() != 1 {
            return Err(invalid("terminal belief component must be 1-D"));
        }
        Ok(Self { joints, terminal })
    }

    pub fn horizon(&self) -> usize {
        self.joints.len()
    }

    /// Mean state at period `t` (`t == T` reads the terminal law).
    pub fn mean_state(&self, t: usize) -> f64 {
        if t == self.horizon() {
            self.terminal.mean_component(0)
        } else {
            self.joints[t].mean_component(0)
        }
    }

    /// Mean action at period `t < T`.
    pub fn mean_action(&self, t: usize) -> f64 {
        self.joints[t].mean_component(1)
    }

    /// Largest second moment over all components.
    pub fn max_second_moment(&self) -> f64 {
        self.joints
            .iter()
            .map(|j| j.moment(2.0))
            .chain(std::iter::once(self.terminal.moment(2.0)))
            .fold(0.0, f64::max)
    }

    /// Checks every component against the moment cap `c_b`.
    pub fn check_moment_cap(&self, c_b: f64) -> Result<()> {
        for (t, j) in self.joints.iter().enumerate() {
            let m = j.moment(2.0);
            if m > c_b {
                return Err(Error::MomentCap { what: format!("mu({t})"), moment: m, cap: c_b });
            }
        }
        let m = self.terminal.moment(2.0);
        if m > c_b {
            return Err(Error::MomentCap { what: "m(T)".into(), moment: m, cap: c_b });
        }
        Ok(())
    }

    /// Component-wise compaction (see [`AtomMeasure::compacted`]).
    pub fn compacted(&self) -> Self {
        Self {
            joints: self.joints.iter().map(AtomMeasure::compacted).collect(),
            terminal: self.terminal.compacted(),
        }
    }
}

/// `sum_t W1(mu_1(t), mu_2(t)) + W1(m_1(T), m_2(T))`.
///
/// Joint components whose combined support exceeds `opts.cap` are compared
/// on stratified subsamples (see [`emd_capped`]).
pub fn belief_distance(b1: &Belief, b2: &Belief, opts: &DistanceOptions) -> Result<f64> {
    belief_distance_parts(b1, b2, opts).map(|parts| ordered_sum(parts))
}

/// Per-component distances; the last entry is the terminal one.
pub fn belief_distance_parts(b1: &Belief, b2: &Belief, opts: &DistanceOptions) -> Result<Vec<f64>> {
    if b1.horizon() != b2.horizon() {
        return Err(Error::HorizonMismatch { left: b1.horizon(), right: b2.horizon() });
    }
    let t_len = b1.horizon();
    let mut parts = crate::par::try_map_range(t_len, |t| {
        emd_capped(&b1.joints[t], &b2.joints[t], opts.cap, opts.component_seed(t))
    })?;
    parts.push(wasserstein1_1d(&b1.terminal, &b2.terminal));
    Ok(parts)
}
