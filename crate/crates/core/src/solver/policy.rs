use crate::error::{invalid, Result};
use crate::measure::Grid1D;

/// Feedback `alpha_t` sampled at grid nodes, interpolated linearly inside
/// the window and extended with the end chords outside.
#[derive(Clone, Debug, PartialEq)]
pub struct Policy {
    grid: Grid1D,
    maps: Vec<Vec<f64>>,
}

impl Policy {
    pub fn new(grid: Grid1D, maps: Vec<Vec<f64>>) -> Result<Self> {
        if maps.is_empty() {
            return Err(invalid("policy needs at least one period"));
        }
        for (t, m) in maps.iter().enumerate() {
            if m.len() != grid.n {
                return Err(invalid(format!("policy period {t} has {} values for {} nodes", m.len(), grid.n)));
            }
            if m.iter().any(|v| !v.is_finite()) {
                return Err(invalid(format!("policy period {t} has non-finite values")));
            }
        }
        Ok(Self { grid, maps })
    }

    /// `alpha_t = 0` for every period.
    pub fn zero(grid: Grid1D, horizon: usize) -> Self {
        Self { grid, maps: vec![vec![0.0; grid.n]; horizon] }
    }

    /// `alpha_t = c` for every period.
    pub fn constant(grid: Grid1D, horizon: usize, c: f64) -> Self {
        Self { grid, maps: vec![vec![c; grid.n]; horizon] }
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn horizon(&self) -> usize {
        self.maps.len()
    }

    /// Node values of `alpha_t`.
    pub fn nodes(&self, t: usize) -> &[f64] {
        &self.maps[t]
    }

    fn end_slopes(&self, t: usize) -> (f64, f64) {
        let m = &self.maps[t];
        let h = self.grid.h();
        let n = m.len();
        ((m[1] - m[0]) / h, (m[n - 1] - m[n - 2]) / h)
    }

    pub fn eval(&self, t: usize, x: f64) -> f64 {
        let (sl, sr) = self.end_slopes(t);
        self.grid.interpolate(&self.maps[t], sl, sr, x)
    }

    /// Largest absolute chord slope over all periods. Optimal feedbacks
    /// satisfy this `<= 1`.
    pub fn lipschitz_constant(&self) -> f64 {
        let h = self.grid.h();
        self.maps
            .iter()
            .flat_map(|m| m.windows(2).map(move |w| ((w[1] - w[0]) / h).abs()))
            .fold(0.0, f64::max)
    }

    /// Whether every period is 1-Lipschitz up to `1e-9`.
    pub fn is_one_lipschitz(&self) -> bool {
        self.lipschitz_constant() <= 1.0 + 1e-9
    }

    /// Smallest `c` with `|alpha_t(x)| <= c (1 + |x|)` over all nodes and
    /// periods. Tails grow at most like the end chords, which are included.
    pub fn growth_constant(&self) -> f64 {
        let mut c = 0.0f64;
        for t in 0..self.horizon() {
            for (i, v) in self.maps[t].iter().enumerate() {
                c = c.max(v.abs() / (1.0 + self.grid.node(i).abs()));
            }
            let (sl, sr) = self.end_slopes(t);
            c = c.max(sl.abs()).max(sr.abs());
        }
        c
    }

    /// Adds `delta[t][i]` to every node value.
    pub fn perturbed(&self, delta: &[Vec<f64>]) -> Result<Self> {
        if delta.len() != self.maps.len() {
            return Err(invalid("perturbation horizon mismatch"));
        }
        let maps = self
            .maps
            .iter()
            .zip(delta)
            .map(|(m, d)| m.iter().zip(d).map(|(a, b)| a + b).collect())
            .collect();
        Self::new(self.grid, maps)
    }
}
