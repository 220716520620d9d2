use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{AtomMeasure, Grid1D, GridMeasure, Law1D, Located};
use crate::error::{invalid, Error, Result};
use crate::par::ordered_sum;

/// Image measure `g # m` for a map sampled at the nodes of `m`.
pub fn pushforward(m: &GridMeasure, g: &[f64]) -> Result<AtomMeasure> {
    if g.len() != m.grid().n {
        return Err(invalid(format!("map has {} samples, grid has {} nodes", g.len(), m.grid().n)));
    }
    if let Some(i) = g.iter().position(|v| !v.is_finite()) {
        return Err(invalid(format!("map value at node {i} is not finite")));
    }
    AtomMeasure::new(1, g.to_vec(), m.weights().to_vec())
}

/// Convolution `noise * m` as the product atom set `{(x_i + y_j, w_i v_j)}`.
///
/// Atoms are emitted in `(i, j)` order without merging.
pub fn convolve(m: &AtomMeasure, noise: &impl Law1D) -> Result<AtomMeasure> {
    if m.dim() != 1 {
        return Err(invalid("convolution needs a 1-D measure"));
    }
    let ys = noise.atoms_1d();
    let mut coords = Vec::with_capacity(m.len() * ys.len());
    let mut weights = Vec::with_capacity(m.len() * ys.len());
    for (x, w) in m.iter() {
        for &(y, v) in &ys {
            coords.push(x[0] + y);
            weights.push(w * v);
        }
    }
    AtomMeasure::new(1, coords, weights)
}

/// Result of projecting an atom cloud onto a grid.
#[derive(Clone, Debug)]
pub struct Rebinned {
    pub measure: GridMeasure,
    /// Mass of atoms that fell outside the grid window and were clamped to
    /// the nearest end node.
    pub clamped: f64,
}

/// Splits each atom between its two bracketing nodes so that mass and first
/// moment are preserved. Atoms outside the window go to the nearest end
/// node; if their total mass exceeds `threshold` the grid is rejected.
pub fn rebin(a: &AtomMeasure, grid: &Grid1D, threshold: f64) -> Result<Rebinned> {
    if a.dim() != 1 {
        return Err(invalid("rebinning needs a 1-D measure"));
    }
    let mut w = vec![0.0; grid.n];
    let mut clamped = 0.0;
    for (x, mass) in a.iter() {
        match grid.locate(x[0]) {
            Located::Below => {
                w[0] += mass;
                clamped += mass;
            }
            Located::Above => {
                w[grid.n - 1] += mass;
                clamped += mass;
            }
            Located::Inside { cell, frac } => {
                if frac == 0.0 {
                    w[cell] += mass;
                } else if frac == 1.0 {
                    w[cell + 1] += mass;
                } else {
                    let right = mass * frac;
                    w[cell] += mass - right;
                    w[cell + 1] += right;
                }
            }
        }
    }
    if clamped > threshold {
        return Err(Error::GridTooSmall { clamped, threshold });
    }
    Ok(Rebinned { measure: GridMeasure::new(*grid, w)?, clamped })
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(invalid(format!("mixing weight {lambda} outside [0, 1]")));
    }
    Ok(())
}

/// `(1 - lambda) p + lambda q` on a common grid.
pub fn mix_grid(p: &GridMeasure, q: &GridMeasure, lambda: f64) -> Result<GridMeasure> {
    check_lambda(lambda)?;
    if p.grid() != q.grid() {
        return Err(invalid("mixing measures on different grids"));
    }
    if lambda == 0.0 {
        return Ok(p.clone());
    }
    if lambda == 1.0 {
        return Ok(q.clone());
    }
    let w = p
        .weights()
        .iter()
        .zip(q.weights())
        .map(|(a, b)| (1.0 - lambda) * a + lambda * b)
        .collect();
    GridMeasure::new(*p.grid(), w)
}

/// `(1 - lambda) p + lambda q` for atom clouds, by weight union followed by
/// compaction. The endpoints return the inputs unchanged.
pub fn mix_atoms(p: &AtomMeasure, q: &AtomMeasure, lambda: f64) -> Result<AtomMeasure> {
    check_lambda(lambda)?;
    if p.dim() != q.dim() {
        return Err(invalid("mixing atom measures of different dimension"));
    }
    if lambda == 0.0 {
        return Ok(p.clone());
    }
    if lambda == 1.0 {
        return Ok(q.clone());
    }
    let mut coords = p.coords().to_vec();
    coords.extend_from_slice(q.coords());
    let weights = p
        .weights()
        .iter()
        .map(|w| (1.0 - lambda) * w)
        .chain(q.weights().iter().map(|w| lambda * w))
        .collect();
    Ok(AtomMeasure::new(p.dim(), coords, weights)?.compacted())
}

/// `n` i.i.d. draws from `m` by inverse CDF, reproducible from `seed`.
pub fn sample(m: &GridMeasure, seed: u64, n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_with(m, &m.cdf(), &mut rng, n)
}

/// Inverse-CDF draws using a caller-provided generator and precomputed CDF.
pub fn sample_with<R: Rng>(m: &GridMeasure, cdf: &[f64], rng: &mut R, n: usize) -> Vec<f64> {
    let total = *cdf.last().expect("grid has nodes");
    (0..n)
        .map(|_| {
            let u: f64 = rng.random::<f64>() * total;
            m.grid().node(m.quantile_index(cdf, u))
        })
        .collect()
}

/// Exact mean of a 1-D law.
pub fn mean_1d(law: &impl Law1D) -> f64 {
    ordered_sum(law.atoms_1d().into_iter().map(|(x, w)| x * w))
}
