//! Moment-matched discretisation of continuous noise laws by Gauss
//! quadrature (Golub–Welsch).

use nalgebra::{DMatrix, SymmetricEigen};

/// `k` nodes and weights exact for polynomials up to degree `2k - 1` under
/// the symmetric Jacobi matrix with off-diagonal `beta`.
fn golub_welsch(beta: &[f64]) -> Vec<(f64, f64)> {
    let k = beta.len() + 1;
    let mut j = DMatrix::zeros(k, k);
    for (i, &b) in beta.iter().enumerate() {
        j[(i, i + 1)] = b;
        j[(i + 1, i)] = b;
    }
    let eig = SymmetricEigen::new(j);
    let mut out: Vec<(f64, f64)> =
        (0..k).map(|i| (eig.eigenvalues[i], eig.eigenvectors[(0, i)].powi(2))).collect();
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = out.iter().map(|p| p.1).sum();
    out.iter_mut().for_each(|p| p.1 /= total);
    // exact symmetry of the reference laws
    for i in 0..k / 2 {
        let (x, w) = ((out[k - 1 - i].0 - out[i].0) / 2.0, (out[i].1 + out[k - 1 - i].1) / 2.0);
        out[i] = (-x, w);
        out[k - 1 - i] = (x, w);
    }
    if k % 2 == 1 {
        out[k / 2].0 = 0.0;
    }
    out
}

pub fn gaussian(k: usize, mean: f64, std: f64) -> Vec<(f64, f64)> {
    let beta: Vec<f64> = (1..k).map(|i| (i as f64).sqrt()).collect();
    golub_welsch(&beta).into_iter().map(|(x, w)| (mean + std * x, w)).collect()
}

pub fn uniform(k: usize, low: f64, high: f64) -> Vec<(f64, f64)> {
    let beta: Vec<f64> = (1..k)
        .map(|i| {
            let i = i as f64;
            i / (4.0 * i * i - 1.0).sqrt()
        })
        .collect();
    let (mid, half) = ((low + high) / 2.0, (high - low) / 2.0);
    golub_welsch(&beta).into_iter().map(|(x, w)| (mid + half * x, w)).collect()
}
