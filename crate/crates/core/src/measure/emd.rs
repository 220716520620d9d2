//! Exact Wasserstein-1 between small atom clouds via the transportation
//! simplex, with stratified subsampling for larger supports.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::AtomMeasure;
use crate::error::{invalid, Error, Result};
use crate::par::ordered_sum;

/// Settings for distances between joint state-action measures.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DistanceOptions {
    /// Largest combined support solved exactly.
    pub cap: usize,
    /// Seed for subsampling when the cap is exceeded.
    pub seed: u64,
}

impl Default for DistanceOptions {
    fn default() -> Self {
        Self { cap: 512, seed: 0x5eed }
    }
}

impl DistanceOptions {
    /// Seed used for component `t`.
    pub fn component_seed(&self, t: usize) -> u64 {
        splitmix(self.seed ^ splitmix(t as u64 + 1))
    }
}

pub(crate) fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce5_e4b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    match a.len() {
        1 => (a[0] - b[0]).abs(),
        _ => a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt(),
    }
}

/// Exact W1 with Euclidean ground cost.
///
/// Zero-weight atoms are dropped and duplicates merged first; the combined
/// remaining support must not exceed `cap`.
pub fn emd_small(p: &AtomMeasure, q: &AtomMeasure, cap: usize) -> Result<f64> {
    if p.dim() != q.dim() {
        return Err(invalid("transport between measures of different dimension"));
    }
    let p = p.compacted();
    let q = q.compacted();
    let size = p.len() + q.len();
    if size > cap {
        return Err(Error::SupportCap { size, cap });
    }
    solve_compacted(&p, &q)
}

fn solve_compacted(p: &AtomMeasure, q: &AtomMeasure) -> Result<f64> {
    if p.len() == 1 || q.len() == 1 {
        let (one, many) = if p.len() == 1 { (p, q) } else { (q, p) };
        let x = one.point(0);
        return Ok(ordered_sum(many.iter().map(|(y, w)| w * euclid(x, y))));
    }
    let n = p.len();
    let m = q.len();
    let mut cost = Vec::with_capacity(n * m);
    for i in 0..n {
        for j in 0..m {
            cost.push(euclid(p.point(i), q.point(j)));
        }
    }
    let mut tp = Transport::northwest(p.weights(), q.weights(), cost);
    tp.optimise()?;
    Ok(tp.objective())
}

const NONE: usize = usize::MAX;

/// Transportation problem in basis form. Rows are supply nodes `0..n`,
/// columns are demand nodes `n..n+m` in the tree numbering.
struct Transport {
    n: usize,
    m: usize,
    cost: Vec<f64>,
    /// Basic cells as `(row, col)`; always exactly `n + m - 1` entries that
    /// form a spanning tree of the bipartite graph.
    cells: Vec<(usize, usize)>,
    flow: Vec<f64>,
    /// For each tree node, the basis slots touching it.
    adj: Vec<Vec<usize>>,
    cursor: usize,
}

impl Transport {
    fn northwest(a: &[f64], b: &[f64], cost: Vec<f64>) -> Self {
        let (n, m) = (a.len(), b.len());
        let mut cells = Vec::with_capacity(n + m - 1);
        let mut flow = Vec::with_capacity(n + m - 1);
        let (mut i, mut j) = (0, 0);
        let (mut ra, mut rb) = (a[0], b[0]);
        loop {
            let x = ra.min(rb).max(0.0);
            cells.push((i, j));
            flow.push(x);
            ra -= x;
            rb -= x;
            if i == n - 1 && j == m - 1 {
                break;
            }
            if j == m - 1 || (i < n - 1 && ra <= rb) {
                i += 1;
                ra = a[i];
            } else {
                j += 1;
                rb = b[j];
            }
        }
        let mut adj = vec![Vec::new(); n + m];
        for (k, &(r, c)) in cells.iter().enumerate() {
            adj[r].push(k);
            adj[n + c].push(k);
        }
        Self { n, m, cost, cells, flow, adj, cursor: 0 }
    }

    fn objective(&self) -> f64 {
        ordered_sum(
            self.cells
                .iter()
                .zip(&self.flow)
                .map(|(&(r, c), &f)| f * self.cost[r * self.m + c]),
        )
    }

    fn other_end(&self, slot: usize, node: usize) -> usize {
        let (r, c) = self.cells[slot];
        if node == r {
            self.n + c
        } else {
            r
        }
    }

    /// Dual potentials with `u_0 = 0`, from a traversal of the basis tree.
    fn potentials(&self, u: &mut [f64], v: &mut [f64], stack: &mut Vec<usize>, seen: &mut [bool]) {
        seen.iter_mut().for_each(|s| *s = false);
        stack.clear();
        u[0] = 0.0;
        seen[0] = true;
        stack.push(0);
        while let Some(node) = stack.pop() {
            for &slot in &self.adj[node] {
                let next = self.other_end(slot, node);
                if seen[next] {
                    continue;
                }
                seen[next] = true;
                let (r, c) = self.cells[slot];
                let cst = self.cost[r * self.m + c];
                if next >= self.n {
                    v[next - self.n] = cst - u[r];
                } else {
                    u[next] = cst - v[c];
                }
                stack.push(next);
            }
        }
    }

    /// Most negative reduced cost within the first block (scanning from the
    /// cursor) that contains any candidate. `None` when optimal.
    fn price(&mut self, u: &[f64], v: &[f64], eps: f64) -> Option<(usize, usize)> {
        let total = self.n * self.m;
        let block = ((total as f64).sqrt() as usize).max(self.n + self.m).min(total);
        let mut scanned = 0;
        let mut best: Option<(usize, f64)> = None;
        while scanned < total {
            let end = (scanned + block).min(total);
            for _ in scanned..end {
                let k = self.cursor;
                self.cursor = if self.cursor + 1 == total { 0 } else { self.cursor + 1 };
                let (r, c) = (k / self.m, k % self.m);
                let red = self.cost[k] - u[r] - v[c];
                if red < -eps && best.is_none_or(|(_, b)| red < b) {
                    best = Some((k, red));
                }
            }
            scanned = end;
            if best.is_some() {
                break;
            }
        }
        best.map(|(k, _)| (k / self.m, k % self.m))
    }

    /// Basis slots on the tree path from row `r` to column `c`.
    fn path(&self, r: usize, c: usize, parent: &mut [usize], stack: &mut Vec<usize>) -> Vec<usize> {
        parent.iter_mut().for_each(|p| *p = NONE);
        let target = self.n + c;
        stack.clear();
        stack.push(r);
        parent[r] = NONE - 1;
        while let Some(node) = stack.pop() {
            if node == target {
                break;
            }
            for &slot in &self.adj[node] {
                let next = self.other_end(slot, node);
                if parent[next] == NONE {
                    parent[next] = slot;
                    stack.push(next);
                }
            }
        }
        let mut path = Vec::new();
        let mut node = target;
        while node != r {
            let slot = parent[node];
            path.push(slot);
            node = self.other_end(slot, node);
        }
        path.reverse();
        path
    }

    fn optimise(&mut self) -> Result<()> {
        let max_cost = self.cost.iter().copied().fold(0.0, f64::max);
        let eps = 1e-12 * (1.0 + max_cost);
        let nodes = self.n + self.m;
        let limit = 200 * nodes * nodes;
        let mut u = vec![0.0; self.n];
        let mut v = vec![0.0; self.m];
        let mut stack = Vec::with_capacity(nodes);
        let mut seen = vec![false; nodes];
        let mut parent = vec![NONE; nodes];
        for _ in 0..limit {
            self.potentials(&mut u, &mut v, &mut stack, &mut seen);
            let Some((r, c)) = self.price(&u, &v, eps) else {
                return Ok(());
            };
            let path = self.path(r, c, &mut parent, &mut stack);
            // cells at even path positions lose flow, odd ones gain
            let mut leave = path[0];
            for &slot in path.iter().step_by(2) {
                if self.flow[slot] < self.flow[leave] {
                    leave = slot;
                }
            }
            let theta = self.flow[leave];
            for (pos, &slot) in path.iter().enumerate() {
                if pos % 2 == 0 {
                    self.flow[slot] = (self.flow[slot] - theta).max(0.0);
                } else {
                    self.flow[slot] += theta;
                }
            }
            let (lr, lc) = self.cells[leave];
            self.adj[lr].retain(|&s| s != leave);
            self.adj[self.n + lc].retain(|&s| s != leave);
            self.cells[leave] = (r, c);
            self.flow[leave] = theta;
            self.adj[r].push(leave);
            self.adj[self.n + c].push(leave);
        }
        Err(Error::TransportStalled(limit))
    }
}

/// Stratified subsample of `a` in lexicographic atom order: one atom per
/// uniform `u_k` (the smallest atom whose cumulative weight exceeds `u_k`),
/// each with weight `1/len(uniforms)`.
pub fn stratified_subsample(a: &AtomMeasure, uniforms: &[f64]) -> Result<AtomMeasure> {
    let a = a.compacted();
    let mut cdf = Vec::with_capacity(a.len());
    let mut acc = 0.0;
    for &w in a.weights() {
        acc += w;
        cdf.push(acc);
    }
    let total = acc;
    let mut coords = Vec::with_capacity(uniforms.len() * a.dim());
    for &u in uniforms {
        let idx = cdf.partition_point(|&c| c <= u * total).min(a.len() - 1);
        coords.extend_from_slice(a.point(idx));
    }
    Ok(AtomMeasure::empirical(a.dim(), coords)?.compacted())
}

/// W1 with Euclidean cost, solved exactly when the combined support fits
/// `cap` and on stratified subsamples otherwise.
///
/// Above the cap both sides are replaced by `cap / 2` strata drawn with the
/// same jittered uniforms in lexicographic atom order. Two measures with
/// equal lexicographic quantiles therefore get identical subsamples, and
/// the estimate tracks the quantile-coupling cost instead of carrying a
/// sampling floor.
pub fn emd_capped(p: &AtomMeasure, q: &AtomMeasure, cap: usize, seed: u64) -> Result<f64> {
    if p.dim() != q.dim() {
        return Err(invalid("transport between measures of different dimension"));
    }
    if cap < 4 {
        return Err(invalid(format!("support cap {cap} too small")));
    }
    let p = p.compacted();
    let q = q.compacted();
    if p.len() + q.len() <= cap {
        return solve_compacted(&p, &q);
    }
    let half = cap / 2;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let uniforms: Vec<f64> = (0..half).map(|k| (k as f64 + rng.random::<f64>()) / half as f64).collect();
    let ps = stratified_subsample(&p, &uniforms)?;
    let qs = stratified_subsample(&q, &uniforms)?;
    solve_compacted(&ps, &qs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::wasserstein1_1d;
    use proptest::prelude::*;
    use rand::Rng;

    /// Minimum cost over all basic feasible solutions of the transportation
    /// polytope, found by trying every set of `n + m - 1` cells.
    fn vertex_enumeration(a: &[f64], b: &[f64], cost: &[f64]) -> f64 {
        let (n, m) = (a.len(), b.len());
        let k = n + m - 1;
        let cells: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..m).map(move |j| (i, j))).collect();
        let mut best = f64::INFINITY;
        for mask in 0u32..(1 << cells.len()) {
            if mask.count_ones() as usize != k {
                continue;
            }
            let chosen: Vec<(usize, usize)> =
                (0..cells.len()).filter(|&c| mask >> c & 1 == 1).map(|c| cells[c]).collect();
            if let Some(x) = tree_flow(a, b, &chosen) {
                if x.iter().all(|&f| f >= -1e-12) {
                    let c: f64 = chosen.iter().zip(&x).map(|(&(i, j), f)| f * cost[i * m + j]).sum();
                    best = best.min(c);
                }
            }
        }
        best
    }

    /// Unique flow on a spanning-tree support by peeling leaves, or `None`
    /// when the cells do not form a tree.
    fn tree_flow(a: &[f64], b: &[f64], cells: &[(usize, usize)]) -> Option<Vec<f64>> {
        let (n, m) = (a.len(), b.len());
        let mut ra = a.to_vec();
        let mut rb = b.to_vec();
        let mut done = vec![false; cells.len()];
        let mut x = vec![0.0; cells.len()];
        for _ in 0..cells.len() {
            let mut progressed = false;
            for r in 0..n {
                let open: Vec<usize> = (0..cells.len()).filter(|&k| !done[k] && cells[k].0 == r).collect();
                if open.len() == 1 {
                    let k = open[0];
                    x[k] = ra[r];
                    ra[r] = 0.0;
                    rb[cells[k].1] -= x[k];
                    done[k] = true;
                    progressed = true;
                    break;
                }
            }
            if progressed {
                continue;
            }
            for c in 0..m {
                let open: Vec<usize> = (0..cells.len()).filter(|&k| !done[k] && cells[k].1 == c).collect();
                if open.len() == 1 {
                    let k = open[0];
                    x[k] = rb[c];
                    rb[c] = 0.0;
                    ra[cells[k].0] -= x[k];
                    done[k] = true;
                    progressed = true;
                    break;
                }
            }
            if !progressed {
                return None;
            }
        }
        let balanced = ra.iter().chain(&rb).all(|r| r.abs() < 1e-9);
        balanced.then_some(x)
    }

    fn cloud2(max: usize) -> impl Strategy<Value = AtomMeasure> {
        prop::collection::vec(((-3.0f64..3.0, -3.0f64..3.0), 0.05f64..1.0), 1..=max).prop_map(|v| {
            let s: f64 = v.iter().map(|p| p.1).sum();
            let coords = v.iter().flat_map(|((x, y), _)| [*x, *y]).collect();
            let w = v.iter().map(|p| p.1 / s).collect();
            AtomMeasure::new(2, coords, w).unwrap()
        })
    }

    fn cloud1(max: usize) -> impl Strategy<Value = AtomMeasure> {
        prop::collection::vec((-3.0f64..3.0, 0.05f64..1.0), 1..=max).prop_map(|v| {
            let s: f64 = v.iter().map(|p| p.1).sum();
            let pairs: Vec<_> = v.into_iter().map(|(x, w)| (x, w / s)).collect();
            AtomMeasure::from_pairs_1d(&pairs).unwrap()
        })
    }

    #[test]
    fn single_pair() {
        let p = AtomMeasure::dirac(&[0.0, 0.0]).unwrap();
        let q = AtomMeasure::dirac(&[3.0, 4.0]).unwrap();
        assert_eq!(emd_small(&p, &q, 512).unwrap(), 5.0);
    }

    #[test]
    fn identical_is_zero() {
        let p = AtomMeasure::new(2, vec![0.0, 1.0, 2.0, -1.0, 0.5, 0.5], vec![0.2, 0.3, 0.5]).unwrap();
        assert_eq!(emd_small(&p, &p, 512).unwrap(), 0.0);
    }

    #[test]
    fn cap_is_enforced() {
        let p = AtomMeasure::empirical(1, (0..300).map(|i| i as f64).collect()).unwrap();
        let q = AtomMeasure::empirical(1, (0..300).map(|i| i as f64 + 0.5).collect()).unwrap();
        assert!(matches!(emd_small(&p, &q, 512), Err(Error::SupportCap { size: 600, cap: 512 })));
        let d = emd_capped(&p, &q, 512, 1).unwrap();
        assert!((d - 0.5).abs() < 0.05, "{d}");
    }

    #[test]
    fn equal_quantiles_give_zero_above_cap() {
        let p = AtomMeasure::empirical(1, (0..400).map(|i| i as f64).collect()).unwrap();
        let q = AtomMeasure::empirical(1, (0..400).rev().map(|i| i as f64).collect()).unwrap();
        assert_eq!(emd_capped(&p, &q, 64, 2).unwrap(), 0.0);
    }

    #[test]
    fn capped_equals_exact_under_cap() {
        let p = AtomMeasure::empirical(1, vec![0.0, 1.0, 4.0]).unwrap();
        let q = AtomMeasure::empirical(1, vec![0.5, 2.0]).unwrap();
        assert_eq!(emd_capped(&p, &q, 512, 3).unwrap(), emd_small(&p, &q, 512).unwrap());
    }

    #[test]
    fn subsample_of_dirac_against_uniform() {
        let p = AtomMeasure::empirical(1, vec![0.0]).unwrap();
        let q = AtomMeasure::empirical(1, (0..1000).map(|i| i as f64 / 1000.0).collect()).unwrap();
        let d = emd_capped(&p, &q, 64, 9).unwrap();
        assert!((d - 0.5).abs() < 0.02, "{d}");
    }

    #[test]
    fn degenerate_supplies() {
        // equal masses make the northwest corner degenerate
        let p = AtomMeasure::new(2, vec![0.0, 0.0, 1.0, 0.0, 2.0, 0.0], vec![0.25, 0.25, 0.5]).unwrap();
        let q = AtomMeasure::new(2, vec![2.0, 1.0, 0.0, 1.0], vec![0.5, 0.5]).unwrap();
        let cost: Vec<f64> = (0..3)
            .flat_map(|i| (0..2).map(move |j| (i, j)))
            .map(|(i, j)| euclid(p.point(i), q.point(j)))
            .collect();
        let oracle = vertex_enumeration(p.weights(), q.weights(), &cost);
        let got = emd_small(&p, &q, 512).unwrap();
        assert!((got - oracle).abs() < 1e-12, "{got} vs {oracle}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn matches_vertex_enumeration(p in cloud2(3), q in cloud2(3)) {
            let pc = p.compacted();
            let qc = q.compacted();
            let cost: Vec<f64> = (0..pc.len())
                .flat_map(|i| (0..qc.len()).map(move |j| (i, j)))
                .map(|(i, j)| euclid(pc.point(i), qc.point(j)))
                .collect();
            let oracle = vertex_enumeration(pc.weights(), qc.weights(), &cost);
            let got = emd_small(&p, &q, 512).unwrap();
            prop_assert!((got - oracle).abs() <= 1e-10, "{} vs {}", got, oracle);
        }

        #[test]
        fn agrees_with_1d_formula(p in cloud1(40), q in cloud1(40)) {
            let got = emd_small(&p, &q, 512).unwrap();
            prop_assert!((got - wasserstein1_1d(&p, &q)).abs() <= 1e-9);
        }

        #[test]
        fn metric_axioms_2d(p in cloud2(8), q in cloud2(8), r in cloud2(8)) {
            let pq = emd_small(&p, &q, 512).unwrap();
            let qp = emd_small(&q, &p, 512).unwrap();
            prop_assert!((pq - qp).abs() <= 1e-12);
            prop_assert!(pq <= emd_small(&p, &r, 512).unwrap() + emd_small(&r, &q, 512).unwrap() + 1e-10);
            prop_assert_eq!(emd_small(&p, &p, 512).unwrap(), 0.0);
        }
    }

    #[test]
    fn larger_random_instance_is_feasible_and_below_pairing() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pts = |rng: &mut ChaCha8Rng| -> Vec<f64> { (0..400).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect() };
        let p = AtomMeasure::empirical(2, pts(&mut rng)).unwrap();
        let q = AtomMeasure::empirical(2, pts(&mut rng)).unwrap();
        let d = emd_small(&p, &q, 512).unwrap();
        // identity pairing is one feasible plan
        let pairing: f64 = (0..200).map(|i| euclid(p.point(i), q.point(i))).sum::<f64>() / 200.0;
        assert!(d > 0.0 && d <= pairing);
    }
}
