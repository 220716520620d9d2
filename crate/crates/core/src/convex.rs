//! Piecewise-linear convex functions on a grid: evaluation, exact proximal
//! map and Moreau envelope, growth-class checks and weighted sup norms.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::measure::Grid1D;

/// Relative tolerance on chord-slope monotonicity.
pub const CONVEXITY_TOL: f64 = 1e-9;

/// Convex function given by node values on a grid, extended linearly with
/// explicit slopes beyond both ends.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PwlConvex {
    grid: Grid1D,
    values: Vec<f64>,
    slope_left: f64,
    slope_right: f64,
}

fn chords(grid: &Grid1D, values: &[f64]) -> Vec<f64> {
    let h = grid.h();
    values.windows(2).map(|w| (w[1] - w[0]) / h).collect()
}

fn slack(s: f64) -> f64 {
    CONVEXITY_TOL * (1.0 + s.abs())
}

/// First index where the slope sequence `sl, s_0, .., s_{n-2}, sr` decreases
/// beyond tolerance, with the size of the drop.
fn convexity_defect(slopes: &[f64], sl: f64, sr: f64) -> Option<(usize, f64)> {
    let seq: Vec<f64> = std::iter::once(sl)
        .chain(slopes.iter().copied())
        .chain(std::iter::once(sr))
        .collect();
    seq.windows(2)
        .enumerate()
        .find(|(_, w)| w[1] < w[0] - slack(w[0]))
        .map(|(k, w)| (k, w[0] - w[1]))
}

/// Pool-adjacent-violators: nondecreasing least-squares fit with equal
/// weights.
fn isotonic(xs: &[f64]) -> Vec<f64> {
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(xs.len());
    for &x in xs {
        blocks.push((x, 1));
        while blocks.len() > 1 {
            let (m2, n2) = blocks[blocks.len() - 1];
            let (m1, n1) = blocks[blocks.len() - 2];
            if m1 <= m2 {
                break;
            }
            blocks.pop();
            let n = n1 + n2;
            *blocks.last_mut().expect("two blocks") = ((m1 * n1 as f64 + m2 * n2 as f64) / n as f64, n);
        }
    }
    blocks.into_iter().flat_map(|(m, n)| std::iter::repeat_n(m, n)).collect()
}

impl PwlConvex {
    /// Validated constructor; inputs that are not convex within
    /// [`CONVEXITY_TOL`] are rejected.
    pub fn new(grid: Grid1D, values: Vec<f64>, slope_left: f64, slope_right: f64) -> Result<Self> {
        grid.validate()?;
        if values.len() != grid.n {
            return Err(invalid(format!("{} values for a grid of {} nodes", values.len(), grid.n)));
        }
        if values.iter().chain([&slope_left, &slope_right]).any(|v| !v.is_finite()) {
            return Err(invalid("non-finite value or slope"));
        }
        if let Some((index, defect)) = convexity_defect(&chords(&grid, &values), slope_left, slope_right) {
            return Err(Error::NotConvex { index, defect });
        }
        Ok(Self { grid, values, slope_left, slope_right })
    }

    /// Samples `f` at the nodes; end slopes are the end chords.
    pub fn from_fn(grid: Grid1D, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values: Vec<f64> = grid.nodes().into_iter().map(f).collect();
        let c = chords(&grid, &values);
        let (sl, sr) = (c[0], c[c.len() - 1]);
        Self::new(grid, values, sl, sr)
    }

    /// Constant function.
    pub fn constant(grid: Grid1D, c: f64) -> Result<Self> {
        Self::new(grid, vec![c; grid.n], 0.0, 0.0)
    }

    /// Like [`PwlConvex::new`], but small convexity defects from round-off
    /// are removed by projecting the chord slopes onto nondecreasing
    /// sequences. Fails if the repair moves any node value by more than
    /// `max_shift`.
    pub fn repaired(grid: Grid1D, values: Vec<f64>, slope_left: f64, slope_right: f64, max_shift: f64) -> Result<Self> {
        let c = chords(&grid, &values);
        let Some((index, defect)) = convexity_defect(&c, slope_left, slope_right) else {
            return Self::new(grid, values, slope_left, slope_right);
        };
        let fixed = isotonic(&c);
        let h = grid.h();
        let mut rebuilt = Vec::with_capacity(values.len());
        rebuilt.push(values[0]);
        for s in &fixed {
            let last = *rebuilt.last().expect("nonempty");
            rebuilt.push(last + s * h);
        }
        // centre the correction
        let (lo, hi) = rebuilt
            .iter()
            .zip(&values)
            .map(|(r, v)| v - r)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), d| (a.min(d), b.max(d)));
        let offset = 0.5 * (lo + hi);
        let shift = 0.5 * (hi - lo);
        if shift > max_shift {
            return Err(Error::NotConvex { index, defect });
        }
        for r in &mut rebuilt {
            *r += offset;
        }
        let sl = slope_left.min(fixed[0]);
        let sr = slope_right.max(fixed[fixed.len() - 1]);
        Self::new(grid, rebuilt, sl, sr)
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn slope_left(&self) -> f64 {
        self.slope_left
    }

    pub fn slope_right(&self) -> f64 {
        self.slope_right
    }

    /// Slope on cell `k` for `k` in `0..n-1`; `slope(-1)` and `slope(n-1)`
    /// are the extrapolation slopes.
    fn slope(&self, k: isize) -> f64 {
        if k < 0 {
            self.slope_left
        } else if k as usize >= self.grid.n - 1 {
            self.slope_right
        } else {
            let k = k as usize;
            (self.values[k + 1] - self.values[k]) / self.grid.h()
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.grid.interpolate(&self.values, self.slope_left, self.slope_right, x)
    }

    /// Unique minimiser of `y -> |x - y|^2 / 2 + u(y)`.
    ///
    /// Solves `x in y + du(y)`: node `k` is optimal when
    /// `x_k + s_{k-1} <= x <= x_k + s_k`, otherwise the minimiser lies in the
    /// open cell between two nodes (or a tail) where `y = x - s`.
    pub fn prox(&self, x: f64) -> f64 {
        let n = self.grid.n;
        let hi = |k: usize| self.grid.node(k) + self.slope(k as isize);
        // first node whose upper subgradient edge reaches x
        let (mut lo_i, mut hi_i) = (0usize, n);
        while lo_i < hi_i {
            let mid = (lo_i + hi_i) / 2;
            if hi(mid) < x {
                lo_i = mid + 1;
            } else {
                hi_i = mid;
            }
        }
        let k = lo_i;
        if k == n {
            return (x - self.slope_right).max(self.grid.x_max);
        }
        let xk = self.grid.node(k);
        if x >= xk + self.slope(k as isize - 1) {
            return xk;
        }
        if k == 0 {
            return (x - self.slope_left).min(self.grid.x_min);
        }
        (x - self.slope(k as isize - 1)).clamp(self.grid.node(k - 1), xk)
    }

    /// Moreau envelope `V_u(x) = min_y |x - y|^2 / 2 + u(y)`.
    pub fn moreau(&self, x: f64) -> f64 {
        let y = self.prox(x);
        0.5 * (x - y) * (x - y) + self.eval(y)
    }

    /// Nodewise sample of `x -> V_u(x - shift)` on `grid`, with end slopes
    /// `(x - shift) - prox(x - shift)` at the two ends.
    pub fn moreau_curve(&self, grid: &Grid1D, shift: f64) -> Result<Self> {
        let values = crate::par::map_range(grid.n, |i| self.moreau(grid.node(i) - shift));
        let left = grid.x_min - shift;
        let right = grid.x_max - shift;
        let sl = left - self.prox(left);
        let sr = right - self.prox(right);
        let tol = 1e-9 * (1.0 + values.iter().fold(0.0f64, |m, v| m.max(v.abs())));
        Self::repaired(*grid, values, sl, sr, tol)
    }

    /// Nodewise difference `self - other` as a general PWL function.
    pub fn minus(&self, other: &Self) -> Result<Pwl> {
        if self.grid != other.grid {
            return Err(invalid("difference of functions on different grids"));
        }
        Ok(Pwl {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
            slope_left: self.slope_left - other.slope_left,
            slope_right: self.slope_right - other.slope_right,
        })
    }

    pub fn as_pwl(&self) -> Pwl {
        Pwl {
            grid: self.grid,
            values: self.values.clone(),
            slope_left: self.slope_left,
            slope_right: self.slope_right,
        }
    }
}

/// Piecewise-linear function with linear tails, not necessarily convex.
#[derive(Clone, Debug, PartialEq)]
pub struct Pwl {
    pub grid: Grid1D,
    pub values: Vec<f64>,
    pub slope_left: f64,
    pub slope_right: f64,
}

impl Pwl {
    /// `sup_x |f(x)| / (1 + |x|^p)` over the whole real line.
    pub fn gnorm_exact(&self, p: u32) -> f64 {
        let g = &self.grid;
        let mut best = 0.0f64;
        let mut visit = |a: f64, b: f64, lo: f64, hi: f64| {
            best = best.max(ratio_sup(a, b, lo, hi, p)).max(ratio_sup(-a, -b, lo, hi, p));
        };
        let v = &self.values;
        visit(v[0] - self.slope_left * g.x_min, self.slope_left, f64::NEG_INFINITY, g.x_min);
        for k in 0..g.n - 1 {
            let (x0, x1) = (g.node(k), g.node(k + 1));
            let b = (v[k + 1] - v[k]) / (x1 - x0);
            visit(v[k] - b * x0, b, x0, x1);
        }
        let last = g.n - 1;
        visit(v[last] - self.slope_right * g.x_max, self.slope_right, g.x_max, f64::INFINITY);
        best
    }

    /// Grid-node version of [`Pwl::gnorm_exact`].
    pub fn gnorm(&self, p: u32) -> f64 {
        gnorm(&self.grid, &self.values, p)
    }
}

fn weight(x: f64, p: u32) -> f64 {
    1.0 + x.abs().powi(p as i32)
}

/// `sup (a + b x) / (1 + |x|^p)` over `[lo, hi]`, where either end may be
/// infinite. The ratio is smooth away from 0, so candidates are the ends,
/// the limits at infinity, 0 and the stationary points.
fn ratio_sup(a: f64, b: f64, lo: f64, hi: f64, p: u32) -> f64 {
    let r = |x: f64| (a + b * x) / weight(x, p);
    let mut cands: Vec<f64> = Vec::with_capacity(6);
    let mut consider = |x: f64| {
        if x >= lo && x <= hi && x.is_finite() {
            cands.push(r(x));
        }
    };
    consider(lo);
    consider(hi);
    consider(0.0);
    if p == 2 {
        // b x^2 + 2 a x - b = 0
        if b == 0.0 {
            consider(0.0);
        } else {
            let d = (a * a + b * b).sqrt();
            consider((-a + d) / b);
            consider((-a - d) / b);
        }
    }
    let mut best = cands.into_iter().fold(f64::NEG_INFINITY, f64::max);
    match p {
        1 => {
            if lo == f64::NEG_INFINITY {
                best = best.max(-b);
            }
            if hi == f64::INFINITY {
                best = best.max(b);
            }
        }
        _ => {
            if lo == f64::NEG_INFINITY || hi == f64::INFINITY {
                best = best.max(0.0);
            }
        }
    }
    best
}

/// `max_i |f(x_i)| / (1 + |x_i|^p)` over grid nodes.
pub fn gnorm(grid: &Grid1D, values: &[f64], p: u32) -> f64 {
    values
        .iter()
        .enumerate()
        .map(|(i, v)| v.abs() / weight(grid.node(i), p))
        .fold(0.0, f64::max)
}

/// Where a growth-class bound is tightest or violated.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ClassWitness {
    Node(usize),
    LeftTail,
    RightTail,
}

/// Outcome of [`q_class_check`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClassReport {
    pub ok: bool,
    /// Smallest constant for which the function lies in the class.
    pub constant: f64,
    pub witness: ClassWitness,
}

/// Smallest `C` with `-C <= u(x) <= C (1 + |x|^p)` for all real `x`
/// (infinite if a tail decreases without bound), and where it is attained.
pub fn q_class_constant(u: &PwlConvex, p: u32) -> (f64, ClassWitness) {
    let g = &u.grid;
    let v = &u.values;
    let mut best = (0.0f64, ClassWitness::Node(0));
    let mut bump = |c: f64, w: ClassWitness| {
        if c > best.0 {
            best = (c, w);
        }
    };
    if u.slope_left > 0.0 {
        bump(f64::INFINITY, ClassWitness::LeftTail);
    }
    if u.slope_right < 0.0 {
        bump(f64::INFINITY, ClassWitness::RightTail);
    }
    for (i, &val) in v.iter().enumerate() {
        bump(-val, ClassWitness::Node(i));
        bump(val / weight(g.node(i), p), ClassWitness::Node(i));
    }
    let last = g.n - 1;
    bump(
        ratio_sup(v[0] - u.slope_left * g.x_min, u.slope_left, f64::NEG_INFINITY, g.x_min, p),
        ClassWitness::LeftTail,
    );
    bump(
        ratio_sup(v[last] - u.slope_right * g.x_max, u.slope_right, g.x_max, f64::INFINITY, p),
        ClassWitness::RightTail,
    );
    best
}

/// Membership in `Q_p^C`: bounds checked at every node and analytically on
/// the linear tails.
pub fn q_class_check(u: &PwlConvex, c: f64, p: u32) -> ClassReport {
    let (constant, witness) = q_class_constant(u, p);
    ClassReport { ok: constant <= c * (1.0 + 1e-12), constant, witness }
}

/// Growth constant of `|prox_u|^2` for `u` in `Q_2^R`.
pub fn c1(r: f64) -> f64 {
    8.0 * r + 2.0
}

/// Class constant of the Moreau envelope.
pub fn c2(r: f64) -> f64 {
    (r + 1.0) * (1.0 + c1(r))
}

/// Hölder constant of `u -> prox_u`.
pub fn c3(r: f64) -> f64 {
    (2.0 * (1.0 + c1(r))).sqrt()
}

/// Lipschitz constant of `u -> V_u`.
pub fn c4(r: f64) -> f64 {
    1.0 + c1(r)
}

/// Local Lipschitz constant of `x -> V_u(x)`.
pub fn c5(r: f64) -> f64 {
    1.0 + c1(r).sqrt()
}

/// Class constant of the smoothed function `Υ[u]`.
pub fn c6(r: f64) -> f64 {
    2.0 * r * (1.0 + r)
}

/// Lipschitz modulus of `u -> Υ[u]` on `Q_2^R`.
pub fn upsilon_lipschitz(r: f64) -> f64 {
    2.0 * (1.0 + r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid() -> Grid1D {
        Grid1D::new(-4.0, 4.0, 81).unwrap()
    }

    fn quad() -> PwlConvex {
        PwlConvex::from_fn(grid(), |y| 0.5 * y * y).unwrap()
    }

    #[test]
    fn rejects_concave_input() {
        let g = Grid1D::new(-1.0, 1.0, 3).unwrap();
        assert!(matches!(PwlConvex::new(g, vec![0.0, 1.0, 0.0], 1.0, -1.0), Err(Error::NotConvex { .. })));
        assert!(PwlConvex::new(g, vec![1.0, 0.0, 1.0], -2.0, 1.0).is_ok());
        assert!(PwlConvex::new(g, vec![1.0, 0.0, 1.0], 0.0, 1.0).is_err());
    }

    #[test]
    fn eval_nodes_midpoints_and_tails() {
        let u = quad();
        assert_eq!(u.eval(2.0), 2.0);
        let h = grid().h();
        assert!((u.eval(0.5 * h) - 0.25 * h * h).abs() < 1e-15);
        let sr = u.slope_right();
        assert!((u.eval(5.0) - (8.0 + sr)).abs() < 1e-12);
    }

    #[test]
    fn prox_of_zero_is_identity() {
        let z = PwlConvex::constant(grid(), 0.0).unwrap();
        for x in [-10.0, -4.0, -0.3, 0.0, 1.7, 4.0, 11.0] {
            assert_eq!(z.prox(x), x);
            assert_eq!(z.moreau(x), 0.0);
        }
    }

    #[test]
    fn prox_of_quadratic() {
        let u = quad();
        let h = grid().h();
        // x / 2 is a node whenever x is an even multiple of h
        for k in -20i32..=20 {
            let x = 2.0 * k as f64 * h;
            assert!((u.prox(x) - x / 2.0).abs() < 1e-12, "x = {x}");
        }
        for k in 0..400 {
            let x = -3.9 + 0.0195 * k as f64;
            assert!((u.prox(x) - x / 2.0).abs() <= h / 4.0 + 1e-12);
            assert!((u.moreau(x) - x * x / 4.0).abs() <= h * h / 8.0 + 1e-12);
        }
    }

    #[test]
    fn moreau_curve_of_shifted_quadratic() {
        let u = quad();
        let g = grid();
        let p = 0.3;
        let v = u.moreau_curve(&g, p).unwrap();
        for (i, x) in g.nodes().into_iter().enumerate() {
            assert!((v.values()[i] - (x - p) * (x - p) / 4.0).abs() <= g.h() * g.h() / 8.0 + 1e-12);
            assert_eq!(v.values()[i], u.moreau(x - p));
        }
        let zero = PwlConvex::constant(g, 0.0).unwrap().moreau_curve(&g, 0.0).unwrap();
        assert!(zero.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gnorm_examples() {
        let g = grid();
        let f: Vec<f64> = g.nodes().iter().map(|x| 1.0 + x * x).collect();
        assert!((gnorm(&g, &f, 2) - 1.0).abs() < 1e-15);
        assert_eq!(gnorm(&g, &vec![0.0; g.n], 2), 0.0);
    }

    #[test]
    fn class_examples() {
        let g = grid();
        assert!(q_class_check(&PwlConvex::constant(g, 0.0).unwrap(), 1.0, 2).ok);
        let sq = PwlConvex::from_fn(g, |x| x * x).unwrap();
        assert!(q_class_check(&sq, 1.0, 2).ok);
        let neg = PwlConvex::constant(g, -2.0).unwrap();
        let r = q_class_check(&neg, 1.0, 2);
        assert!(!r.ok);
        assert!(matches!(r.witness, ClassWitness::Node(_)));
        // |x| with slope 1 tails lies in Q_1^1 but not Q_1^{1/2}
        let abs = PwlConvex::from_fn(g, f64::abs).unwrap();
        assert!(q_class_check(&abs, 1.0, 1).ok);
        assert!(!q_class_check(&abs, 0.5, 1).ok);
    }

    #[test]
    fn repair_fixes_roundoff_only() {
        let g = Grid1D::new(0.0, 1.0, 5).unwrap();
        let mut v: Vec<f64> = g.nodes().iter().map(|x| x * x).collect();
        v[2] += 1e-13;
        v[1] += 2e-13;
        assert!(PwlConvex::repaired(g, v.clone(), -1.0, 3.0, 1e-9).is_ok());
        v[2] += 0.1;
        assert!(PwlConvex::repaired(g, v, -1.0, 3.0, 1e-9).is_err());
    }

    #[test]
    fn exact_gnorm_sees_tails() {
        let g = Grid1D::new(-1.0, 1.0, 3).unwrap();
        let f = Pwl { grid: g, values: vec![0.0; 3], slope_left: 0.0, slope_right: 1.0 };
        // (x - 1) / (1 + x^2) peaks at x = 1 + sqrt(2)
        let x = 1.0 + 2f64.sqrt();
        assert!((f.gnorm_exact(2) - (x - 1.0) / (1.0 + x * x)).abs() < 1e-14);
        assert_eq!(f.gnorm(2), 0.0);
        assert!((f.gnorm_exact(1) - 1.0).abs() < 1e-15);
    }

    /// Minimiser over a fine uniform grid covering the relevant window.
    fn dense_argmin(u: &PwlConvex, x: f64, lo: f64, hi: f64, n: usize) -> (f64, f64) {
        let step = (hi - lo) / (n - 1) as f64;
        (0..n)
            .map(|k| {
                let y = lo + k as f64 * step;
                (y, 0.5 * (x - y) * (x - y) + u.eval(y))
            })
            .fold((f64::NAN, f64::INFINITY), |b, c| if c.1 < b.1 { c } else { b })
    }

    pub(crate) fn random_convex() -> impl Strategy<Value = PwlConvex> {
        (
            prop::collection::vec(0.0f64..3.0, 8),
            -3.0f64..3.0,
            -2.0f64..2.0,
            0.0f64..2.0,
            0.0f64..2.0,
        )
            .prop_map(|(incs, s0, v0, el, er)| {
                let g = Grid1D::new(-2.0, 2.0, 9).unwrap();
                let h = g.h();
                let mut slopes = vec![s0];
                for d in incs.iter().take(7) {
                    let last = *slopes.last().unwrap();
                    slopes.push(last + d);
                }
                let mut v = vec![v0];
                for s in &slopes {
                    v.push(v.last().unwrap() + s * h);
                }
                PwlConvex::new(g, v, slopes[0] - el, slopes[7] + er).unwrap()
            })
    }

    proptest! {
        #[test]
        fn prox_matches_dense_argmin(u in random_convex(), x in -8.0f64..8.0) {
            let y = u.prox(x);
            let (y_star, _) = dense_argmin(&u, x, -20.0, 20.0, 400_001);
            prop_assert!((y - y_star).abs() <= 1e-4 + 1e-12, "{} vs {}", y, y_star);
            let (_, v_star) = dense_argmin(&u, x, y - 1e-3, y + 1e-3, 2001);
            prop_assert!(u.moreau(x) <= v_star + 1e-12);
        }

        #[test]
        fn prox_is_firmly_nonexpansive(u in random_convex(), x in -8.0f64..8.0, y in -8.0f64..8.0) {
            let (px, py) = (u.prox(x), u.prox(y));
            prop_assert!((px - py).abs() <= (x - y).abs() + 1e-9);
            prop_assert!(((x - px) - (y - py)).abs() <= (x - y).abs() + 1e-9);
        }

        #[test]
        fn moreau_curve_matches_pointwise(u in random_convex(), shift in -1.0f64..1.0) {
            let g = Grid1D::new(-3.0, 3.0, 31).unwrap();
            let v = u.moreau_curve(&g, shift).unwrap();
            for (i, x) in g.nodes().into_iter().enumerate() {
                prop_assert!((v.values()[i] - u.moreau(x - shift)).abs() <= 1e-9);
            }
        }
    }
}
