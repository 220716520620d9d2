use super::Law1D;

fn sorted(law: &impl Law1D) -> Vec<(f64, f64)> {
    let mut a: Vec<(f64, f64)> = law.atoms_1d().into_iter().filter(|p| p.1 > 0.0).collect();
    a.sort_by(|x, y| x.0.total_cmp(&y.0));
    a
}

/// Exact Wasserstein-1 distance between 1-D laws, `int |F_p - F_q| ds`.
///
/// Both CDFs are accumulated independently over the merged support, so the
/// result is bit-identical under swapping the arguments.
pub fn wasserstein1_1d(p: &impl Law1D, q: &impl Law1D) -> f64 {
    let a = sorted(p);
    let b = sorted(q);
    let (mut i, mut j) = (0, 0);
    let (mut fp, mut fq) = (0.0f64, 0.0f64);
    let mut total = 0.0;
    let mut prev: Option<f64> = None;
    while i < a.len() || j < b.len() {
        let x = match (a.get(i), b.get(j)) {
            (Some(u), Some(v)) => u.0.min(v.0),
            (Some(u), None) => u.0,
            (None, Some(v)) => v.0,
            (None, None) => unreachable!(),
        };
        if let Some(x0) = prev {
            total += (x - x0) * (fp - fq).abs();
        }
        while i < a.len() && a[i].0 == x {
            fp += a[i].1;
            i += 1;
        }
        while j < b.len() && b[j].0 == x {
            fq += b[j].1;
            j += 1;
        }
        prev = Some(x);
    }
    total
}
