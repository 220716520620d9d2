use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{invalid, Result};
use crate::par::ordered_sum;

/// Monte Carlo summary for one population size.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GapRow {
    pub n: usize,
    pub mean: f64,
    /// Standard error of the mean over repetitions.
    pub stderr: f64,
    pub reps: usize,
}

impl GapRow {
    pub fn from_samples(n: usize, xs: &[f64]) -> Self {
        let k = xs.len();
        let mean = ordered_sum(xs.iter().copied()) / k as f64;
        let var = if k > 1 {
            ordered_sum(xs.iter().map(|x| (x - mean).powi(2))) / (k - 1) as f64
        } else {
            0.0
        };
        Self { n, mean, stderr: (var / k as f64).sqrt(), reps: k }
    }
}

/// Least-squares fit of `ln mean = intercept + slope ln N`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope from the regression residuals.
    pub slope_stderr: f64,
    /// 95% Student-t band for the slope.
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Fits a log-log line through `(n, mean)` pairs with positive means.
pub fn fit_loglog(rows: &[GapRow]) -> Result<SlopeFit> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.mean > 0.0)
        .map(|r| ((r.n as f64).ln(), r.mean.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(invalid("slope fit needs at least two positive means"));
    }
    let k = pts.len() as f64;
    let mx = ordered_sum(pts.iter().map(|p| p.0)) / k;
    let my = ordered_sum(pts.iter().map(|p| p.1)) / k;
    let sxx = ordered_sum(pts.iter().map(|p| (p.0 - mx).powi(2)));
    let sxy = ordered_sum(pts.iter().map(|p| (p.0 - mx) * (p.1 - my)));
    if sxx == 0.0 {
        return Err(invalid("slope fit needs at least two distinct N"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let (slope_stderr, half) = if pts.len() > 2 {
        let rss = ordered_sum(pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)));
        let df = k - 2.0;
        let se = (rss / df / sxx).sqrt();
        let t = StudentsT::new(0.0, 1.0, df).map_err(|e| invalid(e.to_string()))?.inverse_cdf(0.975);
        (se, t * se)
    } else {
        (f64::NAN, f64::NAN)
    };
    Ok(SlopeFit { slope, intercept, slope_stderr, ci_low: slope - half, ci_high: slope + half })
}

/// Per-N statistics of one gap quantity and its decay fit.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GapReport {
    pub rows: Vec<GapRow>,
    /// `None` when fewer than two means are positive (e.g. identically zero
    /// gaps).
    pub fit: Option<SlopeFit>,
}

impl GapReport {
    pub fn from_samples(ns: &[usize], samples: &[Vec<f64>]) -> Self {
        let rows: Vec<GapRow> = ns.iter().zip(samples).map(|(&n, xs)| GapRow::from_samples(n, xs)).collect();
        let fit = fit_loglog(&rows).ok();
        Self { rows, fit }
    }

    pub fn slope(&self) -> Option<f64> {
        self.fit.as_ref().map(|f| f.slope)
    }

    /// Whether each mean lies below its predecessor by more than two
    /// combined standard errors.
    pub fn strictly_decreasing(&self, sigmas: f64) -> bool {
        self.rows.windows(2).all(|w| {
            let se = (w[0].stderr.powi(2) + w[1].stderr.powi(2)).sqrt();
            w[0].mean - w[1].mean > sigmas * se
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law_is_recovered() {
        let rows: Vec<GapRow> = [16usize, 64, 256, 1024]
            .iter()
            .map(|&n| GapRow { n, mean: 3.0 * (n as f64).powf(-0.5), stderr: 0.0, reps: 1 })
            .collect();
        let f = fit_loglog(&rows).unwrap();
        assert!((f.slope + 0.5).abs() < 1e-12);
        assert!((f.intercept - 3f64.ln()).abs() < 1e-12);
        assert!(f.slope_stderr < 1e-10);
    }

    #[test]
    fn sample_statistics() {
        let r = GapRow::from_samples(4, &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(r.mean, 2.5);
        assert!((r.stderr - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn zero_gaps_have_no_fit() {
        let rep = GapReport::from_samples(&[1, 2], &[vec![0.0, 0.0], vec![0.0, 0.0]]);
        assert!(rep.fit.is_none());
    }
}
