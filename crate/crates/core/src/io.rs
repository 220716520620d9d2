//! CSV artifacts of solves and experiments.
//!
//! Floats are written in shortest round-trip form, so reading a file back
//! reproduces the values bit for bit.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::measure::{AtomMeasure, Belief, Grid1D};
use crate::nplayer::GapReport;
use crate::solver::{MfgSolution, Policy};

pub const U_FILE: &str = "u.csv";
pub const ALPHA_FILE: &str = "alpha.csv";
pub const M_FILE: &str = "m.csv";
pub const MU_FILE: &str = "mu_t.csv";
pub const RESIDUALS_FILE: &str = "residuals.csv";

#[derive(Debug, Serialize, Deserialize)]
struct NodeRow {
    t: usize,
    x: f64,
    value: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct JointRow {
    t: usize,
    x: f64,
    a: f64,
    weight: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct ResidualRow {
    iteration: usize,
    residual: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct GapCsvRow {
    n: usize,
    mean: f64,
    stderr: f64,
    reps: usize,
}

fn write_rows<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn read_rows<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Into::into)).collect()
}

fn node_rows<'a>(grid: &'a Grid1D, series: impl Iterator<Item = &'a [f64]> + 'a) -> impl Iterator<Item = NodeRow> + 'a {
    series.enumerate().flat_map(move |(t, vals)| {
        vals.iter().enumerate().map(move |(i, &value)| NodeRow { t, x: grid.node(i), value })
    })
}

/// Writes `u`, `alpha`, the state laws, the joint laws and the residual
/// history into `dir`.
pub fn write_solution(dir: &Path, sol: &MfgSolution) -> Result<()> {
    fs::create_dir_all(dir)?;
    let grid = *sol.policy.grid();
    write_rows(&dir.join(U_FILE), node_rows(&grid, sol.u.iter().map(|u| u.values())))?;
    write_rows(&dir.join(ALPHA_FILE), node_rows(&grid, (0..sol.policy.horizon()).map(|t| sol.policy.nodes(t))))?;
    write_rows(&dir.join(M_FILE), node_rows(&grid, sol.m.iter().map(|m| m.weights())))?;
    let joints = sol.mu.iter().enumerate().flat_map(|(t, mu)| {
        mu.iter().map(move |(p, weight)| JointRow { t, x: p[0], a: p[1], weight })
    });
    write_rows(&dir.join(MU_FILE), joints)?;
    write_rows(
        &dir.join(RESIDUALS_FILE),
        sol.residuals.iter().enumerate().map(|(iteration, &residual)| ResidualRow { iteration, residual }),
    )
}

/// Reads the feedback written by [`write_solution`].
pub fn read_policy(dir: &Path, grid: Grid1D, horizon: usize) -> Result<Policy> {
    let rows: Vec<NodeRow> = read_rows(&dir.join(ALPHA_FILE))?;
    let mut maps = vec![Vec::with_capacity(grid.n); horizon];
    for r in rows {
        let slot = maps.get_mut(r.t).ok_or_else(|| invalid(format!("alpha.csv period {} beyond horizon", r.t)))?;
        slot.push(r.value);
    }
    Policy::new(grid, maps)
}

/// Reads the mean-field belief: joint laws from `mu_t.csv` and the terminal
/// state law from the last period of `m.csv`.
pub fn read_belief(dir: &Path, horizon: usize) -> Result<Belief> {
    let joints_rows: Vec<JointRow> = read_rows(&dir.join(MU_FILE))?;
    let mut coords = vec![Vec::new(); horizon];
    let mut weights = vec![Vec::new(); horizon];
    for r in joints_rows {
        if r.t >= horizon {
            return Err(invalid(format!("mu_t.csv period {} beyond horizon", r.t)));
        }
        coords[r.t].extend([r.x, r.a]);
        weights[r.t].push(r.weight);
    }
    let joints = coords
        .into_iter()
        .zip(weights)
        .map(|(c, w)| AtomMeasure::new(2, c, w))
        .collect::<Result<Vec<_>>>()?;
    let m_rows: Vec<NodeRow> = read_rows(&dir.join(M_FILE))?;
    let (xs, ws): (Vec<f64>, Vec<f64>) =
        m_rows.iter().filter(|r| r.t == horizon && r.value > 0.0).map(|r| (r.x, r.value)).unzip();
    let terminal = AtomMeasure::new(1, xs, ws)?;
    Belief::new(joints, terminal)
}

pub fn write_residuals(path: &Path, residuals: &[f64]) -> Result<()> {
    write_rows(path, residuals.iter().enumerate().map(|(iteration, &residual)| ResidualRow { iteration, residual }))
}

/// `n,mean,stderr,reps` rows.
pub fn write_gap_report(path: &Path, report: &GapReport) -> Result<()> {
    write_rows(
        path,
        report.rows.iter().map(|r| GapCsvRow { n: r.n, mean: r.mean, stderr: r.stderr, reps: r.reps }),
    )
}

/// Pretty JSON followed by a newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| invalid(e.to_string()))?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures;
    use crate::nplayer::GapRow;
    use crate::solver::{fixed_point, FixedPointOptions};

    #[test]
    fn solution_round_trip() {
        let model = fixtures::small(2, 81);
        let sol = fixed_point(&model, &FixedPointOptions::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_solution(dir.path(), &sol).unwrap();
        let p = read_policy(dir.path(), model.grid, 2).unwrap();
        assert_eq!(p, sol.policy);
        let b = read_belief(dir.path(), 2).unwrap();
        assert_eq!(b.joints, sol.mu);
        assert_eq!(b.terminal, sol.induced.terminal);
        let first = fs::read(dir.path().join(M_FILE)).unwrap();
        write_solution(dir.path(), &sol).unwrap();
        assert_eq!(first, fs::read(dir.path().join(M_FILE)).unwrap());
    }

    #[test]
    fn missing_artifacts_are_io_errors() {
        let dir = tempfile::tempdir().unwrap();
        let grid = Grid1D::new(0.0, 1.0, 3).unwrap();
        assert!(matches!(read_policy(dir.path(), grid, 1), Err(crate::Error::Csv(_))));
    }

    #[test]
    fn gap_report_csv() {
        let rep = GapReport::from_samples(&[1], &[vec![0.5]]);
        assert_eq!(rep.rows[0], GapRow { n: 1, mean: 0.5, stderr: 0.0, reps: 1 });
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("gap.csv");
        write_gap_report(&path, &rep).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "n,mean,stderr,reps\n1,0.5,0.0,1\n");
    }
}
