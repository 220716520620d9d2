//! JSON run configuration.
//!
//! A config has a `version`, a `model` section and optional sections for
//! each command. Unknown fields are rejected everywhere. Per-period lists
//! (`noise`, `ambiguity`) take either `T` entries or a single entry that is
//! repeated; per-period coefficients take a number or a list.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{rebin, AtomMeasure, Grid1D, GridMeasure};
use crate::model::{Caps, CongestionSpec, ModelSpec, Numerics, PriceSpec};
use crate::nplayer::SimConfig;
use crate::risk::{AmbiguitySet, DiscreteNoise};
use crate::solver::{FixedPointOptions, OracleOptions};

pub const SCHEMA_VERSION: u32 = 1;

/// Number or per-period list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Series {
    Scalar(f64),
    List(Vec<f64>),
}

impl Series {
    fn expand(&self, len: usize, name: &str) -> Result<Vec<f64>> {
        match self {
            Self::Scalar(v) => Ok(vec![*v; len]),
            Self::List(v) if v.len() == len => Ok(v.clone()),
            Self::List(v) => Err(Error::Config(format!("{name} has {} entries, expected {len}", v.len()))),
        }
    }
}

fn zero_series() -> Series {
    Series::Scalar(0.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointMass {
    pub x: f64,
    pub w: f64,
}

/// A law on the grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case", deny_unknown_fields)]
pub enum LawConfig {
    /// Gaussian density sampled at the nodes and normalised.
    Gaussian { mean: f64, std: f64 },
    Uniform,
    /// Point mass, split linearly between the two nearest nodes.
    Dirac { x: f64 },
    /// Weighted points, split linearly onto the grid.
    Atoms { atoms: Vec<PointMass> },
    /// Node weights, normalised.
    Weights { weights: Vec<f64> },
}

impl LawConfig {
    pub fn build(&self, grid: Grid1D) -> Result<GridMeasure> {
        match self {
            Self::Gaussian { mean, std } => GridMeasure::discretized_gaussian(grid, *mean, *std),
            Self::Uniform => GridMeasure::uniform(grid),
            Self::Dirac { x } => on_grid(grid, &[(*x, 1.0)]),
            Self::Atoms { atoms } => on_grid(grid, &atoms.iter().map(|a| (a.x, a.w)).collect::<Vec<_>>()),
            Self::Weights { weights } => {
                if weights.len() != grid.n {
                    return Err(Error::Config(format!("{} weights for {} nodes", weights.len(), grid.n)));
                }
                GridMeasure::from_unnormalized(grid, weights.clone())
            }
        }
    }
}

fn on_grid(grid: Grid1D, pairs: &[(f64, f64)]) -> Result<GridMeasure> {
    if pairs.iter().any(|&(x, _)| !grid.contains(x)) {
        return Err(Error::Config("law has points outside the grid".into()));
    }
    Ok(rebin(&AtomMeasure::from_pairs_1d(pairs)?, &grid, 0.0)?.measure)
}

/// One entry or one per period.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerPeriod<T> {
    List(Vec<T>),
    One(T),
}

impl<T: Clone> PerPeriod<T> {
    fn expand(&self, horizon: usize, name: &str) -> Result<Vec<T>> {
        match self {
            Self::One(v) => Ok(vec![v.clone(); horizon]),
            Self::List(v) if v.len() == horizon => Ok(v.clone()),
            Self::List(v) if v.len() == 1 => Ok(vec![v[0].clone(); horizon]),
            Self::List(v) => Err(Error::Config(format!("{name} has {} entries, expected 1 or {horizon}", v.len()))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", deny_unknown_fields)]
pub enum CongestionConfig {
    #[serde(rename = "abs_mean_quadratic")]
    AbsMeanQuadratic {
        eta: Series,
        theta: Series,
        #[serde(default = "zero_series")]
        offset: Series,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriceConfig {
    pub p0: Series,
    pub kappa: f64,
    pub clip: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub horizon: usize,
    pub grid: Grid1D,
    pub initial: LawConfig,
    pub noise: PerPeriod<DiscreteNoise>,
    pub ambiguity: PerPeriod<AmbiguitySet>,
    pub congestion: CongestionConfig,
    pub price: PriceConfig,
    pub caps: Caps,
    #[serde(default)]
    pub numerics: Numerics,
}

impl ModelConfig {
    /// Builds and structurally validates the model.
    pub fn build(&self) -> Result<ModelSpec> {
        let t = self.horizon;
        self.grid.validate().map_err(config_error)?;
        let CongestionConfig::AbsMeanQuadratic { eta, theta, offset } = &self.congestion;
        let model = ModelSpec {
            horizon: t,
            grid: self.grid,
            initial: self.initial.build(self.grid).map_err(config_error)?,
            noise: self.noise.expand(t, "noise")?,
            ambiguity: self.ambiguity.expand(t, "ambiguity")?,
            congestion: CongestionSpec::AbsMeanQuadratic {
                eta: eta.expand(t + 1, "eta")?,
                theta: theta.expand(t + 1, "theta")?,
                offset: offset.expand(t + 1, "offset")?,
            },
            price: PriceSpec { p0: self.price.p0.expand(t, "p0")?, kappa: self.price.kappa, clip: self.price.clip },
            caps: self.caps,
            numerics: self.numerics,
        };
        model.validate().map_err(config_error)?;
        Ok(model)
    }
}

fn config_error(e: Error) -> Error {
    match e {
        Error::Config(_) => e,
        other => Error::Config(other.to_string()),
    }
}

/// Fixed-point settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolveConfig {
    pub damping: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolveConfig {
    fn default() -> Self {
        let d = FixedPointOptions::default();
        Self { damping: d.damping, tol: d.tol, max_iter: d.max_iter }
    }
}

impl SolveConfig {
    pub fn options(&self) -> FixedPointOptions {
        FixedPointOptions { damping: self.damping, tol: self.tol, max_iter: self.max_iter, initial: None }
    }
}

/// Empirical-measure rate experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatesConfig {
    /// Sampled law; the model's initial law when absent.
    #[serde(default)]
    pub law: Option<LawConfig>,
    #[serde(default = "one")]
    pub dim: usize,
    pub n_values: Vec<usize>,
    pub reps: usize,
    pub seed: u64,
    #[serde(default = "default_xi")]
    pub xi: f64,
}

fn one() -> usize {
    1
}

fn default_xi() -> f64 {
    0.05
}

impl RatesConfig {
    pub fn sim(&self) -> SimConfig {
        SimConfig { n_values: self.n_values.clone(), reps: self.reps, seed: self.seed, xi: self.xi }
    }

    pub fn law(&self, model: &ModelSpec) -> Result<GridMeasure> {
        match &self.law {
            Some(l) => l.build(model.grid),
            None => Ok(model.initial.clone()),
        }
    }
}

/// Root of a config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    pub model: ModelConfig,
    #[serde(default)]
    pub solve: SolveConfig,
    #[serde(default)]
    pub simulate: Option<SimConfig>,
    #[serde(default)]
    pub rates: Option<RatesConfig>,
    #[serde(default)]
    pub oracle: OracleOptions,
}

impl RunConfig {
    /// Parses and checks the schema, then builds the model. Every failure is
    /// reported as [`Error::Config`].
    pub fn parse(text: &str) -> Result<(Self, ModelSpec)> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if cfg.version != SCHEMA_VERSION {
            return Err(Error::Config(format!("unsupported version {} (expected {SCHEMA_VERSION})", cfg.version)));
        }
        let s = &cfg.solve;
        if !(s.damping > 0.0 && s.damping <= 1.0) || !(s.tol >= 0.0) {
            return Err(Error::Config("solve: damping must lie in (0, 1] and tol >= 0".into()));
        }
        if let Some(sim) = &cfg.simulate {
            sim.validate().map_err(config_error)?;
        }
        if let Some(r) = &cfg.rates {
            r.sim().validate().map_err(config_error)?;
        }
        let model = cfg.model.build()?;
        Ok((cfg, model))
    }

    pub fn load(path: &std::path::Path) -> Result<(Self, ModelSpec)> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }
}
