//! Discrete-time mean field games with risk-averse agents on a 1-D state
//! space.
//!
//! The crate is organised bottom-up:
//!
//! * [`measure`]: grids, grid/atom probability measures, pushforward,
//!   convolution, rebinning and Wasserstein-1 distances (exact 1-D and a
//!   transportation simplex for 2-D atom clouds).
//! * [`convex`]: piecewise-linear convex functions with exact proximal
//!   operator and Moreau envelope.
//! * [`risk`]: density-band ambiguity sets, worst-case expectations, the
//!   smoothing operator `Υ` and nested risk on scenario trees.
//! * [`model`] and [`solver`]: problem data, backward dynamic programming,
//!   forward Kolmogorov propagation and the damped fixed-point loop.
//! * [`nplayer`]: closed-loop N-player simulation and convergence-rate
//!   experiments.
//! * [`config`] and [`io`]: JSON run configuration and CSV artifacts.

pub mod config;
pub mod convex;
pub mod error;
pub mod io;
pub mod measure;
pub mod model;
pub mod nplayer;
pub mod par;
pub mod risk;
pub mod solver;

pub use error::{Error, Result};
