//! N-player closed-loop games driven by the mean-field feedback:
//! simulation, convergence-rate experiments and an exact evaluator of the
//! individual nested risk for tiny games.

mod exact;
mod sim;
mod stats;

pub use exact::{exact_small_game_eval, BeliefMode, SmallGame, EXACT_CAP};
pub use sim::{
    belief_gap_experiment, deltaell_gap_experiment, delta_ell, fournier_guillin_rate, simulate_closed_loop,
    stream_seed, ClosedLoop, SimConfig,
};
pub use stats::{fit_loglog, GapReport, GapRow, SlopeFit};
