//! The coupled system: backward dynamic programming in proximal form,
//! forward Kolmogorov propagation and the damped fixed-point iteration.

mod backward;
mod fixed_point;
mod forward;
mod oracle;
mod policy;
mod tree;

pub use backward::{backward_pass, Backward};
pub use fixed_point::{fixed_point, mix_beliefs, FixedPointOptions, MfgSolution};
pub use forward::{forward_pass, Forward};
pub use oracle::{dp_oracle, random_perturbation, OracleOptions, OracleReport};
pub use policy::Policy;
pub use tree::{evaluate_policy_tree, policy_tree, TREE_CAP};
