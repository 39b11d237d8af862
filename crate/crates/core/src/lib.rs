//! Controlled-sensing POMDPs with belief-dependent costs.
//!
//! The crate solves finite-state, finite-observation POMDPs on a discretized
//! belief simplex and certifies structural properties of the solutions on
//! concrete instances: concavity of the value function, convexity of stopping
//! sets, threshold policies for quickest change detection, positive
//! homogeneity of the relaxed value function, monotonicity in the monotone
//! likelihood ratio order, and myopic policy bounds under Blackwell dominance.
//!
//! States, actions and observations are 1-indexed in every public function
//! that takes or returns an index. Only finite observation alphabets are
//! supported.

pub mod costs;
pub mod error;
pub mod filter;
pub mod fixtures;
pub mod grid;
pub mod model;
pub mod quickest;
pub mod rng;
pub mod schema;
pub mod sim;
pub mod solver;
pub mod structure;

pub use costs::{concavity_probe, instantaneous_cost, performance_loss, NonlinearCost};
pub use error::{Error, Result};
pub use filter::{exact_posterior_oracle, filter_update, relaxed_update, FilterStep};
pub use grid::{build_grid, SimplexGrid};
pub use model::{
    uniform_belief, unit_belief, validate_model, Belief, ModelKind, PomdpModel, RelaxedBelief,
    ValidationReport, Violation,
};
pub use solver::{
    bellman_backup, extract_threshold, solve_discounted, solve_relaxed, solve_stopping, Policy,
    RelaxedValueFunction, Solution, SolverConfig, Threshold, ValueFunction,
};
pub use quickest::{build_qd_model, ks_cost_estimate, qd_threshold, KsEstimate, QdSpec, QdThreshold};
pub use sim::{compare_policies, evaluate_policy, BeliefPolicy, Comparison, EvalResult, Estimate};
pub use structure::{
    blackwell_factorize, conjecture_probe, fosd_decreasing_cost, is_tp2, is_ultrametric, matrix_root,
    mlr_geq, verify_concavity, verify_homogeneity, verify_mlr_monotone_value, verify_myopic_bound,
    verify_stopping_set_convex, BlackwellFactorization, OrderCheckReport, Witness,
};
