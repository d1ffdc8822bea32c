//! Exact analysis of finite-state Markov chains for MCMC efficiency.
//!
//! The crate computes asymptotic variances through the fundamental matrix,
//! evaluates hitting and commute times, compares kernels in the
//! "uniformly better" order, builds antisymmetric cycle perturbations, and
//! certifies that reversible chains on trees cannot be improved.
//!
//! States are indexed `0..n` throughout.

pub mod analysis;
pub mod certify;
pub mod chain;
pub mod cli;
pub mod dominance;
pub mod error;
pub mod generators;
pub mod io;
pub mod perturbation;
pub mod simulate;
pub mod tol;

pub use analysis::{
    asymptotic_variance, commute_time, fundamental_matrix, hit_before_probability, hitting_time_table,
    hitting_times, mean_hitting_from_stationary, pair_function, pair_quadratic_form, pi_inner,
    return_race_probability, variance_form, FundamentalMatrix, HittingTimeTable, VarianceForm,
};
pub use certify::{
    assert_unimprovable, check_preconditions, peel_certify, CertificateTrace, Condition, PeelStep,
    Verdict,
};
pub use chain::{
    find_leaves, is_acyclic, stationary_distribution, support_graph, validate_chain, ChainGraph,
    Distribution, TransitionMatrix, ValidationReport,
};
pub use dominance::{commute_dominance_check, dominance_compare, improvement_search, DominanceVerdict};
pub use error::{ChainError, Result};
pub use perturbation::{cycle_flow, find_cycle, max_epsilon, perturb, CycleFlow};
pub use simulate::{batch_means_variance, sample_path, VarianceEstimate};
