//! Neighborhood selection for pairwise Markov random fields on 2-D lattices.
//!
//! A model is a [`Rps`] (relative position set) plus a [`PotentialVector`] of
//! pairwise coefficients. The crate provides the conditional and
//! pseudolikelihood computations, Gibbs simulation, a reversible jump sampler
//! over `(RPS, theta)` targeting the pseudoposterior, chain summaries, and a
//! stochastic-approximation MLE with the Δ texture distance.

pub mod error;
pub mod io;
pub mod lattice;
pub mod mle;
pub mod model;
pub mod priors;
pub mod rjmcmc;
pub mod seed;
pub mod summaries;

pub use error::{Error, Result};
pub use lattice::{
    free_dim, pair_counts, theta_dot_counts, Field, Norm, PairCounts, Position, PotentialVector,
    Rps,
};
pub use mle::{delta_metric, sa_fit, sa_fit_moments, GammaSchedule, SaConfig, StatScale};
pub use model::{
    conditional_distribution, exact_log_likelihood, gibbs_sweep, log_pseudolikelihood,
    sample_field,
};
pub use priors::{log_rps_prior_ratio, log_theta_prior, PriorConfig};
pub use rjmcmc::{run_chain, ChainRecord, ChainState, MoveKind, TuningConfig};
pub use seed::{derive_seed, rng_from_seed, SimRng};
pub use summaries::{inclusion_probabilities, model_frequencies, sparse_estimate, InclusionMap};
