//! Reversible jump sampler over (RPS, potentials) targeting the pseudoposterior.
//!
//! Five move types are mixed with RPS-dependent probabilities: a Gaussian
//! random walk on the coefficients, birth/death of one position, a position
//! swap that carries its subvector, and a split/merge pair that adds or
//! removes a position while conserving the coefficient sum `sum_r theta_r`.

mod moves;
mod proposals;
mod sampler;

pub use moves::{move_probabilities, MoveKind, MoveProbabilities, MoveWeights};
pub use proposals::{
    birth, death, log_normal_density, merge_with, propose, propose_birth_death, propose_merge,
    propose_random_walk, propose_split, propose_swap, random_walk_with, split_with,
    symmetric_dirichlet, swap_with, Proposal, SplitMergeRatio,
};
pub use sampler::{
    acceptance_log_ratio, acceptance_log_ratio_cached, run_chain, Chain, ChainRecord,
    FlatLikelihood, LogLikelihood, PseudoLikelihood, TuningConfig,
};

use crate::error::{Error, Result};
use crate::lattice::{PotentialVector, Rps};

/// A point `(R, theta)` of the chain; `theta` is keyed by exactly `R`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainState {
    rps: Rps,
    theta: PotentialVector,
}

impl ChainState {
    pub fn new(rps: Rps, theta: PotentialVector) -> Result<Self> {
        if !theta.matches(&rps) {
            return Err(Error::PositionMismatch);
        }
        Ok(Self { rps, theta })
    }

    pub fn from_theta(theta: PotentialVector) -> Self {
        Self {
            rps: theta.rps(),
            theta,
        }
    }

    pub fn zeros(rps: Rps, num_labels: usize) -> Self {
        let theta = PotentialVector::zeros(&rps, num_labels);
        Self { rps, theta }
    }

    pub fn rps(&self) -> &Rps {
        &self.rps
    }

    pub fn theta(&self) -> &PotentialVector {
        &self.theta
    }

    pub fn into_theta(self) -> PotentialVector {
        self.theta
    }

    pub fn num_labels(&self) -> usize {
        self.theta.num_labels()
    }

    pub fn dim(&self) -> usize {
        self.theta.dim()
    }
}
