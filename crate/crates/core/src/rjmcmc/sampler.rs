use rand::Rng;
use serde::{Deserialize, Serialize};

use super::moves::{move_probabilities, MoveKind, MoveProbabilities, MoveWeights};
use super::proposals::{propose, Proposal, SplitMergeRatio};
use super::ChainState;
use crate::error::{Error, Result};
use crate::lattice::{Field, Position, PotentialVector, Rps};
use crate::model::Interactions;
use crate::priors::{log_theta_prior, PriorConfig};
use crate::seed::SimRng;

/// Proposal variances, move weights and run lengths of one chain.
/// Missing fields deserialize to [`TuningConfig::default`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TuningConfig {
    pub sigma2_w: f64,
    pub sigma2_bd: f64,
    pub sigma2_s: f64,
    pub nu: f64,
    pub weights: MoveWeights,
    pub warmup: usize,
    pub iterations: usize,
    pub split_merge_ratio: SplitMergeRatio,
}

impl Default for TuningConfig {
    fn default() -> Self {
        Self {
            sigma2_w: 0.005,
            sigma2_bd: 0.15,
            sigma2_s: 0.15,
            nu: 0.1,
            weights: MoveWeights::default(),
            warmup: 5000,
            iterations: 500_000,
            split_merge_ratio: SplitMergeRatio::Derived,
        }
    }
}

impl TuningConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("sigma2_w", self.sigma2_w),
            ("sigma2_bd", self.sigma2_bd),
            ("sigma2_s", self.sigma2_s),
            ("nu", self.nu),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidConfig(format!("{name} must be > 0, got {v}")));
            }
        }
        self.weights.validate()
    }
}

/// Log likelihood (or surrogate) of the potentials given fixed data.
pub trait LogLikelihood: Sync {
    fn num_labels(&self) -> usize;
    fn log_likelihood(&self, theta: &PotentialVector) -> f64;
}

impl<T: LogLikelihood + ?Sized> LogLikelihood for &T {
    fn num_labels(&self) -> usize {
        (**self).num_labels()
    }

    fn log_likelihood(&self, theta: &PotentialVector) -> f64 {
        (**self).log_likelihood(theta)
    }
}

/// Log pseudolikelihood of an observed field.
#[derive(Clone, Debug)]
pub struct PseudoLikelihood {
    field: Field,
}

impl PseudoLikelihood {
    pub fn new(field: Field) -> Self {
        Self { field }
    }

    pub fn field(&self) -> &Field {
        &self.field
    }
}

impl LogLikelihood for PseudoLikelihood {
    fn num_labels(&self) -> usize {
        self.field.num_labels()
    }

    fn log_likelihood(&self, theta: &PotentialVector) -> f64 {
        Interactions::new(theta).log_pseudolikelihood(&self.field)
    }
}

/// Constant likelihood; the chain then targets the prior.
#[derive(Clone, Copy, Debug)]
pub struct FlatLikelihood {
    pub num_labels: usize,
}

impl LogLikelihood for FlatLikelihood {
    fn num_labels(&self) -> usize {
        self.num_labels
    }

    fn log_likelihood(&self, _theta: &PotentialVector) -> f64 {
        0.0
    }
}

fn log_prior(state: &ChainState, prior: &PriorConfig) -> f64 {
    prior.log_rps_prior_unnormalized(state.rps().len(), state.dim())
        + log_theta_prior(state.theta(), prior)
}

/// Log Metropolis-Hastings ratio with both log likelihoods already known.
///
/// The reverse move's selection probability is taken at the proposed RPS.
pub fn acceptance_log_ratio_cached(
    proposal: &Proposal,
    old_state: &ChainState,
    old_log_lik: f64,
    new_log_lik: f64,
    prior: &PriorConfig,
    probs_old: &MoveProbabilities,
    probs_new: &MoveProbabilities,
) -> f64 {
    let kind = proposal.move_kind;
    let p_fwd = probs_old.get(kind);
    let p_rev = probs_new.get(kind.inverse());
    if p_rev == 0.0 {
        return f64::NEG_INFINITY;
    }
    let new = &proposal.new_state;
    let log_target_diff =
        (log_prior(new, prior) - log_prior(old_state, prior)) + (new_log_lik - old_log_lik);
    let log_p_diff = if p_rev == p_fwd { 0.0 } else { p_rev.ln() - p_fwd.ln() };
    log_target_diff + log_p_diff + proposal.log_kernel_ratio
}

pub fn acceptance_log_ratio<L: LogLikelihood + ?Sized>(
    proposal: &Proposal,
    old_state: &ChainState,
    likelihood: &L,
    prior: &PriorConfig,
    probs_old: &MoveProbabilities,
    probs_new: &MoveProbabilities,
) -> f64 {
    acceptance_log_ratio_cached(
        proposal,
        old_state,
        likelihood.log_likelihood(old_state.theta()),
        likelihood.log_likelihood(proposal.new_state.theta()),
        prior,
        probs_old,
        probs_new,
    )
}

/// One iteration of the chain, recorded after the accept/reject step.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainRecord {
    pub iteration: i64,
    pub move_kind: MoveKind,
    pub accepted: bool,
    pub log_pseudoposterior: f64,
    pub state: ChainState,
}

#[derive(Serialize, Deserialize)]
struct RecordLine {
    iter: i64,
    #[serde(rename = "move")]
    move_kind: MoveKind,
    accepted: bool,
    log_ppost: f64,
    rps: Vec<Position>,
    theta: Vec<f64>,
}

impl ChainRecord {
    /// One JSON object, no trailing newline.
    pub fn to_json_line(&self) -> String {
        let line = RecordLine {
            iter: self.iteration,
            move_kind: self.move_kind,
            accepted: self.accepted,
            log_ppost: self.log_pseudoposterior,
            rps: self.state.rps().positions().to_vec(),
            theta: self.state.theta().to_flat(),
        };
        serde_json::to_string(&line).expect("record serialization cannot fail")
    }

    pub fn from_json_line(line: &str, num_labels: usize) -> Result<Self> {
        let rec: RecordLine = serde_json::from_str(line)
            .map_err(|e| Error::InvalidField(format!("bad chain record: {e}")))?;
        let rps = Rps::new(rec.rps)?;
        let theta = PotentialVector::from_flat(&rps, num_labels, &rec.theta)?;
        Ok(Self {
            iteration: rec.iter,
            move_kind: rec.move_kind,
            accepted: rec.accepted,
            log_pseudoposterior: rec.log_ppost,
            state: ChainState::new(rps, theta)?,
        })
    }
}

/// Lazily generated chain; each `next` performs one Metropolis-Hastings step.
pub struct Chain<L> {
    likelihood: L,
    rps_max: Rps,
    prior: PriorConfig,
    tuning: TuningConfig,
    state: ChainState,
    log_lik: f64,
    rng: SimRng,
    next_iter: i64,
    last_iter: i64,
    failed: bool,
}

impl<L: LogLikelihood> Chain<L> {
    pub fn state(&self) -> &ChainState {
        &self.state
    }

    fn step(&mut self) -> Result<ChainRecord> {
        let iteration = self.next_iter;
        let warmup = iteration <= 0;
        let weights = &self.tuning.weights;
        let probs_old = if warmup {
            MoveProbabilities::only(MoveKind::RandomWalk)
        } else {
            move_probabilities(self.state.rps(), &self.rps_max, weights)
        };
        let kind = probs_old.sample(&mut self.rng);
        let proposal = propose(kind, &self.state, &self.rps_max, &self.tuning, &mut self.rng)?;
        let probs_new = if warmup {
            probs_old
        } else {
            move_probabilities(proposal.new_state.rps(), &self.rps_max, weights)
        };
        let new_log_lik = self.likelihood.log_likelihood(proposal.new_state.theta());
        let ratio = acceptance_log_ratio_cached(
            &proposal,
            &self.state,
            self.log_lik,
            new_log_lik,
            &self.prior,
            &probs_old,
            &probs_new,
        );
        let u: f64 = self.rng.random();
        let accepted = u.ln() < ratio;
        if accepted {
            self.state = proposal.new_state;
            self.log_lik = new_log_lik;
        }
        Ok(ChainRecord {
            iteration,
            move_kind: kind,
            accepted,
            log_pseudoposterior: log_prior(&self.state, &self.prior) + self.log_lik,
            state: self.state.clone(),
        })
    }
}

impl<L: LogLikelihood> Iterator for Chain<L> {
    type Item = Result<ChainRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed || self.next_iter > self.last_iter {
            return None;
        }
        let out = self.step();
        self.next_iter += 1;
        if out.is_err() {
            self.failed = true;
        }
        Some(out)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = (self.last_iter - self.next_iter + 1).max(0) as usize;
        (n, Some(n))
    }
}

/// Starts a chain at `initial_state`: `tuning.warmup` random-walk-only
/// iterations numbered `-(warmup-1)..=0`, then `tuning.iterations` mixture
/// iterations numbered from 1.
pub fn run_chain<L: LogLikelihood>(
    likelihood: L,
    rps_max: &Rps,
    prior: &PriorConfig,
    tuning: &TuningConfig,
    initial_state: ChainState,
    rng: SimRng,
) -> Result<Chain<L>> {
    prior.validate()?;
    tuning.validate()?;
    if rps_max.is_empty() {
        return Err(Error::EmptyRps);
    }
    if !initial_state.rps().is_subset_of(rps_max) {
        return Err(Error::InvalidConfig("initial RPS is not a subset of R_max".into()));
    }
    if initial_state.num_labels() != likelihood.num_labels() {
        return Err(Error::LabelMismatch(initial_state.num_labels(), likelihood.num_labels()));
    }
    if tuning.warmup > 0 && initial_state.rps().is_empty() {
        return Err(Error::InvalidConfig("random-walk warm-up needs a non-empty initial RPS".into()));
    }
    let log_lik = likelihood.log_likelihood(initial_state.theta());
    Ok(Chain {
        likelihood,
        rps_max: rps_max.clone(),
        prior: *prior,
        tuning: tuning.clone(),
        state: initial_state,
        log_lik,
        rng,
        next_iter: 1 - tuning.warmup as i64,
        last_iter: tuning.iterations as i64,
        failed: false,
    })
}
