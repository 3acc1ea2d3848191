use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{ChainState, MoveKind, TuningConfig};
use crate::error::{Error, Result};
use crate::lattice::{Position, Rps};

/// Smallest Dirichlet weight handed out; keeps later log-densities finite.
const MIN_WEIGHT: f64 = 1e-300;

/// Which closed form to use for the split/merge kernel ratio.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitMergeRatio {
    /// `|R_max \ R| / (|R'| N_d(theta'_{r*}; 0, sigma2_s I))`, from the
    /// selection probabilities and the Gaussian draw of the new subvector.
    #[default]
    Derived,
    /// Gaussian density as a multiplicative factor instead of a divisor.
    Printed,
}

/// A proposed state and `log kappa_{reverse}(old | new) - log kappa(new | old)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Proposal {
    pub new_state: ChainState,
    pub log_kernel_ratio: f64,
    pub move_kind: MoveKind,
}

/// Log density of `N(0, var I)` at `x`.
pub fn log_normal_density(x: &[f64], var: f64) -> f64 {
    let ss: f64 = x.iter().map(|v| v * v).sum();
    -0.5 * x.len() as f64 * (2.0 * PI * var).ln() - ss / (2.0 * var)
}

fn gaussian_vec<R: Rng + ?Sized>(n: usize, var: f64, rng: &mut R) -> Vec<f64> {
    let sd = var.sqrt();
    (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            z * sd
        })
        .collect()
}

fn pick<R: Rng + ?Sized>(items: &[Position], rng: &mut R) -> Position {
    items[rng.random_range(0..items.len())]
}

/// Weights from a symmetric Dirichlet(`nu`) on `k` cells.
///
/// Gamma variates are drawn on the log scale (`log G(nu+1) + log(U)/nu` for
/// `nu < 1`) so small concentrations do not underflow to an all-zero draw.
pub fn symmetric_dirichlet<R: Rng + ?Sized>(k: usize, nu: f64, rng: &mut R) -> Vec<f64> {
    if k == 1 {
        return vec![1.0];
    }
    let boosted = nu < 1.0;
    let gamma = Gamma::new(if boosted { nu + 1.0 } else { nu }, 1.0)
        .expect("Dirichlet concentration validated as positive");
    let logs: Vec<f64> = (0..k)
        .map(|_| {
            let g: f64 = gamma.sample(rng);
            if boosted {
                let u: f64 = 1.0 - rng.random::<f64>();
                g.ln() + u.ln() / nu
            } else {
                g.ln()
            }
        })
        .collect();
    let m = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logs.iter().map(|l| (l - m).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| (e / total).max(MIN_WEIGHT)).collect()
}

/// Random walk with explicit noise, laid out like [`crate::lattice::PotentialVector::to_flat`].
pub fn random_walk_with(state: &ChainState, noise: &[f64]) -> Result<Proposal> {
    if state.rps().is_empty() {
        return Err(Error::EmptyRps);
    }
    let mut theta = state.theta().clone();
    let d = theta.dim();
    if noise.len() != d * theta.len() {
        return Err(Error::InvalidPotential("noise length does not match theta".into()));
    }
    for ((_, block), chunk) in theta.blocks_mut().zip(noise.chunks(d)) {
        for (t, e) in block.iter_mut().zip(chunk) {
            *t += e;
        }
    }
    Ok(Proposal {
        new_state: ChainState {
            rps: state.rps().clone(),
            theta,
        },
        log_kernel_ratio: 0.0,
        move_kind: MoveKind::RandomWalk,
    })
}

pub fn propose_random_walk<R: Rng + ?Sized>(
    state: &ChainState,
    sigma2_w: f64,
    rng: &mut R,
) -> Result<Proposal> {
    if state.rps().is_empty() {
        return Err(Error::EmptyRps);
    }
    let noise = gaussian_vec(state.dim() * state.rps().len(), sigma2_w, rng);
    random_walk_with(state, &noise)
}

/// Adds `r` with subvector `block`. The reverse death is deterministic, so
/// the kernel ratio is `-log N_d(block; 0, sigma2_bd I)`.
pub fn birth(
    state: &ChainState,
    rps_max: &Rps,
    r: Position,
    block: Vec<f64>,
    sigma2_bd: f64,
) -> Result<Proposal> {
    if !rps_max.contains(r) || state.rps().contains(r) {
        return Err(Error::InvalidRpsForMove("birth"));
    }
    let log_kernel_ratio = -log_normal_density(&block, sigma2_bd);
    let mut theta = state.theta().clone();
    theta.insert(r, block)?;
    Ok(Proposal {
        new_state: ChainState {
            rps: state.rps().with(r)?,
            theta,
        },
        log_kernel_ratio,
        move_kind: MoveKind::BirthDeath,
    })
}

/// Removes `r`; the reverse birth would have to redraw its subvector.
pub fn death(state: &ChainState, r: Position, sigma2_bd: f64) -> Result<Proposal> {
    let mut theta = state.theta().clone();
    let block = theta.remove(r).ok_or(Error::InvalidRpsForMove("death"))?;
    Ok(Proposal {
        new_state: ChainState {
            rps: state.rps().without(r),
            theta,
        },
        log_kernel_ratio: log_normal_density(&block, sigma2_bd),
        move_kind: MoveKind::BirthDeath,
    })
}

/// Picks `r*` uniformly on `R_max`: death if present, birth otherwise.
pub fn propose_birth_death<R: Rng + ?Sized>(
    state: &ChainState,
    rps_max: &Rps,
    sigma2_bd: f64,
    rng: &mut R,
) -> Result<Proposal> {
    let r = pick(rps_max.positions(), rng);
    if state.rps().contains(r) {
        death(state, r, sigma2_bd)
    } else {
        let block = gaussian_vec(state.dim(), sigma2_bd, rng);
        birth(state, rps_max, r, block, sigma2_bd)
    }
}

/// Replaces `r_in` by `r_out`, carrying the subvector unchanged.
pub fn swap_with(
    state: &ChainState,
    rps_max: &Rps,
    r_in: Position,
    r_out: Position,
) -> Result<Proposal> {
    let rps = state.rps();
    if !rps.contains(r_in) || rps.contains(r_out) || !rps_max.contains(r_out) {
        return Err(Error::InvalidRpsForMove("swap"));
    }
    let mut theta = state.theta().clone();
    let block = theta.remove(r_in).ok_or(Error::InvalidRpsForMove("swap"))?;
    theta.insert(r_out, block)?;
    Ok(Proposal {
        new_state: ChainState {
            rps: rps.without(r_in).with(r_out)?,
            theta,
        },
        log_kernel_ratio: 0.0,
        move_kind: MoveKind::Swap,
    })
}

pub fn propose_swap<R: Rng + ?Sized>(
    state: &ChainState,
    rps_max: &Rps,
    rng: &mut R,
) -> Result<Proposal> {
    let outside = rps_max.difference(state.rps());
    if state.rps().is_empty() || outside.is_empty() {
        return Err(Error::InvalidRpsForMove("swap"));
    }
    let r_in = pick(state.rps().positions(), rng);
    let r_out = pick(&outside, rng);
    swap_with(state, rps_max, r_in, r_out)
}

fn split_merge_log_ratio(
    outside_before: usize,
    size_after: usize,
    new_block: &[f64],
    sigma2_s: f64,
    form: SplitMergeRatio,
) -> f64 {
    let selection = (outside_before as f64).ln() - (size_after as f64).ln();
    let gauss = log_normal_density(new_block, sigma2_s);
    match form {
        SplitMergeRatio::Derived => selection - gauss,
        SplitMergeRatio::Printed => selection + gauss,
    }
}

/// Split with explicit randomness: adds `r_star` with subvector `block` and
/// sets `theta'_r = theta_r - w_r * block` for every current `r`, with
/// `weights` aligned to the current RPS order.
pub fn split_with(
    state: &ChainState,
    rps_max: &Rps,
    r_star: Position,
    block: Vec<f64>,
    weights: &[f64],
    sigma2_s: f64,
    form: SplitMergeRatio,
) -> Result<Proposal> {
    let rps = state.rps();
    if rps.is_empty() || rps.len() >= rps_max.len() {
        return Err(Error::InvalidRpsForMove("split"));
    }
    if rps.contains(r_star) || !rps_max.contains(r_star) || weights.len() != rps.len() {
        return Err(Error::InvalidRpsForMove("split"));
    }
    let outside_before = rps_max.len() - rps.len();
    let mut theta = state.theta().clone();
    for ((_, sub), w) in theta.blocks_mut().zip(weights) {
        for (t, u) in sub.iter_mut().zip(&block) {
            *t -= w * u;
        }
    }
    let log_kernel_ratio = split_merge_log_ratio(outside_before, rps.len() + 1, &block, sigma2_s, form);
    theta.insert(r_star, block)?;
    Ok(Proposal {
        new_state: ChainState {
            rps: rps.with(r_star)?,
            theta,
        },
        log_kernel_ratio,
        move_kind: MoveKind::Split,
    })
}

pub fn propose_split<R: Rng + ?Sized>(
    state: &ChainState,
    rps_max: &Rps,
    sigma2_s: f64,
    nu: f64,
    form: SplitMergeRatio,
    rng: &mut R,
) -> Result<Proposal> {
    let outside = rps_max.difference(state.rps());
    if state.rps().is_empty() || outside.is_empty() {
        return Err(Error::InvalidRpsForMove("split"));
    }
    let r_star = pick(&outside, rng);
    let block = gaussian_vec(state.dim(), sigma2_s, rng);
    let weights = symmetric_dirichlet(state.rps().len(), nu, rng);
    split_with(state, rps_max, r_star, block, &weights, sigma2_s, form)
}

/// Merge with explicit randomness: removes `r_star` and adds
/// `w_r * theta_{r_star}` to every remaining `r` (weights in remaining-RPS order).
pub fn merge_with(
    state: &ChainState,
    rps_max: &Rps,
    r_star: Position,
    weights: &[f64],
    sigma2_s: f64,
    form: SplitMergeRatio,
) -> Result<Proposal> {
    let rps = state.rps();
    if rps.len() < 2 || !rps.contains(r_star) || weights.len() != rps.len() - 1 {
        return Err(Error::InvalidRpsForMove("merge"));
    }
    let mut theta = state.theta().clone();
    let merged = theta.remove(r_star).ok_or(Error::InvalidRpsForMove("merge"))?;
    for ((_, sub), w) in theta.blocks_mut().zip(weights) {
        for (t, u) in sub.iter_mut().zip(&merged) {
            *t += w * u;
        }
    }
    let new_rps = rps.without(r_star);
    let outside_after = rps_max.len() - new_rps.len();
    let log_kernel_ratio =
        -split_merge_log_ratio(outside_after, rps.len(), &merged, sigma2_s, form);
    Ok(Proposal {
        new_state: ChainState {
            rps: new_rps,
            theta,
        },
        log_kernel_ratio,
        move_kind: MoveKind::Merge,
    })
}

pub fn propose_merge<R: Rng + ?Sized>(
    state: &ChainState,
    rps_max: &Rps,
    sigma2_s: f64,
    nu: f64,
    form: SplitMergeRatio,
    rng: &mut R,
) -> Result<Proposal> {
    if state.rps().len() < 2 {
        return Err(Error::InvalidRpsForMove("merge"));
    }
    let r_star = pick(state.rps().positions(), rng);
    let weights = symmetric_dirichlet(state.rps().len() - 1, nu, rng);
    merge_with(state, rps_max, r_star, &weights, sigma2_s, form)
}

/// Draws a proposal of the given kind with the tuning's variances.
pub fn propose<R: Rng + ?Sized>(
    kind: MoveKind,
    state: &ChainState,
    rps_max: &Rps,
    tuning: &TuningConfig,
    rng: &mut R,
) -> Result<Proposal> {
    match kind {
        MoveKind::RandomWalk => propose_random_walk(state, tuning.sigma2_w, rng),
        MoveKind::BirthDeath => propose_birth_death(state, rps_max, tuning.sigma2_bd, rng),
        MoveKind::Swap => propose_swap(state, rps_max, rng),
        MoveKind::Split => propose_split(
            state,
            rps_max,
            tuning.sigma2_s,
            tuning.nu,
            tuning.split_merge_ratio,
            rng,
        ),
        MoveKind::Merge => propose_merge(
            state,
            rps_max,
            tuning.sigma2_s,
            tuning.nu,
            tuning.split_merge_ratio,
            rng,
        ),
    }
}
