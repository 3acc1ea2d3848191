//! Stochastic-approximation maximum likelihood for a fixed RPS and the
//! log-distance texture metric between a target field and model samples.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{pair_counts, Field, PotentialVector, Rps};
use crate::model::Interactions;
use crate::seed::{derive_seed, rng_from_seed};

/// How the statistic gap `T(z*) - T(z_t)` is scaled before the update.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatScale {
    /// Divide by the number of sites, making the step size independent of
    /// lattice size.
    #[default]
    PerSite,
    /// Use raw pair counts.
    Raw,
}

/// Step-size sequence `gamma_t`, `t = 0..steps`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum GammaSchedule {
    /// `(steps - t) / steps`.
    #[default]
    Linear,
    /// `a / (1 + t / t0)`.
    Harmonic { a: f64, t0: f64 },
    /// Explicit values; at least `steps` of them.
    Explicit { values: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SaConfig {
    pub steps: usize,
    #[serde(default)]
    pub gamma: GammaSchedule,
    pub sweeps_per_step: usize,
    #[serde(default)]
    pub scale: StatScale,
    pub seed: u64,
}

impl SaConfig {
    pub fn new(steps: usize, sweeps_per_step: usize, seed: u64) -> Self {
        Self {
            steps,
            gamma: GammaSchedule::Linear,
            sweeps_per_step,
            scale: StatScale::PerSite,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::InvalidConfig("SA steps must be >= 1".into()));
        }
        if self.sweeps_per_step == 0 {
            return Err(Error::InvalidConfig("sweeps_per_step must be >= 1".into()));
        }
        match &self.gamma {
            GammaSchedule::Linear => {}
            GammaSchedule::Harmonic { a, t0 } => {
                if !(*a > 0.0 && *t0 > 0.0) || !a.is_finite() || !t0.is_finite() {
                    return Err(Error::InvalidConfig("harmonic gamma needs a > 0, t0 > 0".into()));
                }
            }
            GammaSchedule::Explicit { values } => {
                if values.len() < self.steps {
                    return Err(Error::InvalidConfig(format!(
                        "gamma schedule has {} values for {} steps",
                        values.len(),
                        self.steps
                    )));
                }
                if values.iter().any(|g| !(*g > 0.0) || !g.is_finite()) {
                    return Err(Error::InvalidConfig("gamma values must be > 0".into()));
                }
                if values.windows(2).any(|w| w[1] > w[0]) {
                    return Err(Error::InvalidConfig("gamma schedule must be non-increasing".into()));
                }
            }
        }
        Ok(())
    }

    pub fn gamma_at(&self, t: usize) -> f64 {
        match &self.gamma {
            GammaSchedule::Linear => default_gamma(t, self.steps),
            GammaSchedule::Harmonic { a, t0 } => a / (1.0 + t as f64 / t0),
            GammaSchedule::Explicit { values } => values[t],
        }
    }
}

impl Default for SaConfig {
    fn default() -> Self {
        Self::new(1500, 5, 0)
    }
}

/// `(steps - t) / steps`.
pub fn default_gamma(t: usize, steps: usize) -> f64 {
    (steps - t) as f64 / steps as f64
}

/// Fits `theta` on `rps` to the pair counts of `target`, starting from zero.
pub fn sa_fit(target: &Field, rps: &Rps, cfg: &SaConfig) -> Result<PotentialVector> {
    let stats = pair_counts(target, rps).free_vector();
    sa_fit_moments(&stats, target.n1(), target.n2(), target.max_label(), rps, cfg)
}

/// Robbins-Monro iteration `theta += gamma_t (T* - T(z_t)) / scale` toward the
/// parameter whose expected free pair counts equal `target_stats`.
///
/// `z_t` is a single field carried across steps and advanced by
/// `cfg.sweeps_per_step` Gibbs sweeps under the current `theta`; it starts
/// uniform, which is an exact draw at `theta = 0`.
pub fn sa_fit_moments(
    target_stats: &[f64],
    n1: usize,
    n2: usize,
    max_label: usize,
    rps: &Rps,
    cfg: &SaConfig,
) -> Result<PotentialVector> {
    cfg.validate()?;
    let k = max_label + 1;
    let mut theta = PotentialVector::zeros(rps, k);
    if target_stats.len() != theta.dim() * rps.len() {
        return Err(Error::DimensionMismatch);
    }
    let scale = match cfg.scale {
        StatScale::PerSite => (n1 * n2) as f64,
        StatScale::Raw => 1.0,
    };
    let mut rng = rng_from_seed(cfg.seed);
    let mut field = Field::uniform_random(n1, n2, max_label, &mut rng)?;
    let mut flat = theta.to_flat();
    for t in 0..cfg.steps {
        let inter = Interactions::new(&theta);
        for _ in 0..cfg.sweeps_per_step {
            inter.sweep(&mut field, &mut rng);
        }
        let stats = pair_counts(&field, rps).free_vector();
        let g = cfg.gamma_at(t) / scale;
        for ((x, target), s) in flat.iter_mut().zip(target_stats).zip(&stats) {
            *x += g * (target - s);
        }
        theta = PotentialVector::from_flat(rps, k, &flat)?;
    }
    Ok(theta)
}

/// Draws `count` independent fields, each from a uniform start followed by
/// `sweeps` Gibbs sweeps, in parallel. Sample `i` uses the child seed
/// `derive_seed(master_seed, "{label}/{i}")`, so results do not depend on
/// thread scheduling.
#[allow(clippy::too_many_arguments)]
pub fn simulate_samples(
    n1: usize,
    n2: usize,
    max_label: usize,
    rps: &Rps,
    theta: &PotentialVector,
    sweeps: usize,
    count: usize,
    master_seed: u64,
    label: &str,
) -> Result<Vec<Field>> {
    (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_from_seed(derive_seed(master_seed, &format!("{label}/{i}")));
            crate::model::sample_field(n1, n2, max_label, rps, theta, sweeps, &mut rng)
        })
        .collect()
}

/// Log Euclidean distance between the full pair counts of `target` and the
/// mean pair counts of `samples` over every position of `rps_max`.
///
/// Zero distance gives `f64::NEG_INFINITY`.
pub fn delta_metric(samples: &[Field], target: &Field, rps_max: &Rps) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptySampleSet);
    }
    if samples.iter().any(|s| !s.same_shape(target)) {
        return Err(Error::DimensionMismatch);
    }
    let rho_target = pair_counts(target, rps_max).full_vector();
    let mut mean = vec![0.0; rho_target.len()];
    for s in samples {
        for (m, c) in mean.iter_mut().zip(pair_counts(s, rps_max).full_vector()) {
            *m += c;
        }
    }
    let n = samples.len() as f64;
    let ss: f64 = mean
        .iter()
        .zip(&rho_target)
        .map(|(m, t)| (t - m / n).powi(2))
        .sum();
    Ok(ss.sqrt().ln())
}
