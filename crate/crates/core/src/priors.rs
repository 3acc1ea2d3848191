//! Log prior densities for the RPS and the potential vector.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{PotentialVector, Rps};

/// Hyperparameters of the size-penalizing RPS prior `q(R) ∝ beta^(-alpha d |R|)`
/// and the independent Gaussian prior on coefficients.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriorConfig {
    pub alpha: f64,
    pub beta: f64,
    pub sigma2_p: f64,
}

impl PriorConfig {
    pub fn new(alpha: f64, beta: f64, sigma2_p: f64) -> Result<Self> {
        let cfg = Self {
            alpha,
            beta,
            sigma2_p,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0) || !self.alpha.is_finite() {
            return Err(Error::InvalidConfig(format!("alpha must be >= 0, got {}", self.alpha)));
        }
        if !(self.beta > 0.0) || !self.beta.is_finite() {
            return Err(Error::InvalidConfig(format!("beta must be > 0, got {}", self.beta)));
        }
        if !(self.sigma2_p > 0.0) || !self.sigma2_p.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "sigma2_p must be > 0, got {}",
                self.sigma2_p
            )));
        }
        Ok(())
    }

    /// `log q(R)` without the normalizer, i.e. `-alpha d |R| log beta`.
    pub fn log_rps_prior_unnormalized(&self, size: usize, d: usize) -> f64 {
        if self.alpha == 0.0 {
            return 0.0;
        }
        -self.alpha * d as f64 * self.beta.ln() * size as f64
    }
}

/// `log q(r_new) - log q(r_old)`; the normalizer cancels.
pub fn log_rps_prior_ratio(r_new: &Rps, r_old: &Rps, cfg: &PriorConfig, d: usize) -> f64 {
    if cfg.alpha == 0.0 {
        return 0.0;
    }
    let delta = r_new.len() as f64 - r_old.len() as f64;
    -cfg.alpha * d as f64 * cfg.beta.ln() * delta
}

/// Log density of the independent `N(0, sigma2_p)` prior over all coefficients.
pub fn log_theta_prior(theta: &PotentialVector, cfg: &PriorConfig) -> f64 {
    if theta.is_empty() {
        return 0.0;
    }
    let n = (theta.len() * theta.dim()) as f64;
    -0.5 * n * (2.0 * PI * cfg.sigma2_p).ln() - theta.squared_norm() / (2.0 * cfg.sigma2_p)
}
