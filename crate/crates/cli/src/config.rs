//! TOML run configuration shared by every subcommand.
//!
//! One file may hold sections for several commands; each command reads only
//! the sections it needs. Relative paths are resolved against the working
//! directory.

use std::path::{Path, PathBuf};

use mrfsel::lattice::{Norm, Position, PotentialVector, Rps};
use mrfsel::mle::{GammaSchedule, SaConfig, StatScale};
use mrfsel::priors::PriorConfig;
use mrfsel::rjmcmc::TuningConfig;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lattice: Option<LatticeConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimulateConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rjmcmc: Option<RjmcmcConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summarize: Option<SummarizeConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<DeltaConfig>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeConfig {
    pub n1: usize,
    pub n2: usize,
    pub max_label: usize,
}

/// A relative position set: explicit offsets, every offset within a
/// radius, or an RPS file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RpsSpec {
    Positions(Vec<Position>),
    Radius {
        radius: f64,
        #[serde(default)]
        norm: Norm,
    },
    File {
        file: PathBuf,
    },
}

impl RpsSpec {
    pub fn resolve(&self) -> Result<Rps, CliError> {
        match self {
            RpsSpec::Positions(ps) => Rps::new(ps.iter().copied()).map_err(CliError::config),
            RpsSpec::Radius { radius, norm } => {
                Rps::max_distance(*radius, *norm).map_err(CliError::config)
            }
            RpsSpec::File { file } => mrfsel::io::read_rps(file).map_err(CliError::runtime),
        }
    }

    /// Validates everything that can be checked without touching files.
    fn check(&self, what: &str) -> Result<(), CliError> {
        match self {
            RpsSpec::File { .. } => Ok(()),
            other => other
                .resolve()
                .map(|_| ())
                .map_err(|e| CliError::Config(format!("{what}: {e}"))),
        }
    }
}

/// Generating model for `simulate`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "template", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    /// All coefficients zero: i.i.d. uniform labels.
    Zero { rps: Vec<Position> },
    /// One value per listed position on every off-diagonal pair, zero on the
    /// diagonal.
    OffDiagonal { rps: Vec<Position>, values: Vec<f64> },
    /// Coefficients from a `dr1,dr2,a,b,value` CSV file.
    Csv { file: PathBuf },
}

impl ModelConfig {
    fn check(&self) -> Result<(), CliError> {
        match self {
            ModelConfig::Zero { rps } => Rps::new(rps.iter().copied())
                .map(|_| ())
                .map_err(|e| CliError::Config(format!("model.rps: {e}"))),
            ModelConfig::OffDiagonal { rps, values } => {
                Rps::new(rps.iter().copied())
                    .map_err(|e| CliError::Config(format!("model.rps: {e}")))?;
                if rps.len() != values.len() {
                    return Err(CliError::Config(format!(
                        "model: {} positions but {} values",
                        rps.len(),
                        values.len()
                    )));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(CliError::Config("model.values must be finite".into()));
                }
                Ok(())
            }
            ModelConfig::Csv { .. } => Ok(()),
        }
    }

    pub fn build(&self, num_labels: usize) -> Result<(Rps, PotentialVector), CliError> {
        let k = num_labels;
        match self {
            ModelConfig::Zero { rps } => {
                let rps = Rps::new(rps.iter().copied()).map_err(CliError::config)?;
                let theta = PotentialVector::zeros(&rps, k);
                Ok((rps, theta))
            }
            ModelConfig::OffDiagonal { rps, values } => {
                let blocks = rps.iter().zip(values).map(|(p, v)| {
                    let block = (1..k * k)
                        .map(|idx| if idx / k == idx % k { 0.0 } else { *v })
                        .collect();
                    (*p, block)
                });
                let theta = PotentialVector::from_blocks(k, blocks).map_err(CliError::config)?;
                Ok((theta.rps(), theta))
            }
            ModelConfig::Csv { file } => {
                let theta = mrfsel::io::read_theta_csv(file, k).map_err(CliError::runtime)?;
                Ok((theta.rps(), theta))
            }
        }
    }
}

fn default_sweeps() -> usize {
    1000
}

fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    #[serde(default = "default_sweeps")]
    pub sweeps: usize,
    #[serde(default = "default_true")]
    pub pgm: bool,
}

fn default_sigma2_p() -> f64 {
    10.0
}

fn default_one() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RjmcmcConfig {
    pub field: PathBuf,
    pub rps_max: RpsSpec,
    pub alphas: Vec<f64>,
    /// Defaults to the number of sites.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default = "default_sigma2_p")]
    pub sigma2_p: f64,
    #[serde(default)]
    pub tuning: TuningConfig,
    /// Starting RPS, with all coefficients zero; defaults to `rps_max`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_rps: Option<RpsSpec>,
    /// Only records whose iteration is a multiple of this are written.
    #[serde(default = "default_one")]
    pub write_every: usize,
}

fn default_thin() -> u64 {
    10
}

fn default_c_th() -> f64 {
    0.5
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SummarizeConfig {
    pub chains: Vec<PathBuf>,
    pub rps_max: RpsSpec,
    #[serde(default)]
    pub burn_in: u64,
    #[serde(default = "default_thin")]
    pub thin: u64,
    #[serde(default = "default_c_th")]
    pub c_th: f64,
    #[serde(default)]
    pub trace: bool,
}

fn default_sa_steps() -> usize {
    1500
}

fn default_sa_sweeps() -> usize {
    5
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SaSection {
    #[serde(default = "default_sa_steps")]
    pub steps: usize,
    #[serde(default = "default_sa_sweeps")]
    pub sweeps_per_step: usize,
    #[serde(default)]
    pub gamma: GammaSchedule,
    #[serde(default)]
    pub scale: StatScale,
}

impl Default for SaSection {
    fn default() -> Self {
        Self {
            steps: default_sa_steps(),
            sweeps_per_step: default_sa_sweeps(),
            gamma: GammaSchedule::Linear,
            scale: StatScale::PerSite,
        }
    }
}

impl SaSection {
    pub fn to_sa_config(&self, seed: u64) -> SaConfig {
        SaConfig {
            steps: self.steps,
            gamma: self.gamma.clone(),
            sweeps_per_step: self.sweeps_per_step,
            scale: self.scale,
            seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    pub field: PathBuf,
    pub rps: RpsSpec,
    #[serde(default)]
    pub sa: SaSection,
}

fn default_samples() -> usize {
    100
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub theta: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeltaConfig {
    pub target: PathBuf,
    pub rps_max: RpsSpec,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_sweeps")]
    pub sweeps: usize,
    pub scenarios: Vec<Scenario>,
}

impl RunConfig {
    pub fn parse(text: &str, path: &Path) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text, path)
    }

    #[cfg(test)]
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialization cannot fail")
    }

    pub fn seed(&self) -> Result<u64, CliError> {
        self.seed
            .ok_or_else(|| CliError::Config("no seed given (set `seed` or pass --seed)".into()))
    }

    pub fn out_dir(&self) -> Result<&Path, CliError> {
        self.out_dir
            .as_deref()
            .ok_or_else(|| CliError::Config("no output directory (set `out_dir` or pass --out)".into()))
    }

    fn section<'a, T>(s: &'a Option<T>, name: &str) -> Result<&'a T, CliError> {
        s.as_ref()
            .ok_or_else(|| CliError::Config(format!("missing [{name}] section")))
    }

    pub fn lattice(&self) -> Result<&LatticeConfig, CliError> {
        let l = Self::section(&self.lattice, "lattice")?;
        if l.n1 == 0 || l.n2 == 0 {
            return Err(CliError::Config("lattice.n1 and lattice.n2 must be >= 1".into()));
        }
        if !(1..=255).contains(&l.max_label) {
            return Err(CliError::Config("lattice.max_label must be in 1..=255".into()));
        }
        Ok(l)
    }

    pub fn validate_simulate(&self) -> Result<(), CliError> {
        self.lattice()?;
        Self::section(&self.model, "model")?.check()?;
        if let Some(s) = &self.simulate {
            if s.sweeps == 0 {
                return Err(CliError::Config("simulate.sweeps must be >= 1".into()));
            }
        }
        Ok(())
    }

    pub fn rjmcmc(&self) -> Result<&RjmcmcConfig, CliError> {
        let r = Self::section(&self.rjmcmc, "rjmcmc")?;
        r.rps_max.check("rjmcmc.rps_max")?;
        if let Some(init) = &r.initial_rps {
            init.check("rjmcmc.initial_rps")?;
        }
        if r.alphas.is_empty() {
            return Err(CliError::Config("rjmcmc.alphas must list at least one value".into()));
        }
        for &alpha in &r.alphas {
            PriorConfig::new(alpha, r.beta.unwrap_or(1.0), r.sigma2_p)
                .map_err(|e| CliError::Config(format!("rjmcmc: {e}")))?;
        }
        r.tuning
            .validate()
            .map_err(|e| CliError::Config(format!("rjmcmc.tuning: {e}")))?;
        if r.write_every == 0 {
            return Err(CliError::Config("rjmcmc.write_every must be >= 1".into()));
        }
        Ok(r)
    }

    pub fn summarize(&self) -> Result<&SummarizeConfig, CliError> {
        let s = Self::section(&self.summarize, "summarize")?;
        self.lattice()?;
        s.rps_max.check("summarize.rps_max")?;
        if s.thin == 0 {
            return Err(CliError::Config("summarize.thin must be >= 1".into()));
        }
        if !(s.c_th > 0.0 && s.c_th < 1.0) {
            return Err(CliError::Config("summarize.c_th must lie in (0, 1)".into()));
        }
        if s.chains.is_empty() {
            return Err(CliError::Config("summarize.chains is empty".into()));
        }
        Ok(s)
    }

    pub fn fit(&self) -> Result<&FitConfig, CliError> {
        let f = Self::section(&self.fit, "fit")?;
        f.rps.check("fit.rps")?;
        f.sa
            .to_sa_config(0)
            .validate()
            .map_err(|e| CliError::Config(format!("fit.sa: {e}")))?;
        Ok(f)
    }

    pub fn delta(&self) -> Result<&DeltaConfig, CliError> {
        let d = Self::section(&self.delta, "delta")?;
        d.rps_max.check("delta.rps_max")?;
        if d.samples == 0 || d.sweeps == 0 {
            return Err(CliError::Config("delta.samples and delta.sweeps must be >= 1".into()));
        }
        if d.scenarios.is_empty() {
            return Err(CliError::Config("delta.scenarios is empty".into()));
        }
        let mut names: Vec<&str> = d.scenarios.iter().map(|s| s.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(CliError::Config("delta scenario names must be unique".into()));
        }
        Ok(d)
    }
}
