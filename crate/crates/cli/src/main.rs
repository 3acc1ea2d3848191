//! `mrfsel` command-line tool.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::RunConfig;
use error::CliError;

#[derive(Parser)]
#[command(name = "mrfsel", version, about = "Neighborhood selection for lattice Markov random fields")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides `seed` in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides `out_dir` in the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for independent chains and samples.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Gibbs-simulate a field from a model template.
    Simulate,
    /// Run one reversible jump chain per alpha value.
    Rjmcmc,
    /// Inclusion probabilities, model frequencies and sparse estimates.
    Summarize,
    /// Stochastic-approximation MLE for a fixed RPS.
    Fit,
    /// Texture distance between a target and simulated model fields.
    Delta,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if cli.seed.is_some() {
        cfg.seed = cli.seed;
    }
    if cli.out.is_some() {
        cfg.out_dir = cli.out.clone();
    }
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(CliError::runtime)?;
    }
    match cli.command {
        Command::Simulate => commands::simulate(&cfg),
        Command::Rjmcmc => commands::rjmcmc(&cfg),
        Command::Summarize => commands::summarize(&cfg),
        Command::Fit => commands::fit(&cfg),
        Command::Delta => commands::delta(&cfg),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mrfsel: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
