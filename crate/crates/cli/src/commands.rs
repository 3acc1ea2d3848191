//! The five subcommands. Each one validates its whole configuration before
//! doing any work, then writes its outputs and a manifest into the output
//! directory.

use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use mrfsel::io::{field_to_pgm, field_to_string, read_field, read_theta_csv, rps_to_string, theta_to_csv};
use mrfsel::mle::{delta_metric, sa_fit, simulate_samples};
use mrfsel::priors::PriorConfig;
use mrfsel::rjmcmc::{run_chain, ChainRecord, ChainState, PseudoLikelihood};
use mrfsel::seed::{derive_seed, rng_from_seed};
use mrfsel::summaries::{models_to_csv, sparse_estimate, trace_rows, RecordFilter, SummaryAccumulator, TRACE_HEADER};
use mrfsel::model::sample_field;
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{write_atomic, write_manifest, AtomicWriter};

fn prepare_out_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Runtime(format!("{}: {e}", dir.display())))
}

pub fn simulate(cfg: &RunConfig) -> Result<(), CliError> {
    cfg.validate_simulate()?;
    let seed = cfg.seed()?;
    let out = cfg.out_dir()?;
    let lat = cfg.lattice()?;
    let sweeps = cfg.simulate.as_ref().map_or(1000, |s| s.sweeps);
    let pgm = cfg.simulate.as_ref().is_none_or(|s| s.pgm);
    let model = cfg.model.as_ref().expect("validated");
    let (rps, theta) = model.build(lat.max_label + 1)?;
    prepare_out_dir(out)?;

    let mut rng = rng_from_seed(derive_seed(seed, "simulate"));
    let field = sample_field(lat.n1, lat.n2, lat.max_label, &rps, &theta, sweeps, &mut rng)?;
    write_atomic(&out.join("field.txt"), field_to_string(&field).as_bytes())?;
    write_atomic(&out.join("theta.csv"), theta_to_csv(&theta).as_bytes())?;
    let mut outputs = vec!["field.txt", "theta.csv"];
    if pgm {
        write_atomic(&out.join("field.pgm"), field_to_pgm(&field).as_bytes())?;
        outputs.push("field.pgm");
    }
    let inputs: Vec<&Path> = match model {
        crate::config::ModelConfig::Csv { file } => vec![file.as_path()],
        _ => vec![],
    };
    write_manifest(out, "simulate", cfg, &inputs, &outputs)
}

/// File name for the chain run at `alpha`; `Display` for `f64` is the
/// shortest round-tripping form, so distinct values give distinct names.
pub fn chain_file_name(alpha: f64) -> String {
    format!("chain_alpha_{alpha}.jsonl")
}

pub fn rjmcmc(cfg: &RunConfig) -> Result<(), CliError> {
    let r = cfg.rjmcmc()?;
    let seed = cfg.seed()?;
    let out = cfg.out_dir()?;
    let mut names: Vec<String> = r.alphas.iter().map(|a| chain_file_name(*a)).collect();
    names.sort();
    if names.windows(2).any(|w| w[0] == w[1]) {
        return Err(CliError::Config("rjmcmc.alphas contains duplicates".into()));
    }

    let field = read_field(&r.field).map_err(CliError::runtime)?;
    let rps_max = r.rps_max.resolve()?;
    let initial = match &r.initial_rps {
        Some(spec) => spec.resolve()?,
        None => rps_max.clone(),
    };
    let beta = r.beta.unwrap_or(field.num_sites() as f64);
    let k = field.num_labels();
    let lik = PseudoLikelihood::new(field);
    prepare_out_dir(out)?;

    r.alphas
        .par_iter()
        .map(|&alpha| -> Result<(), CliError> {
            let prior = PriorConfig::new(alpha, beta, r.sigma2_p).map_err(CliError::config)?;
            let rng = rng_from_seed(derive_seed(seed, &format!("rjmcmc/alpha={alpha}")));
            let chain = run_chain(
                &lik,
                &rps_max,
                &prior,
                &r.tuning,
                ChainState::zeros(initial.clone(), k),
                rng,
            )?;
            let mut w = AtomicWriter::create(&out.join(chain_file_name(alpha)))?;
            for rec in chain {
                let rec = rec?;
                if rec.iteration.rem_euclid(r.write_every as i64) == 0 {
                    let mut line = rec.to_json_line();
                    line.push('\n');
                    w.write_str(&line)?;
                }
            }
            w.finish()
        })
        .collect::<Result<Vec<()>, CliError>>()?;

    let outputs: Vec<String> = r.alphas.iter().map(|a| chain_file_name(*a)).collect();
    let outputs: Vec<&str> = outputs.iter().map(String::as_str).collect();
    let mut inputs = vec![r.field.as_path()];
    if let crate::config::RpsSpec::File { file } = &r.rps_max {
        inputs.push(file.as_path());
    }
    write_manifest(out, "rjmcmc", cfg, &inputs, &outputs)
}

fn chain_stem(path: &Path) -> String {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    name.strip_suffix(".jsonl").unwrap_or(&name).to_string()
}

pub fn summarize(cfg: &RunConfig) -> Result<(), CliError> {
    let s = cfg.summarize()?;
    let out = cfg.out_dir()?;
    let k = cfg.lattice()?.max_label + 1;
    let mut stems: Vec<String> = s.chains.iter().map(|p| chain_stem(p)).collect();
    stems.sort();
    if stems.windows(2).any(|w| w[0] == w[1]) {
        return Err(CliError::Config("summarize.chains have clashing file names".into()));
    }
    let rps_max = s.rps_max.resolve()?;
    let filter = RecordFilter::new(s.burn_in, s.thin).map_err(CliError::config)?;
    prepare_out_dir(out)?;

    let mut outputs = Vec::new();
    for path in &s.chains {
        let stem = chain_stem(path);
        let file = fs::File::open(path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
        let mut acc = SummaryAccumulator::new(&rps_max, filter);
        let mut trace = if s.trace {
            let mut w = AtomicWriter::create(&out.join(format!("{stem}.trace.csv")))?;
            w.write_str(TRACE_HEADER)?;
            Some(w)
        } else {
            None
        };
        for (n, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
            if line.trim().is_empty() {
                continue;
            }
            let rec = ChainRecord::from_json_line(&line, k)
                .map_err(|e| CliError::Runtime(format!("{}:{}: {e}", path.display(), n + 1)))?;
            if acc.push(&rec)? {
                if let Some(w) = trace.as_mut() {
                    w.write_str(&trace_rows(&rec))?;
                }
            }
        }
        let map = acc.inclusion_map()?;
        write_atomic(&out.join(format!("{stem}.inclusion.csv")), map.to_csv().as_bytes())?;
        let models = models_to_csv(&acc.model_frequencies()?);
        write_atomic(&out.join(format!("{stem}.models.csv")), models.as_bytes())?;
        let sparse = rps_to_string(&sparse_estimate(&map, s.c_th));
        write_atomic(&out.join(format!("{stem}.sparse.txt")), sparse.as_bytes())?;
        outputs.extend([
            format!("{stem}.inclusion.csv"),
            format!("{stem}.models.csv"),
            format!("{stem}.sparse.txt"),
        ]);
        if let Some(w) = trace {
            w.finish()?;
            outputs.push(format!("{stem}.trace.csv"));
        }
    }
    let outputs: Vec<&str> = outputs.iter().map(String::as_str).collect();
    let inputs: Vec<&Path> = s.chains.iter().map(PathBuf::as_path).collect();
    write_manifest(out, "summarize", cfg, &inputs, &outputs)
}

pub fn fit(cfg: &RunConfig) -> Result<(), CliError> {
    let f = cfg.fit()?;
    let seed = cfg.seed()?;
    let out = cfg.out_dir()?;
    let target = read_field(&f.field).map_err(CliError::runtime)?;
    let rps = f.rps.resolve()?;
    prepare_out_dir(out)?;
    let theta = sa_fit(&target, &rps, &f.sa.to_sa_config(derive_seed(seed, "fit")))?;
    write_atomic(&out.join("fit_theta.csv"), theta_to_csv(&theta).as_bytes())?;
    let mut inputs = vec![f.field.as_path()];
    if let crate::config::RpsSpec::File { file } = &f.rps {
        inputs.push(file.as_path());
    }
    write_manifest(out, "fit", cfg, &inputs, &["fit_theta.csv"])
}

pub fn delta(cfg: &RunConfig) -> Result<(), CliError> {
    let d = cfg.delta()?;
    let seed = cfg.seed()?;
    let out = cfg.out_dir()?;
    let target = read_field(&d.target).map_err(CliError::runtime)?;
    let rps_max = d.rps_max.resolve()?;
    let k = target.num_labels();
    let thetas = d
        .scenarios
        .iter()
        .map(|s| read_theta_csv(&s.theta, k).map_err(CliError::runtime))
        .collect::<Result<Vec<_>, _>>()?;
    prepare_out_dir(out)?;

    let mut csv = String::from("scenario,num_positions,delta\n");
    for (s, theta) in d.scenarios.iter().zip(&thetas) {
        let samples = simulate_samples(
            target.n1(),
            target.n2(),
            target.max_label(),
            &theta.rps(),
            theta,
            d.sweeps,
            d.samples,
            derive_seed(seed, "delta"),
            &s.name,
        )?;
        let v = delta_metric(&samples, &target, &rps_max)?;
        csv.push_str(&format!("{},{},{}\n", s.name, theta.len(), v));
    }
    write_atomic(&out.join("delta.csv"), csv.as_bytes())?;
    let mut inputs = vec![d.target.as_path()];
    inputs.extend(d.scenarios.iter().map(|s| s.theta.as_path()));
    write_manifest(out, "delta", cfg, &inputs, &["delta.csv"])
}
