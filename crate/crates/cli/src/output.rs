//! Atomic output files and run manifests.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::CliError;

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

/// Writes `bytes` to `path` through a temporary sibling and a rename, so a
/// reader never observes a partially written file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let tmp = tmp_path(path);
    fs::write(&tmp, bytes).map_err(|e| io_err(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| io_err(path, e))
}

fn tmp_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".tmp");
    path.with_file_name(name)
}

/// A file written incrementally and renamed into place by [`finish`](Self::finish).
pub struct AtomicWriter {
    tmp: PathBuf,
    dest: PathBuf,
    inner: std::io::BufWriter<fs::File>,
}

impl AtomicWriter {
    pub fn create(dest: &Path) -> Result<Self, CliError> {
        let tmp = tmp_path(dest);
        let file = fs::File::create(&tmp).map_err(|e| io_err(&tmp, e))?;
        Ok(Self {
            tmp,
            dest: dest.to_path_buf(),
            inner: std::io::BufWriter::new(file),
        })
    }

    pub fn write_str(&mut self, s: &str) -> Result<(), CliError> {
        self.inner.write_all(s.as_bytes()).map_err(|e| io_err(&self.tmp, e))
    }

    pub fn finish(mut self) -> Result<(), CliError> {
        self.inner.flush().map_err(|e| io_err(&self.tmp, e))?;
        fs::rename(&self.tmp, &self.dest).map_err(|e| io_err(&self.dest, e))
    }
}

/// Git-style blob hash: SHA-256 of `"blob {len}\0"` followed by the content.
pub fn blob_hash(content: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", content.len()).as_bytes());
    h.update(content);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

pub fn hash_file(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    Ok(blob_hash(&bytes))
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: &'a str,
    seed: Option<u64>,
    config: &'a RunConfig,
    inputs: BTreeMap<String, String>,
    outputs: Vec<String>,
}

/// Writes `<command>.manifest.json` into `out_dir`.
///
/// The output directory is left out of the recorded configuration and no
/// timestamps are stored, so identical runs produce identical manifests.
pub fn write_manifest(
    out_dir: &Path,
    command: &str,
    config: &RunConfig,
    inputs: &[&Path],
    outputs: &[&str],
) -> Result<(), CliError> {
    let mut cfg = config.clone();
    cfg.out_dir = None;
    let mut hashes = BTreeMap::new();
    for p in inputs {
        hashes.insert(p.display().to_string(), hash_file(p)?);
    }
    let m = Manifest {
        command,
        version: env!("CARGO_PKG_VERSION"),
        seed: cfg.seed,
        config: &cfg,
        inputs: hashes,
        outputs: outputs.iter().map(|s| s.to_string()).collect(),
    };
    let mut text = serde_json::to_string_pretty(&m).map_err(CliError::runtime)?;
    text.push('\n');
    write_atomic(&out_dir.join(format!("{command}.manifest.json")), text.as_bytes())
}
