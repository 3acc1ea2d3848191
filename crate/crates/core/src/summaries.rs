//! Ergodic averages over chain records: inclusion maps, model frequencies
//! and the thresholded sparse RPS estimate.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::lattice::{pair_of_index, Position, Rps};
use crate::rjmcmc::ChainRecord;

/// Which records count towards summaries: main-phase iterations past
/// `burn_in` whose offset from `burn_in` is a multiple of `thin`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RecordFilter {
    burn_in: u64,
    thin: u64,
}

impl RecordFilter {
    pub fn new(burn_in: u64, thin: u64) -> Result<Self> {
        if thin == 0 {
            return Err(Error::InvalidConfig("thin must be >= 1".into()));
        }
        Ok(Self { burn_in, thin })
    }

    pub fn keeps(&self, iteration: i64) -> bool {
        if iteration < 1 || (iteration as u64) <= self.burn_in {
            return false;
        }
        (iteration as u64 - self.burn_in) % self.thin == 0
    }
}

/// Marginal inclusion frequency of every position of `R_max`.
#[derive(Clone, Debug, PartialEq)]
pub struct InclusionMap {
    probs: BTreeMap<Position, f64>,
}

impl InclusionMap {
    pub fn from_probabilities(probs: BTreeMap<Position, f64>) -> Self {
        Self { probs }
    }

    pub fn get(&self, p: Position) -> Option<f64> {
        self.probs.get(&p).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Position, f64)> + '_ {
        self.probs.iter().map(|(p, v)| (*p, *v))
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// CSV with header `dr1,dr2,probability`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("dr1,dr2,probability\n");
        for (p, v) in &self.probs {
            writeln!(out, "{},{},{}", p.dr1, p.dr2, v).unwrap();
        }
        out
    }
}

/// Streaming counts over filtered records; partial accumulators over
/// disjoint chunks of a chain combine exactly with [`SummaryAccumulator::merge`].
#[derive(Clone, Debug, PartialEq)]
pub struct SummaryAccumulator {
    filter: RecordFilter,
    kept: u64,
    positions: BTreeMap<Position, u64>,
    models: BTreeMap<Rps, u64>,
}

impl SummaryAccumulator {
    pub fn new(rps_max: &Rps, filter: RecordFilter) -> Self {
        Self {
            filter,
            kept: 0,
            positions: rps_max.iter().map(|p| (p, 0)).collect(),
            models: BTreeMap::new(),
        }
    }

    /// Counts `rps` if `iteration` passes the filter; returns whether it did.
    pub fn push_rps(&mut self, iteration: i64, rps: &Rps) -> Result<bool> {
        if !self.filter.keeps(iteration) {
            return Ok(false);
        }
        for p in rps.iter() {
            match self.positions.get_mut(&p) {
                Some(c) => *c += 1,
                None => {
                    return Err(Error::InvalidConfig(format!(
                        "chain position {p} is outside R_max"
                    )))
                }
            }
        }
        *self.models.entry(rps.clone()).or_insert(0) += 1;
        self.kept += 1;
        Ok(true)
    }

    pub fn push(&mut self, record: &ChainRecord) -> Result<bool> {
        self.push_rps(record.iteration, record.state.rps())
    }

    pub fn merge(&mut self, other: &SummaryAccumulator) -> Result<()> {
        if self.filter != other.filter || !self.positions.keys().eq(other.positions.keys()) {
            return Err(Error::InvalidConfig("cannot merge summaries with different setups".into()));
        }
        self.kept += other.kept;
        for (p, c) in &other.positions {
            *self.positions.get_mut(p).unwrap() += c;
        }
        for (m, c) in &other.models {
            *self.models.entry(m.clone()).or_insert(0) += c;
        }
        Ok(())
    }

    pub fn kept(&self) -> u64 {
        self.kept
    }

    pub fn inclusion_map(&self) -> Result<InclusionMap> {
        if self.kept == 0 {
            return Err(Error::EmptyChainAfterFiltering);
        }
        let n = self.kept as f64;
        Ok(InclusionMap {
            probs: self.positions.iter().map(|(p, c)| (*p, *c as f64 / n)).collect(),
        })
    }

    pub fn model_frequencies(&self) -> Result<BTreeMap<Rps, f64>> {
        if self.kept == 0 {
            return Err(Error::EmptyChainAfterFiltering);
        }
        let n = self.kept as f64;
        Ok(self.models.iter().map(|(m, c)| (m.clone(), *c as f64 / n)).collect())
    }

    pub fn model_counts(&self) -> &BTreeMap<Rps, u64> {
        &self.models
    }
}

fn accumulate<'a>(
    records: impl IntoIterator<Item = &'a ChainRecord>,
    rps_max: &Rps,
    burn_in: u64,
    thin: u64,
) -> Result<SummaryAccumulator> {
    let mut acc = SummaryAccumulator::new(rps_max, RecordFilter::new(burn_in, thin)?);
    for rec in records {
        acc.push(rec)?;
    }
    Ok(acc)
}

/// Fraction of retained records whose RPS contains each position of `rps_max`.
pub fn inclusion_probabilities<'a>(
    records: impl IntoIterator<Item = &'a ChainRecord>,
    burn_in: u64,
    thin: u64,
    rps_max: &Rps,
) -> Result<InclusionMap> {
    accumulate(records, rps_max, burn_in, thin)?.inclusion_map()
}

/// Visit frequency of each distinct RPS among retained records.
pub fn model_frequencies<'a>(
    records: impl IntoIterator<Item = &'a ChainRecord>,
    burn_in: u64,
    thin: u64,
) -> Result<BTreeMap<Rps, f64>> {
    let filter = RecordFilter::new(burn_in, thin)?;
    let mut counts: BTreeMap<Rps, u64> = BTreeMap::new();
    let mut kept = 0u64;
    for rec in records.into_iter().filter(|r| filter.keeps(r.iteration)) {
        *counts.entry(rec.state.rps().clone()).or_insert(0) += 1;
        kept += 1;
    }
    if kept == 0 {
        return Err(Error::EmptyChainAfterFiltering);
    }
    Ok(counts.into_iter().map(|(m, c)| (m, c as f64 / kept as f64)).collect())
}

/// Positions whose inclusion probability strictly exceeds `c_th`.
pub fn sparse_estimate(map: &InclusionMap, c_th: f64) -> Rps {
    Rps::new(map.iter().filter(|(_, v)| *v > c_th).map(|(p, _)| p))
        .expect("keys of an inclusion map form a proper RPS")
}

/// CSV `size,frequency,rps`, most frequent model first.
pub fn models_to_csv(freqs: &BTreeMap<Rps, f64>) -> String {
    let mut rows: Vec<(&Rps, f64)> = freqs.iter().map(|(m, f)| (m, *f)).collect();
    rows.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let mut out = String::from("size,frequency,rps\n");
    for (m, f) in rows {
        writeln!(out, "{},{},\"{}\"", m.len(), f, m.to_compact_string()).unwrap();
    }
    out
}

pub const TRACE_HEADER: &str = "iter,dr1,dr2,a,b,value\n";

/// Long-format trace rows `iter,dr1,dr2,a,b,value` for one record.
pub fn trace_rows(record: &ChainRecord) -> String {
    let mut out = String::new();
    let theta = record.state.theta();
    let k = theta.num_labels();
    for (p, block) in theta.blocks() {
        for (idx, v) in block.iter().enumerate() {
            let (a, b) = pair_of_index(idx, k);
            writeln!(out, "{},{},{},{},{},{}", record.iteration, p.dr1, p.dr2, a, b, v).unwrap();
        }
    }
    out
}
