//! Full conditionals, pseudolikelihood, Gibbs simulation and exact
//! enumeration for the pairwise-interaction field.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lattice::{Field, PotentialVector, Rps};

/// Rows x columns x positions above which pseudolikelihood rows are
/// evaluated in parallel. The reduction order is fixed either way.
const PARALLEL_WORK: usize = 1 << 16;

/// Largest state space `exact_*` routines will enumerate.
pub const MAX_EXACT_STATES: u64 = 1 << 24;

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Distribution of one site's label given the rest of the field.
#[derive(Clone, Debug, PartialEq)]
pub struct ConditionalDistribution {
    probs: Vec<f64>,
}

impl ConditionalDistribution {
    fn from_log_weights(w: &[f64]) -> Self {
        let lse = log_sum_exp(w);
        Self {
            probs: w.iter().map(|x| (x - lse).exp()).collect(),
        }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }
}

/// Potentials unpacked into dense `(C+1) x (C+1)` tables, one per position.
#[derive(Clone, Debug)]
pub struct Interactions {
    num_labels: usize,
    offsets: Vec<(i64, i64)>,
    tables: Vec<f64>,
}

impl Interactions {
    pub fn new(theta: &PotentialVector) -> Self {
        let k = theta.num_labels();
        let mut offsets = Vec::with_capacity(theta.len());
        let mut tables = Vec::with_capacity(theta.len() * k * k);
        for (p, block) in theta.blocks() {
            offsets.push((p.dr1 as i64, p.dr2 as i64));
            tables.push(0.0);
            tables.extend_from_slice(block);
        }
        Self {
            num_labels: k,
            offsets,
            tables,
        }
    }

    fn checked(field: &Field, rps: &Rps, theta: &PotentialVector) -> Result<Self> {
        if !theta.matches(rps) {
            return Err(Error::PositionMismatch);
        }
        if theta.num_labels() != field.num_labels() {
            return Err(Error::LabelMismatch(theta.num_labels(), field.num_labels()));
        }
        Ok(Self::new(theta))
    }

    pub fn num_labels(&self) -> usize {
        self.num_labels
    }

    /// Unnormalized log conditional weight of each label at `(i1, i2)`:
    /// `sum_r theta_{a, z_{i+r}, r} + theta_{z_{i-r}, a, r}` over in-lattice neighbors.
    fn log_weights(&self, field: &Field, i1: usize, i2: usize, out: &mut [f64]) {
        let k = self.num_labels;
        let (n1, n2) = (field.n1() as i64, field.n2() as i64);
        let vals = field.values();
        out.fill(0.0);
        let (i1, i2) = (i1 as i64, i2 as i64);
        for (t, &(d1, d2)) in self.offsets.iter().enumerate() {
            let table = &self.tables[t * k * k..(t + 1) * k * k];
            let (f1, f2) = (i1 + d1, i2 + d2);
            if f1 >= 0 && f1 < n1 && f2 >= 0 && f2 < n2 {
                let b = vals[(f1 * n2 + f2) as usize] as usize;
                for (a, o) in out.iter_mut().enumerate() {
                    *o += table[a * k + b];
                }
            }
            let (g1, g2) = (i1 - d1, i2 - d2);
            if g1 >= 0 && g1 < n1 && g2 >= 0 && g2 < n2 {
                let b = vals[(g1 * n2 + g2) as usize] as usize;
                for (a, o) in out.iter_mut().enumerate() {
                    *o += table[b * k + a];
                }
            }
        }
    }

    fn row_log_pl(&self, field: &Field, i1: usize, buf: &mut [f64]) -> f64 {
        let mut s = 0.0;
        for i2 in 0..field.n2() {
            self.log_weights(field, i1, i2, buf);
            s += buf[field.get(i1, i2)] - log_sum_exp(buf);
        }
        s
    }

    /// Log pseudolikelihood of `field`; the field must use this alphabet.
    pub fn log_pseudolikelihood(&self, field: &Field) -> f64 {
        debug_assert_eq!(field.num_labels(), self.num_labels);
        let k = self.num_labels;
        if self.offsets.is_empty() {
            return -(field.num_sites() as f64) * (k as f64).ln();
        }
        let work = field.num_sites() * self.offsets.len();
        let rows: Vec<f64> = if work >= PARALLEL_WORK {
            (0..field.n1())
                .into_par_iter()
                .map_init(|| vec![0.0; k], |buf, i1| self.row_log_pl(field, i1, buf))
                .collect()
        } else {
            let mut buf = vec![0.0; k];
            (0..field.n1())
                .map(|i1| self.row_log_pl(field, i1, &mut buf))
                .collect()
        };
        rows.iter().sum()
    }

    /// One raster-scan Gibbs pass over `field`, in place.
    pub fn sweep<R: Rng + ?Sized>(&self, field: &mut Field, rng: &mut R) {
        debug_assert_eq!(field.num_labels(), self.num_labels);
        let mut buf = vec![0.0; self.num_labels];
        for i1 in 0..field.n1() {
            for i2 in 0..field.n2() {
                self.log_weights(field, i1, i2, &mut buf);
                let label = sample_log_weights(&mut buf, rng);
                field.set(i1, i2, label);
            }
        }
    }
}

/// Draws an index with probability proportional to `exp(w[i])`.
/// Overwrites `w` with the unnormalized weights.
fn sample_log_weights<R: Rng + ?Sized>(w: &mut [f64], rng: &mut R) -> usize {
    let m = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for x in w.iter_mut() {
        *x = (*x - m).exp();
        total += *x;
    }
    let u: f64 = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (i, x) in w.iter().enumerate() {
        acc += x;
        if u < acc {
            return i;
        }
    }
    w.len() - 1
}

pub fn conditional_distribution(
    field: &Field,
    site: (usize, usize),
    rps: &Rps,
    theta: &PotentialVector,
) -> Result<ConditionalDistribution> {
    let (i1, i2) = site;
    if i1 >= field.n1() || i2 >= field.n2() {
        return Err(Error::SiteOutOfBounds(i1, i2, field.n1(), field.n2()));
    }
    let inter = Interactions::checked(field, rps, theta)?;
    let mut w = vec![0.0; field.num_labels()];
    inter.log_weights(field, i1, i2, &mut w);
    Ok(ConditionalDistribution::from_log_weights(&w))
}

/// Sum over sites of the log full conditional at the observed label.
pub fn log_pseudolikelihood(field: &Field, rps: &Rps, theta: &PotentialVector) -> Result<f64> {
    Ok(Interactions::checked(field, rps, theta)?.log_pseudolikelihood(field))
}

pub fn gibbs_sweep<R: Rng + ?Sized>(
    field: &Field,
    rps: &Rps,
    theta: &PotentialVector,
    rng: &mut R,
) -> Result<Field> {
    let inter = Interactions::checked(field, rps, theta)?;
    let mut out = field.clone();
    inter.sweep(&mut out, rng);
    Ok(out)
}

/// Uniform random start followed by `sweeps` Gibbs passes.
pub fn sample_field<R: Rng + ?Sized>(
    n1: usize,
    n2: usize,
    max_label: usize,
    rps: &Rps,
    theta: &PotentialVector,
    sweeps: usize,
    rng: &mut R,
) -> Result<Field> {
    if sweeps == 0 {
        return Err(Error::InvalidConfig("sweeps must be at least 1".into()));
    }
    let mut field = Field::uniform_random(n1, n2, max_label, rng)?;
    let inter = Interactions::checked(&field, rps, theta)?;
    for _ in 0..sweeps {
        inter.sweep(&mut field, rng);
    }
    Ok(field)
}

/// Log-probabilities of every configuration of an `n1 x n2` lattice, indexed
/// by [`Field::state_index`]. The normalizing constant is computed by brute
/// force, so this is only usable on tiny lattices.
pub fn exact_log_probabilities(
    n1: usize,
    n2: usize,
    max_label: usize,
    rps: &Rps,
    theta: &PotentialVector,
) -> Result<Vec<f64>> {
    let k = max_label + 1;
    if !theta.matches(rps) {
        return Err(Error::PositionMismatch);
    }
    if theta.num_labels() != k {
        return Err(Error::LabelMismatch(theta.num_labels(), k));
    }
    let sites = n1 * n2;
    let states = (k as f64).powi(sites as i32);
    if states > MAX_EXACT_STATES as f64 {
        return Err(Error::LatticeTooLarge(k, sites));
    }
    let states = states as u64;
    // in-lattice (site, neighbor, table offset) triples, listed once
    let mut links = Vec::new();
    for (t, p) in rps.iter().enumerate() {
        for i1 in 0..n1 as i64 {
            for i2 in 0..n2 as i64 {
                let (j1, j2) = (i1 + p.dr1 as i64, i2 + p.dr2 as i64);
                if j1 >= 0 && j2 >= 0 && j1 < n1 as i64 && j2 < n2 as i64 {
                    links.push(((i1 * n2 as i64 + i2) as usize, (j1 * n2 as i64 + j2) as usize, t));
                }
            }
        }
    }
    let tables = Interactions::new(theta).tables;
    let mut labels = vec![0usize; sites];
    let mut energies = Vec::with_capacity(states as usize);
    for _ in 0..states {
        let e: f64 = links
            .iter()
            .map(|&(s, n, t)| tables[t * k * k + labels[s] * k + labels[n]])
            .sum();
        energies.push(e);
        // odometer increment, site 0 least significant
        for l in labels.iter_mut() {
            *l += 1;
            if *l < k {
                break;
            }
            *l = 0;
        }
    }
    let log_z = log_sum_exp(&energies);
    Ok(energies.into_iter().map(|e| e - log_z).collect())
}

/// Exact `log f(z | R, theta)` including the normalizing constant.
pub fn exact_log_likelihood(field: &Field, rps: &Rps, theta: &PotentialVector) -> Result<f64> {
    let logp = exact_log_probabilities(field.n1(), field.n2(), field.max_label(), rps, theta)?;
    Ok(logp[field.state_index() as usize])
}
