//! Fields, relative-position sets, potential vectors and pair counts.
//!
//! Sites are stored row-major by `i1` then `i2` and indexed from 0, so the
//! site written `(i1, i2)` with 1-based indices corresponds to the 0-based
//! pair `(i1 - 1, i2 - 1)`. A relative position `r = (dr1, dr2)` links site
//! `(i1, i2)` to `(i1 + dr1, i2 + dr2)`; pairs leaving the lattice are
//! dropped.

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Offset between two sites of the lattice.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "[i32; 2]", into = "[i32; 2]")]
pub struct Position {
    pub dr1: i32,
    pub dr2: i32,
}

impl Position {
    pub const fn new(dr1: i32, dr2: i32) -> Self {
        Self { dr1, dr2 }
    }

    pub fn opposite(self) -> Self {
        Self::new(-self.dr1, -self.dr2)
    }

    pub fn is_zero(self) -> bool {
        self.dr1 == 0 && self.dr2 == 0
    }

    /// True for the half-plane representative of `{r, -r}`.
    pub fn is_canonical(self) -> bool {
        self.dr1 > 0 || (self.dr1 == 0 && self.dr2 > 0)
    }

    pub fn canonical(self) -> Self {
        if self.is_canonical() {
            self
        } else {
            self.opposite()
        }
    }

    /// Number of site pairs `(i, i + r)` with both ends inside an `n1 x n2` lattice.
    pub fn pair_count(self, n1: usize, n2: usize) -> usize {
        let a = self.dr1.unsigned_abs() as usize;
        let b = self.dr2.unsigned_abs() as usize;
        n1.saturating_sub(a) * n2.saturating_sub(b)
    }
}

impl From<[i32; 2]> for Position {
    fn from(v: [i32; 2]) -> Self {
        Self::new(v[0], v[1])
    }
}

impl From<Position> for [i32; 2] {
    fn from(p: Position) -> Self {
        [p.dr1, p.dr2]
    }
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.dr1, self.dr2)
    }
}

/// A proper relative position set: no duplicates, no `(0,0)`, never both
/// `r` and `-r`. Positions are kept sorted by `(dr1, dr2)`.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<Position>", into = "Vec<Position>")]
pub struct Rps {
    positions: Vec<Position>,
}

/// Norm used to build a maximal RPS from a radius.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    #[default]
    Euclidean,
    /// Maximum norm, `max(|dr1|, |dr2|)`.
    Chebyshev,
}

impl Rps {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Validates and canonically orders a list of positions.
    pub fn new(positions: impl IntoIterator<Item = Position>) -> Result<Self> {
        let mut positions: Vec<Position> = positions.into_iter().collect();
        if positions.iter().any(|p| p.is_zero()) {
            return Err(Error::ZeroPosition);
        }
        positions.sort_unstable();
        for w in positions.windows(2) {
            if w[0] == w[1] {
                return Err(Error::DuplicatePosition(w[0]));
            }
        }
        for &p in &positions {
            if p.is_canonical() && positions.binary_search(&p.opposite()).is_ok() {
                return Err(Error::OpposingPair(p));
            }
        }
        Ok(Self { positions })
    }

    /// All positions within `radius` of the origin, one per `{r, -r}` pair,
    /// keeping the representative with `dr1 > 0`, or `dr1 = 0` and `dr2 > 0`.
    pub fn max_distance(radius: f64, norm: Norm) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "radius must be positive and finite, got {radius}"
            )));
        }
        let reach = radius.floor() as i32;
        let mut positions = Vec::new();
        for dr1 in 0..=reach {
            for dr2 in -reach..=reach {
                let p = Position::new(dr1, dr2);
                if !p.is_canonical() {
                    continue;
                }
                let inside = match norm {
                    Norm::Euclidean => {
                        let sq = (dr1 * dr1 + dr2 * dr2) as f64;
                        sq <= radius * radius
                    }
                    Norm::Chebyshev => dr1.abs().max(dr2.abs()) as f64 <= radius,
                };
                if inside {
                    positions.push(p);
                }
            }
        }
        positions.sort_unstable();
        Ok(Self { positions })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[Position] {
        &self.positions
    }

    pub fn iter(&self) -> impl Iterator<Item = Position> + '_ {
        self.positions.iter().copied()
    }

    pub fn contains(&self, p: Position) -> bool {
        self.positions.binary_search(&p).is_ok()
    }

    pub fn index_of(&self, p: Position) -> Option<usize> {
        self.positions.binary_search(&p).ok()
    }

    pub fn is_subset_of(&self, other: &Rps) -> bool {
        self.positions.iter().all(|&p| other.contains(p))
    }

    /// Positions of `self` that are not in `other`, in canonical order.
    pub fn difference(&self, other: &Rps) -> Vec<Position> {
        self.positions
            .iter()
            .copied()
            .filter(|&p| !other.contains(p))
            .collect()
    }

    /// Copy of `self` with `p` added.
    pub fn with(&self, p: Position) -> Result<Self> {
        let mut positions = self.positions.clone();
        positions.push(p);
        Self::new(positions)
    }

    /// Copy of `self` with `p` removed (no-op if absent).
    pub fn without(&self, p: Position) -> Self {
        Self {
            positions: self.positions.iter().copied().filter(|&q| q != p).collect(),
        }
    }

    /// Space-separated `(dr1,dr2)` list, `{}` when empty.
    pub fn to_compact_string(&self) -> String {
        if self.is_empty() {
            return "{}".to_string();
        }
        self.positions
            .iter()
            .map(|p| p.to_string())
            .collect::<Vec<_>>()
            .join(" ")
    }
}

impl TryFrom<Vec<Position>> for Rps {
    type Error = Error;

    fn try_from(v: Vec<Position>) -> Result<Self> {
        Rps::new(v)
    }
}

impl From<Rps> for Vec<Position> {
    fn from(r: Rps) -> Self {
        r.positions
    }
}

impl fmt::Display for Rps {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_compact_string())
    }
}

/// Number of free coefficients per relative position, `(C+1)^2 - 1`.
pub fn free_dim(num_labels: usize) -> usize {
    num_labels * num_labels - 1
}

/// Index of the pair `(a, b)` inside a free subvector, `None` for `(0,0)`.
pub fn pair_index(a: usize, b: usize, num_labels: usize) -> Option<usize> {
    (a * num_labels + b).checked_sub(1)
}

/// Inverse of [`pair_index`].
pub fn pair_of_index(idx: usize, num_labels: usize) -> (usize, usize) {
    let flat = idx + 1;
    (flat / num_labels, flat % num_labels)
}

/// An `n1 x n2` grid of labels in `{0, ..., C}`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Field {
    n1: usize,
    n2: usize,
    max_label: usize,
    values: Vec<u8>,
}

impl Field {
    pub fn new(n1: usize, n2: usize, max_label: usize, values: Vec<u8>) -> Result<Self> {
        if n1 == 0 || n2 == 0 {
            return Err(Error::InvalidField(format!("dimensions {n1}x{n2} must be positive")));
        }
        if max_label == 0 || max_label > u8::MAX as usize {
            return Err(Error::InvalidField(format!(
                "max label C={max_label} must be in 1..=255"
            )));
        }
        if values.len() != n1 * n2 {
            return Err(Error::InvalidField(format!(
                "expected {} values, got {}",
                n1 * n2,
                values.len()
            )));
        }
        if let Some(&v) = values.iter().find(|&&v| v as usize > max_label) {
            return Err(Error::InvalidField(format!("label {v} exceeds C={max_label}")));
        }
        Ok(Self {
            n1,
            n2,
            max_label,
            values,
        })
    }

    pub fn constant(n1: usize, n2: usize, max_label: usize, label: u8) -> Result<Self> {
        Self::new(n1, n2, max_label, vec![label; n1 * n2])
    }

    /// Independent uniform labels at every site.
    pub fn uniform_random<R: Rng + ?Sized>(
        n1: usize,
        n2: usize,
        max_label: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let k = max_label + 1;
        let values = (0..n1 * n2)
            .map(|_| rng.random_range(0..k) as u8)
            .collect();
        Self::new(n1, n2, max_label, values)
    }

    pub fn n1(&self) -> usize {
        self.n1
    }

    pub fn n2(&self) -> usize {
        self.n2
    }

    pub fn max_label(&self) -> usize {
        self.max_label
    }

    pub fn num_labels(&self) -> usize {
        self.max_label + 1
    }

    pub fn num_sites(&self) -> usize {
        self.n1 * self.n2
    }

    pub fn values(&self) -> &[u8] {
        &self.values
    }

    pub fn get(&self, i1: usize, i2: usize) -> usize {
        self.values[i1 * self.n2 + i2] as usize
    }

    pub fn set(&mut self, i1: usize, i2: usize, label: usize) {
        debug_assert!(label <= self.max_label);
        self.values[i1 * self.n2 + i2] = label as u8;
    }

    /// Label at `(i1 + dr1, i2 + dr2)` when that site exists.
    pub fn neighbor(&self, i1: usize, i2: usize, dr1: i32, dr2: i32) -> Option<usize> {
        let j1 = i1 as i64 + dr1 as i64;
        let j2 = i2 as i64 + dr2 as i64;
        if j1 < 0 || j2 < 0 || j1 >= self.n1 as i64 || j2 >= self.n2 as i64 {
            None
        } else {
            Some(self.get(j1 as usize, j2 as usize))
        }
    }

    pub fn same_shape(&self, other: &Field) -> bool {
        self.n1 == other.n1 && self.n2 == other.n2 && self.max_label == other.max_label
    }

    /// Configuration index in base `C+1`, site 0 (row-major) least significant.
    pub fn state_index(&self) -> u64 {
        let k = self.num_labels() as u64;
        self.values
            .iter()
            .rev()
            .fold(0u64, |acc, &v| acc * k + v as u64)
    }

    pub fn from_state_index(n1: usize, n2: usize, max_label: usize, mut index: u64) -> Result<Self> {
        let k = (max_label + 1) as u64;
        let mut values = Vec::with_capacity(n1 * n2);
        for _ in 0..n1 * n2 {
            values.push((index % k) as u8);
            index /= k;
        }
        Self::new(n1, n2, max_label, values)
    }
}

/// Interaction coefficients `theta_{a,b,r}` for every position of an RPS.
///
/// Each subvector holds the `d = (C+1)^2 - 1` pairs `(a,b) != (0,0)` in
/// lexicographic order; `theta_{0,0,r}` is fixed at zero and not stored.
#[derive(Clone, Debug, PartialEq)]
pub struct PotentialVector {
    num_labels: usize,
    blocks: BTreeMap<Position, Vec<f64>>,
}

impl PotentialVector {
    pub fn zeros(rps: &Rps, num_labels: usize) -> Self {
        let d = free_dim(num_labels);
        Self {
            num_labels,
            blocks: rps.iter().map(|p| (p, vec![0.0; d])).collect(),
        }
    }

    /// `value` on every off-diagonal pair, 0 on the diagonal.
    pub fn off_diagonal(rps: &Rps, num_labels: usize, value: f64) -> Self {
        let mut theta = Self::zeros(rps, num_labels);
        for block in theta.blocks.values_mut() {
            for (idx, v) in block.iter_mut().enumerate() {
                let (a, b) = pair_of_index(idx, num_labels);
                if a != b {
                    *v = value;
                }
            }
        }
        theta
    }

    pub fn from_blocks(
        num_labels: usize,
        blocks: impl IntoIterator<Item = (Position, Vec<f64>)>,
    ) -> Result<Self> {
        if num_labels < 2 {
            return Err(Error::InvalidPotential("need at least 2 labels".into()));
        }
        let d = free_dim(num_labels);
        let mut map = BTreeMap::new();
        for (p, v) in blocks {
            if v.len() != d {
                return Err(Error::InvalidPotential(format!(
                    "subvector for {p} has length {}, expected {d}",
                    v.len()
                )));
            }
            if map.insert(p, v).is_some() {
                return Err(Error::DuplicatePosition(p));
            }
        }
        Rps::new(map.keys().copied())?;
        Ok(Self {
            num_labels,
            blocks: map,
        })
    }

    /// Builds from a flat vector laid out block by block in `rps` order.
    pub fn from_flat(rps: &Rps, num_labels: usize, flat: &[f64]) -> Result<Self> {
        let d = free_dim(num_labels);
        if flat.len() != d * rps.len() {
            return Err(Error::InvalidPotential(format!(
                "flat vector has length {}, expected {}",
                flat.len(),
                d * rps.len()
            )));
        }
        Ok(Self {
            num_labels,
            blocks: rps
                .iter()
                .zip(flat.chunks(d))
                .map(|(p, c)| (p, c.to_vec()))
                .collect(),
        })
    }

    pub fn num_labels(&self) -> usize {
        self.num_labels
    }

    /// Subvector length `d`.
    pub fn dim(&self) -> usize {
        free_dim(self.num_labels)
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn positions(&self) -> impl Iterator<Item = Position> + '_ {
        self.blocks.keys().copied()
    }

    pub fn rps(&self) -> Rps {
        Rps {
            positions: self.blocks.keys().copied().collect(),
        }
    }

    pub fn matches(&self, rps: &Rps) -> bool {
        self.blocks.len() == rps.len() && self.blocks.keys().zip(rps.iter()).all(|(a, b)| *a == b)
    }

    pub fn block(&self, p: Position) -> Option<&[f64]> {
        self.blocks.get(&p).map(Vec::as_slice)
    }

    pub fn block_mut(&mut self, p: Position) -> Option<&mut [f64]> {
        self.blocks.get_mut(&p).map(Vec::as_mut_slice)
    }

    pub fn blocks(&self) -> impl Iterator<Item = (Position, &[f64])> + '_ {
        self.blocks.iter().map(|(p, v)| (*p, v.as_slice()))
    }

    pub fn blocks_mut(&mut self) -> impl Iterator<Item = (Position, &mut Vec<f64>)> + '_ {
        self.blocks.iter_mut().map(|(p, v)| (*p, v))
    }

    /// `theta_{a,b,r}`, with the reference pair `(0,0)` reading as 0.
    pub fn get(&self, a: usize, b: usize, p: Position) -> Option<f64> {
        let block = self.blocks.get(&p)?;
        Some(match pair_index(a, b, self.num_labels) {
            Some(i) => block[i],
            None => 0.0,
        })
    }

    pub fn insert(&mut self, p: Position, block: Vec<f64>) -> Result<()> {
        if block.len() != self.dim() {
            return Err(Error::InvalidPotential(format!(
                "subvector for {p} has length {}, expected {}",
                block.len(),
                self.dim()
            )));
        }
        if self.blocks.contains_key(&p) || self.blocks.contains_key(&p.opposite()) || p.is_zero() {
            return Err(Error::InvalidPotential(format!("cannot add {p}")));
        }
        self.blocks.insert(p, block);
        Ok(())
    }

    pub fn remove(&mut self, p: Position) -> Option<Vec<f64>> {
        self.blocks.remove(&p)
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.blocks.values().flatten().copied().collect()
    }

    /// Coordinate-wise sum of all subvectors.
    pub fn block_sum(&self) -> Vec<f64> {
        let mut sum = vec![0.0; self.dim()];
        for block in self.blocks.values() {
            for (s, v) in sum.iter_mut().zip(block) {
                *s += v;
            }
        }
        sum
    }

    pub fn squared_norm(&self) -> f64 {
        self.blocks.values().flatten().map(|v| v * v).sum()
    }
}

/// Counts `rho_{a,b,r}` of label pairs `(z_i, z_{i+r}) = (a, b)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PairCounts {
    num_labels: usize,
    counts: BTreeMap<Position, Vec<u64>>,
}

impl PairCounts {
    pub fn num_labels(&self) -> usize {
        self.num_labels
    }

    pub fn positions(&self) -> impl Iterator<Item = Position> + '_ {
        self.counts.keys().copied()
    }

    pub fn get(&self, a: usize, b: usize, p: Position) -> Option<u64> {
        self.counts.get(&p).map(|c| c[a * self.num_labels + b])
    }

    /// All `(C+1)^2` counts for `p`, row-major in `(a, b)`.
    pub fn table(&self, p: Position) -> Option<&[u64]> {
        self.counts.get(&p).map(Vec::as_slice)
    }

    /// Counts of the free pairs `(a,b) != (0,0)`, block by block: the
    /// sufficient statistic aligned with [`PotentialVector::to_flat`].
    pub fn free_vector(&self) -> Vec<f64> {
        self.counts
            .values()
            .flat_map(|c| c[1..].iter().map(|&v| v as f64))
            .collect()
    }

    /// Every count including `(0,0)`, block by block.
    pub fn full_vector(&self) -> Vec<f64> {
        self.counts
            .values()
            .flat_map(|c| c.iter().map(|&v| v as f64))
            .collect()
    }
}

/// Exact pair counts of `field` for every position of `rps`.
pub fn pair_counts(field: &Field, rps: &Rps) -> PairCounts {
    let k = field.num_labels();
    let (n1, n2) = (field.n1(), field.n2());
    let vals = field.values();
    let counts = rps
        .iter()
        .map(|p| {
            let mut table = vec![0u64; k * k];
            let (lo1, hi1) = clip(p.dr1, n1);
            let (lo2, hi2) = clip(p.dr2, n2);
            for i1 in lo1..hi1 {
                let j1 = (i1 as i64 + p.dr1 as i64) as usize;
                let row = &vals[i1 * n2..(i1 + 1) * n2];
                let nrow = &vals[j1 * n2..(j1 + 1) * n2];
                for i2 in lo2..hi2 {
                    let j2 = (i2 as i64 + p.dr2 as i64) as usize;
                    table[row[i2] as usize * k + nrow[j2] as usize] += 1;
                }
            }
            (p, table)
        })
        .collect();
    PairCounts {
        num_labels: k,
        counts,
    }
}

/// Range of indices `i` in `0..n` with `i + dr` also in `0..n`.
fn clip(dr: i32, n: usize) -> (usize, usize) {
    let a = dr.unsigned_abs() as usize;
    if a >= n {
        (0, 0)
    } else if dr >= 0 {
        (0, n - a)
    } else {
        (a, n)
    }
}

/// `sum_{a,b,r} theta_{a,b,r} * rho_{a,b,r}`: the unnormalized log-likelihood.
pub fn theta_dot_counts(theta: &PotentialVector, counts: &PairCounts) -> Result<f64> {
    if theta.num_labels != counts.num_labels {
        return Err(Error::LabelMismatch(theta.num_labels, counts.num_labels));
    }
    if theta.blocks.len() != counts.counts.len()
        || theta.blocks.keys().zip(counts.counts.keys()).any(|(a, b)| a != b)
    {
        return Err(Error::PositionMismatch);
    }
    let mut total = 0.0;
    for (block, table) in theta.blocks.values().zip(counts.counts.values()) {
        total += block
            .iter()
            .zip(&table[1..])
            .map(|(t, &c)| t * c as f64)
            .sum::<f64>();
    }
    Ok(total)
}
