use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::Rps;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MoveKind {
    RandomWalk,
    BirthDeath,
    Swap,
    Split,
    Merge,
}

impl MoveKind {
    pub const ALL: [MoveKind; 5] = [
        MoveKind::RandomWalk,
        MoveKind::BirthDeath,
        MoveKind::Swap,
        MoveKind::Split,
        MoveKind::Merge,
    ];

    /// The move that undoes this one.
    pub fn inverse(self) -> Self {
        match self {
            MoveKind::Split => MoveKind::Merge,
            MoveKind::Merge => MoveKind::Split,
            other => other,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            MoveKind::RandomWalk => "w",
            MoveKind::BirthDeath => "bd",
            MoveKind::Swap => "sw",
            MoveKind::Split => "s",
            MoveKind::Merge => "m",
        }
    }

    fn slot(self) -> usize {
        self as usize
    }
}

impl fmt::Display for MoveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for MoveKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MoveKind::ALL
            .into_iter()
            .find(|k| k.label() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown move label `{s}`")))
    }
}

impl Serialize for MoveKind {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.label())
    }
}

impl<'de> Deserialize<'de> for MoveKind {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Unnormalized mixture weights; each is multiplied by the move's validity
/// indicator for the current RPS before normalizing.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MoveWeights {
    pub w: f64,
    pub bd: f64,
    pub sw: f64,
    pub s: f64,
    pub m: f64,
}

impl Default for MoveWeights {
    fn default() -> Self {
        Self {
            w: 4.0,
            bd: 1.0,
            sw: 1.0,
            s: 1.0,
            m: 1.0,
        }
    }
}

impl MoveWeights {
    pub fn validate(&self) -> Result<()> {
        let all = [self.w, self.bd, self.sw, self.s, self.m];
        if all.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidConfig("move weights must be finite and >= 0".into()));
        }
        if self.bd <= 0.0 {
            return Err(Error::InvalidConfig(
                "birth/death weight must be > 0 (it is the only move valid at R = {})".into(),
            ));
        }
        Ok(())
    }

    fn get(&self, kind: MoveKind) -> f64 {
        match kind {
            MoveKind::RandomWalk => self.w,
            MoveKind::BirthDeath => self.bd,
            MoveKind::Swap => self.sw,
            MoveKind::Split => self.s,
            MoveKind::Merge => self.m,
        }
    }
}

/// Probability of selecting each move type from a given RPS.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MoveProbabilities([f64; 5]);

impl MoveProbabilities {
    pub fn get(&self, kind: MoveKind) -> f64 {
        self.0[kind.slot()]
    }

    /// Probability 1 on a single move type.
    pub fn only(kind: MoveKind) -> Self {
        let mut p = [0.0; 5];
        p[kind.slot()] = 1.0;
        Self(p)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> MoveKind {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut last = MoveKind::BirthDeath;
        for kind in MoveKind::ALL {
            let p = self.get(kind);
            if p > 0.0 {
                acc += p;
                last = kind;
                if u < acc {
                    return kind;
                }
            }
        }
        last
    }
}

/// Mixture probabilities for the current `rps`:
/// random walk needs `R != {}`; swap and split need `{} != R != R_max`;
/// merge additionally needs `|R| >= 2`; birth/death is always valid.
pub fn move_probabilities(rps: &Rps, rps_max: &Rps, weights: &MoveWeights) -> MoveProbabilities {
    let nonempty = !rps.is_empty();
    let interior = nonempty && rps.len() < rps_max.len();
    let enabled = |kind: MoveKind| match kind {
        MoveKind::RandomWalk => nonempty,
        MoveKind::BirthDeath => true,
        MoveKind::Swap | MoveKind::Split => interior,
        MoveKind::Merge => interior && rps.len() >= 2,
    };
    let mut p = [0.0; 5];
    for kind in MoveKind::ALL {
        if enabled(kind) {
            p[kind.slot()] = weights.get(kind);
        }
    }
    let total: f64 = p.iter().sum();
    for x in &mut p {
        *x /= total;
    }
    MoveProbabilities(p)
}
