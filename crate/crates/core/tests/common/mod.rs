//! Independent test oracles shared by the integration and acceptance tests.
//!
//! Nothing here calls the crate's kernel-ratio code: proposal densities are
//! rebuilt from the move definitions, with the Jacobian of each transform
//! taken numerically.
#![allow(dead_code)]

use mrfsel::lattice::{free_dim, Field, Position, PotentialVector, Rps};
use mrfsel::model::exact_log_probabilities;
use mrfsel::rjmcmc::{ChainState, MoveKind};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::function::gamma::ln_gamma;

pub const W_MIN: f64 = 1e-300;
pub const W_MAX: f64 = 1.0 - 1e-300;

/// Sum of univariate `N(0, var)` log densities.
pub fn ln_normal(x: &[f64], var: f64) -> f64 {
    let sd = var.sqrt();
    x.iter()
        .map(|v| -(sd * (2.0 * std::f64::consts::PI).sqrt()).ln() - 0.5 * (v / sd) * (v / sd))
        .sum()
}

/// Symmetric Dirichlet log density of `w` on `w.len()` cells, with respect
/// to Lebesgue measure on the first `len - 1` coordinates.
pub fn ln_dirichlet(w: &[f64], nu: f64) -> f64 {
    let k = w.len();
    if k <= 1 {
        return 0.0;
    }
    let norm = ln_gamma(k as f64 * nu) - k as f64 * ln_gamma(nu);
    norm + w
        .iter()
        .map(|x| (nu - 1.0) * x.clamp(W_MIN, W_MAX).ln())
        .sum::<f64>()
}

/// Determinant by Gaussian elimination with partial pivoting.
pub fn determinant(mut m: Vec<Vec<f64>>) -> f64 {
    let n = m.len();
    let mut det = 1.0;
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))
            .unwrap();
        if m[piv][col] == 0.0 {
            return 0.0;
        }
        if piv != col {
            m.swap(piv, col);
            det = -det;
        }
        det *= m[col][col];
        for row in col + 1..n {
            let f = m[row][col] / m[col][col];
            for c in col..n {
                m[row][c] -= f * m[col][c];
            }
        }
    }
    det
}

/// Central-difference Jacobian determinant of `f` at `x`.
pub fn numeric_jacobian_det(f: impl Fn(&[f64]) -> Vec<f64>, x: &[f64]) -> f64 {
    let n = x.len();
    let h = 1e-4;
    let mut cols = Vec::with_capacity(n);
    for j in 0..n {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[j] += h;
        xm[j] -= h;
        let (fp, fm) = (f(&xp), f(&xm));
        assert_eq!(fp.len(), n, "transform must be dimension-preserving");
        cols.push(fp.iter().zip(&fm).map(|(a, b)| (a - b) / (2.0 * h)).collect::<Vec<_>>());
    }
    let rows = (0..n).map(|i| (0..n).map(|j| cols[j][i]).collect()).collect();
    determinant(rows)
}

pub fn gaussian_theta<R: Rng>(rps: &Rps, k: usize, rng: &mut R) -> PotentialVector {
    let flat: Vec<f64> = (0..rps.len() * free_dim(k))
        .map(|_| StandardNormal.sample(rng))
        .collect();
    PotentialVector::from_flat(rps, k, &flat).unwrap()
}

/// A random state whose RPS size lies in `sizes`, with N(0,1) coefficients.
pub fn random_state<R: Rng>(
    rps_max: &Rps,
    k: usize,
    sizes: std::ops::RangeInclusive<usize>,
    rng: &mut R,
) -> ChainState {
    let size = rng.random_range(sizes);
    let mut all = rps_max.positions().to_vec();
    all.shuffle(rng);
    let rps = Rps::new(all.into_iter().take(size)).unwrap();
    let theta = gaussian_theta(&rps, k, rng);
    ChainState::new(rps, theta).unwrap()
}

/// RPS sizes on which each move is defined (`m = |R_max|`).
pub fn valid_sizes(kind: MoveKind, m: usize) -> std::ops::RangeInclusive<usize> {
    match kind {
        MoveKind::RandomWalk => 1..=m,
        MoveKind::BirthDeath => 0..=m,
        MoveKind::Swap | MoveKind::Split => 1..=m - 1,
        MoveKind::Merge => 2..=m,
    }
}

pub struct KernelTuning {
    pub sigma2_w: f64,
    pub sigma2_bd: f64,
    pub sigma2_s: f64,
    pub nu: f64,
}

fn only(set: Vec<Position>) -> Position {
    assert_eq!(set.len(), 1, "expected exactly one differing position");
    set[0]
}

/// Index of the largest-magnitude coordinate, for stable division.
fn pivot(u: &[f64]) -> usize {
    (0..u.len()).max_by(|&a, &b| u[a].abs().total_cmp(&u[b].abs())).unwrap()
}

/// Split transform `(theta_R, u, w_1..w_{K-1}) -> (theta'_R, theta'_{r*}, w_1..w_{K-1})`
/// on flattened inputs; `K` blocks of length `d`.
fn split_map(x: &[f64], k_blocks: usize, d: usize) -> Vec<f64> {
    let theta = &x[..k_blocks * d];
    let u = &x[k_blocks * d..(k_blocks + 1) * d];
    let wf = &x[(k_blocks + 1) * d..];
    let mut w: Vec<f64> = wf.to_vec();
    w.push(1.0 - wf.iter().sum::<f64>());
    let mut out = Vec::with_capacity(x.len());
    for r in 0..k_blocks {
        for j in 0..d {
            out.push(theta[r * d + j] - w[r] * u[j]);
        }
    }
    out.extend_from_slice(u);
    out.extend_from_slice(wf);
    out
}

/// Merge transform `(theta_rest, theta_{r*}, w_1..w_{K-1}) -> (theta'_rest, u, w_1..w_{K-1})`.
fn merge_map(x: &[f64], k_blocks: usize, d: usize) -> Vec<f64> {
    let theta = &x[..k_blocks * d];
    let t_star = &x[k_blocks * d..(k_blocks + 1) * d];
    let wf = &x[(k_blocks + 1) * d..];
    let mut w: Vec<f64> = wf.to_vec();
    w.push(1.0 - wf.iter().sum::<f64>());
    let mut out = Vec::with_capacity(x.len());
    for r in 0..k_blocks {
        for j in 0..d {
            out.push(theta[r * d + j] + w[r] * t_star[j]);
        }
    }
    out.extend_from_slice(t_star);
    out.extend_from_slice(wf);
    out
}

/// `log kappa_reverse(old | new) - log kappa_forward(new | old)`, computed
/// from full proposal densities (selection probabilities, Gaussian and
/// Dirichlet densities, and the numerical Jacobian of the deterministic
/// transform) after recovering the random inputs from the two states.
pub fn oracle_log_kernel_ratio(
    old: &ChainState,
    new: &ChainState,
    kind: MoveKind,
    rps_max: &Rps,
    t: &KernelTuning,
) -> f64 {
    let (r_old, r_new) = (old.rps(), new.rps());
    let d = old.dim();
    let m = rps_max.len() as f64;
    match kind {
        MoveKind::RandomWalk => {
            let a = old.theta().to_flat();
            let b = new.theta().to_flat();
            let fwd: Vec<f64> = b.iter().zip(&a).map(|(x, y)| x - y).collect();
            let rev: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
            ln_normal(&rev, t.sigma2_w) - ln_normal(&fwd, t.sigma2_w)
        }
        MoveKind::BirthDeath if r_new.len() > r_old.len() => {
            let r = only(r_new.difference(r_old));
            let u = new.theta().block(r).unwrap();
            let fwd = -m.ln() + ln_normal(u, t.sigma2_bd);
            let rev = -m.ln();
            rev - fwd
        }
        MoveKind::BirthDeath => {
            let r = only(r_old.difference(r_new));
            let u = old.theta().block(r).unwrap();
            let fwd = -m.ln();
            let rev = -m.ln() + ln_normal(u, t.sigma2_bd);
            rev - fwd
        }
        MoveKind::Swap => {
            let fwd = -((r_old.len() * rps_max.difference(r_old).len()) as f64).ln();
            let rev = -((r_new.len() * rps_max.difference(r_new).len()) as f64).ln();
            rev - fwd
        }
        MoveKind::Split => {
            let r_star = only(r_new.difference(r_old));
            let u = new.theta().block(r_star).unwrap().to_vec();
            let j = pivot(&u);
            let w: Vec<f64> = r_old
                .iter()
                .map(|r| {
                    let (a, b) = (old.theta().block(r).unwrap(), new.theta().block(r).unwrap());
                    ((a[j] - b[j]) / u[j]).clamp(W_MIN, W_MAX)
                })
                .collect();
            let kb = r_old.len();
            let mut x = old.theta().to_flat();
            x.extend_from_slice(&u);
            x.extend_from_slice(&w[..kb - 1]);
            let jac = numeric_jacobian_det(|v| split_map(v, kb, d), &x).abs().ln();
            let fwd = -(rps_max.difference(r_old).len() as f64).ln()
                + ln_normal(&u, t.sigma2_s)
                + ln_dirichlet(&w, t.nu);
            let rev = -(r_new.len() as f64).ln() + ln_dirichlet(&w, t.nu);
            rev - fwd + jac
        }
        MoveKind::Merge => {
            let r_star = only(r_old.difference(r_new));
            let ts = old.theta().block(r_star).unwrap().to_vec();
            let j = pivot(&ts);
            let w: Vec<f64> = r_new
                .iter()
                .map(|r| {
                    let (a, b) = (old.theta().block(r).unwrap(), new.theta().block(r).unwrap());
                    ((b[j] - a[j]) / ts[j]).clamp(W_MIN, W_MAX)
                })
                .collect();
            let kb = r_new.len();
            let mut x: Vec<f64> = r_new
                .iter()
                .flat_map(|r| old.theta().block(r).unwrap().to_vec())
                .collect();
            x.extend_from_slice(&ts);
            x.extend_from_slice(&w[..kb - 1]);
            let jac = numeric_jacobian_det(|v| merge_map(v, kb, d), &x).abs().ln();
            let fwd = -(r_old.len() as f64).ln() + ln_dirichlet(&w, t.nu);
            let rev = -(rps_max.difference(r_new).len() as f64).ln()
                + ln_normal(&ts, t.sigma2_s)
                + ln_dirichlet(&w, t.nu);
            rev - fwd + jac
        }
    }
}

/// Exact full conditional at `site` from the enumerated joint distribution:
/// `f(z with z_i = a) / sum_b f(z with z_i = b)`.
pub fn exact_conditional(
    field: &Field,
    site: (usize, usize),
    rps: &Rps,
    theta: &PotentialVector,
) -> Vec<f64> {
    let logp = exact_log_probabilities(field.n1(), field.n2(), field.max_label(), rps, theta)
        .unwrap();
    let mut f = field.clone();
    let lp: Vec<f64> = (0..field.num_labels())
        .map(|a| {
            f.set(site.0, site.1, a);
            logp[f.state_index() as usize]
        })
        .collect();
    let m = lp.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = lp.iter().map(|x| (x - m).exp()).sum();
    lp.iter().map(|x| (x - m).exp() / z).collect()
}

/// Total-variation distance between two probability vectors.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Binomial coefficient as f64.
pub fn choose(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}
