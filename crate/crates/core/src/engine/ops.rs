//! The elementary variation operators and parameter samplers.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::state::{pbest_count, AlgoState, Donor};
use crate::error::{Error, Result};

/// Retry cap of the positive-part Cauchy resampling loop.
pub const F_RETRY_CAP: usize = 1_000_000;

/// Map a raw Cauchy draw to a scaling factor: `None` if it must be redrawn.
pub fn truncate_f(raw: f64) -> Option<f64> {
    if raw > 0.0 {
        Some(raw.min(1.0))
    } else {
        None
    }
}

/// Draw `F` by inverse CDF from a supplied stream of uniforms.
pub fn sample_f_from_uniforms(
    loc: f64,
    scale: f64,
    mut uniform: impl FnMut() -> f64,
) -> Result<f64> {
    for _ in 0..F_RETRY_CAP {
        let raw = loc + scale * (PI * (uniform() - 0.5)).tan();
        if let Some(f) = truncate_f(raw) {
            return Ok(f);
        }
    }
    Err(Error::RetryCap(F_RETRY_CAP))
}

/// `F ~ Cauchy(loc, scale)`, redrawn while `<= 0`, truncated to 1.
pub fn sample_f<R: Rng + ?Sized>(loc: f64, scale: f64, rng: &mut R) -> Result<f64> {
    sample_f_from_uniforms(loc, scale, || rng.random::<f64>())
}

pub fn clip_cr(raw: f64) -> f64 {
    raw.clamp(0.0, 1.0)
}

/// `CR ~ N(loc, sigma^2)` clipped to `[0, 1]`.
pub fn sample_cr<R: Rng + ?Sized>(loc: f64, sigma: f64, rng: &mut R) -> f64 {
    let normal = Normal::new(loc, sigma).expect("sigma validated positive");
    clip_cr(normal.sample(rng))
}

/// Indices drawn for one target.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Selection {
    pub b: usize,
    pub r1: usize,
    pub r2: Donor,
    /// Memory slot, 0-based.
    pub k: usize,
}

/// Uniform draw from `0..n` skipping the sorted, distinct `excl`.
fn pick_excluding<R: Rng + ?Sized>(rng: &mut R, n: usize, excl: &[usize]) -> usize {
    let mut j = rng.random_range(0..n - excl.len());
    for &e in excl {
        if j >= e {
            j += 1;
        }
    }
    j
}

fn sorted_distinct(mut v: Vec<usize>) -> Vec<usize> {
    v.sort_unstable();
    v.dedup();
    v
}

/// Two-pool index selection for target `i`.
///
/// `b` is uniform on the p-best set, `r1` uniform on `P \ {i, b}`, `r2`
/// uniform on `(P ∪ A) \ {i, b, r1}`, and the slot uniform on `0..H`.
pub fn select_indices<R: Rng + ?Sized>(
    state: &AlgoState,
    i: usize,
    p_best: f64,
    rng: &mut R,
) -> Result<Selection> {
    let mut pbest = state.ranking();
    pbest.truncate(pbest_count(p_best, state.n()));
    select_from(state, i, &pbest, rng)
}

/// [`select_indices`] with a precomputed p-best set.
pub(crate) fn select_from<R: Rng + ?Sized>(
    state: &AlgoState,
    i: usize,
    pbest: &[usize],
    rng: &mut R,
) -> Result<Selection> {
    let n = state.n();
    if n < 4 {
        return Err(Error::Config(format!(
            "index selection needs at least 4 individuals, have {n}"
        )));
    }
    let b = pbest[rng.random_range(0..pbest.len())];
    let excl = sorted_distinct(vec![i, b]);
    let r1 = pick_excluding(rng, n, &excl);
    let excl = sorted_distinct(vec![i, b, r1]);
    let j = pick_excluding(rng, n + state.archive.len(), &excl);
    let r2 = if j < n {
        Donor::Pop(j)
    } else {
        Donor::Archive(j - n)
    };
    let k = rng.random_range(0..state.memory_size());
    Ok(Selection { b, r1, r2, k })
}

fn check_dims(d: usize, others: &[&[f64]]) -> Result<()> {
    for o in others {
        if o.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: o.len(),
            });
        }
    }
    Ok(())
}

/// Pre-repair mutant `x_i + F ((x_b - x_i) + (x_r1 - x_r2))`.
pub fn mutate(xi: &[f64], xb: &[f64], xr1: &[f64], xr2: &[f64], f: f64) -> Result<Vec<f64>> {
    check_dims(xi.len(), &[xb, xr1, xr2])?;
    Ok(mutate_unchecked(xi, xb, xr1, xr2, f))
}

pub(crate) fn mutate_unchecked(xi: &[f64], xb: &[f64], xr1: &[f64], xr2: &[f64], f: f64) -> Vec<f64> {
    (0..xi.len())
        .map(|j| xi[j] + f * ((xb[j] - xi[j]) + (xr1[j] - xr2[j])))
        .collect()
}

/// Midpoint repair towards the parent for coordinates outside the box.
pub fn boundary_repair(v: &[f64], parent: &[f64], lower: &[f64], upper: &[f64]) -> Vec<f64> {
    v.iter()
        .enumerate()
        .map(|(j, &vj)| {
            if vj < lower[j] {
                (lower[j] + parent[j]) / 2.0
            } else if vj > upper[j] {
                (upper[j] + parent[j]) / 2.0
            } else {
                vj
            }
        })
        .collect()
}

/// Outcome of binomial crossover.
#[derive(Debug, Clone, PartialEq)]
pub struct Crossover {
    pub u: Vec<f64>,
    /// Forced index `J`.
    pub forced: usize,
    /// Coordinates whose inheritance was drawn from the mutant, including `J`.
    pub mutant_count: usize,
    /// False when no non-forced coordinate choice could change the trial,
    /// i.e. `v` and `x` agree off the forced index.
    pub cr_defined: bool,
}

pub fn crossover<R: Rng + ?Sized>(v: &[f64], x: &[f64], cr: f64, rng: &mut R) -> Crossover {
    let d = v.len();
    let forced = rng.random_range(0..d);
    let mut u = x.to_vec();
    let mut mutant_count = 0;
    let mut cr_defined = false;
    for j in 0..d {
        if j == forced {
            u[j] = v[j];
            mutant_count += 1;
            continue;
        }
        if v[j] != x[j] {
            cr_defined = true;
        }
        if rng.random::<f64>() < cr {
            u[j] = v[j];
            mutant_count += 1;
        }
    }
    Crossover {
        u,
        forced,
        mutant_count,
        cr_defined,
    }
}

/// Weighted Lehmer mean `sum w s^2 / sum w s`; `None` if the denominator vanishes.
pub fn lehmer_mean(values: &[f64], weights: &[f64]) -> Option<f64> {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return None;
    }
    let (num, den) = values
        .iter()
        .zip(weights)
        .fold((0.0, 0.0), |(n, d), (s, w)| (n + w / total * s * s, d + w / total * s));
    if den > 0.0 {
        Some(num / den)
    } else {
        None
    }
}
