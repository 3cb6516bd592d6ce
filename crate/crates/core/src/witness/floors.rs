//! Crossover constant, parameter-distribution floors and the hazard floor `a_t`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::factorial::ln_binomial;

use crate::error::{Error, Result};
use crate::objectives::ObjectiveSpec;

/// Thresholds of the witness event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WitnessConfig {
    pub f_minus: f64,
    pub f_plus: f64,
    pub delta_f: f64,
    pub c_cr: f64,
    pub g_minus: f64,
    pub q_minus: f64,
    /// Coordinate-replacement budget `r`; `None` uses [`median_r`].
    pub r_mask: Option<usize>,
    pub eps: f64,
    pub grid_points: usize,
    /// Candidate tuples tried per generation when searching for an L1 witness.
    pub max_candidates: usize,
    /// With Morse data, also require `||x_i - v_i(F)||_inf <= delta_max` so
    /// that the crossover step is certified.
    pub stability_filter: bool,
}

impl Default for WitnessConfig {
    fn default() -> Self {
        Self {
            f_minus: 0.1,
            f_plus: 0.9,
            delta_f: 0.05,
            c_cr: 0.5,
            g_minus: 0.1,
            q_minus: 0.5,
            r_mask: None,
            eps: 1e-2,
            grid_points: 256,
            max_candidates: 32,
            stability_filter: true,
        }
    }
}

impl WitnessConfig {
    pub fn with_eps(mut self, eps: f64) -> Self {
        self.eps = eps;
        self
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if !(0.0 < self.f_minus && self.f_minus < self.f_plus && self.f_plus <= 1.0) {
            return fail(format!(
                "need 0 < f_minus < f_plus <= 1, got [{}, {}]",
                self.f_minus, self.f_plus
            ));
        }
        if !(self.delta_f > 0.0 && self.delta_f <= self.f_plus - self.f_minus) {
            return fail(format!("delta_f must lie in (0, f_plus - f_minus], got {}", self.delta_f));
        }
        if !(self.c_cr > 0.0 && self.c_cr < 1.0) {
            return fail(format!("c_cr must lie in (0, 1), got {}", self.c_cr));
        }
        if !(self.g_minus > 0.0) {
            return fail("g_minus must be positive".into());
        }
        if !(self.q_minus > 0.0 && self.q_minus <= 1.0) {
            return fail(format!("q_minus must lie in (0, 1], got {}", self.q_minus));
        }
        if let Some(r) = self.r_mask {
            if r >= dim {
                return fail(format!("r_mask must be <= d - 1 = {}, got {r}", dim - 1));
            }
        }
        if !(self.eps > 0.0) {
            return fail(format!("eps must be positive, got {}", self.eps));
        }
        if self.grid_points < 2 {
            return fail("grid_points must be >= 2".into());
        }
        if self.f_plus == 1.0 {
            log::warn!("f_plus = 1: the truncation atom at F = 1 is outside the density floor");
        }
        Ok(())
    }

    pub fn r(&self, dim: usize) -> usize {
        self.r_mask.unwrap_or_else(|| median_r(dim, self.c_cr))
    }

    /// `(g- Delta_F) (q- eta_r)`.
    pub fn floor_product(&self, dim: usize) -> Result<f64> {
        Ok(self.g_minus * self.delta_f * self.q_minus * eta_r(dim, self.c_cr, self.r(dim))?)
    }
}

/// `P(Bin(d - 1, c) >= d - r - 1)`.
pub fn eta_r(d: usize, c: f64, r: usize) -> Result<f64> {
    if d == 0 || r >= d || !(0.0..=1.0).contains(&c) {
        return Err(Error::Parameter(format!(
            "eta_r needs d >= 1, 0 <= r <= d - 1, c in [0, 1] (d = {d}, r = {r}, c = {c})"
        )));
    }
    let n = (d - 1) as u64;
    let k = (d - 1 - r) as u64;
    if k == 0 {
        return Ok(1.0);
    }
    if c == 0.0 {
        return Ok(0.0);
    }
    if c == 1.0 {
        return Ok(1.0);
    }
    let (lc, l1c) = (c.ln(), (1.0 - c).ln());
    let tail: f64 = (k..=n)
        .map(|j| (ln_binomial(n, j) + j as f64 * lc + (n - j) as f64 * l1c).exp())
        .sum();
    Ok(tail.min(1.0))
}

/// `r = d - 1 - floor((d - 1) c)`, which keeps `eta_r >= 1/2`.
pub fn median_r(d: usize, c: f64) -> usize {
    let n = d.saturating_sub(1);
    n - ((n as f64 * c).floor() as usize).min(n)
}

/// Infimum over `[f_minus, f_plus]` of the density of `Cauchy(loc, scale)`
/// conditioned on a positive draw.
///
/// The normaliser is `P(X > 0) = 1/2 + atan(loc / scale) / pi`, matching
/// the redraw-if-non-positive sampler. The truncation atom at 1 is not part
/// of the density.
pub fn cauchy_density_inf(loc: f64, scale: f64, f_minus: f64, f_plus: f64) -> f64 {
    let z = 0.5 + (loc / scale).atan() / PI;
    let pdf = |x: f64| 1.0 / (PI * scale * (1.0 + ((x - loc) / scale).powi(2)));
    pdf(f_minus).min(pdf(f_plus)) / z
}

/// `P(CR >= c_cr)` for `CR = clip(N(loc, sigma^2), 0, 1)`.
pub fn cr_tail(loc: f64, sigma: f64, c_cr: f64) -> f64 {
    if c_cr <= 0.0 {
        return 1.0;
    }
    if c_cr > 1.0 {
        return 0.0;
    }
    let std = Normal::new(0.0, 1.0).expect("standard normal");
    1.0 - std.cdf((c_cr - loc) / sigma)
}

/// `(1/H) (1/m) 1/(s1 (s2 - 1))`.
pub fn combinatorial_prefactor(h: usize, m: usize, s1: usize, s2: usize) -> f64 {
    1.0 / (h as f64 * m as f64 * s1 as f64 * (s2 as f64 - 1.0))
}

/// Measured witness quantities for one generation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measured {
    pub interval_measure: f64,
    pub density_inf: f64,
    pub cr_tail: f64,
}

/// Hazard floor `a_t` on the witness event.
///
/// The product uses the configured floors, so `a_t` is deterministic given
/// the configuration and pool sizes; `measured` only certifies that L1-L3
/// hold.
pub fn hazard_floor_a(
    cfg: &WitnessConfig,
    h: usize,
    m: usize,
    s1: usize,
    s2: usize,
    measured: &Measured,
    dim: usize,
) -> Result<f64> {
    if s1 < 1 || s2 < 2 || h == 0 || m == 0 {
        return Err(Error::Parameter(format!(
            "pool sizes need H, m, s1 >= 1 and s2 >= 2 (H = {h}, m = {m}, s1 = {s1}, s2 = {s2})"
        )));
    }
    let mut missing = Vec::new();
    if measured.interval_measure < cfg.delta_f {
        missing.push("L1");
    }
    if measured.density_inf < cfg.g_minus {
        missing.push("L2");
    }
    if measured.cr_tail < cfg.q_minus {
        missing.push("L3");
    }
    if !missing.is_empty() {
        return Err(Error::WitnessNotEstablished(missing.join(", ")));
    }
    Ok(floor_unchecked(cfg, h, m, s1, s2, dim)?)
}

pub(crate) fn floor_unchecked(
    cfg: &WitnessConfig,
    h: usize,
    m: usize,
    s1: usize,
    s2: usize,
    dim: usize,
) -> Result<f64> {
    Ok((combinatorial_prefactor(h, m, s1, s2) * cfg.floor_product(dim)?).clamp(0.0, 1.0))
}

/// Repaired mutant `v_i(F)` written into `out`.
pub(crate) fn repaired_mutant(
    spec: &ObjectiveSpec,
    xi: &[f64],
    xb: &[f64],
    xr1: &[f64],
    xr2: &[f64],
    f: f64,
    out: &mut [f64],
) {
    for j in 0..xi.len() {
        let v = xi[j] + f * ((xb[j] - xi[j]) + (xr1[j] - xr2[j]));
        out[j] = if v < spec.lower[j] {
            (spec.lower[j] + xi[j]) / 2.0
        } else if v > spec.upper[j] {
            (spec.upper[j] + xi[j]) / 2.0
        } else {
            v
        };
    }
}

/// Grid estimate of the success-F window measure.
///
/// Counts midpoints `F_k = F- + (k + 1/2) (F+ - F-) / n` whose repaired
/// mutant satisfies `f <= f* + eps/2` (and, with `delta_inf`, stays within
/// that sup-norm distance of the parent).
pub(crate) fn window_measure(
    spec: &ObjectiveSpec,
    xi: &[f64],
    xb: &[f64],
    xr1: &[f64],
    xr2: &[f64],
    cfg: &WitnessConfig,
    delta_inf: Option<f64>,
) -> f64 {
    let n = cfg.grid_points;
    let width = cfg.f_plus - cfg.f_minus;
    let target = spec.f_star + cfg.eps / 2.0;
    let mut v = vec![0.0; xi.len()];
    let mut count = 0usize;
    for k in 0..n {
        let f = cfg.f_minus + (k as f64 + 0.5) * width / n as f64;
        repaired_mutant(spec, xi, xb, xr1, xr2, f, &mut v);
        if let Some(delta) = delta_inf {
            let far = v.iter().zip(xi).any(|(a, b)| (a - b).abs() > delta);
            if far {
                continue;
            }
        }
        if spec.eval(&v) <= target {
            count += 1;
        }
    }
    count as f64 / n as f64 * width
}

/// Measure of `{F in [F-, F+] : f(v_i(F)) <= f* + eps/2}` on a uniform grid.
pub fn success_f_interval(
    spec: &ObjectiveSpec,
    xi: &[f64],
    xb: &[f64],
    xr1: &[f64],
    xr2: &[f64],
    cfg: &WitnessConfig,
) -> Result<f64> {
    if cfg.grid_points < 2 {
        return Err(Error::Parameter("grid_points must be >= 2".into()));
    }
    for v in [xi, xb, xr1, xr2] {
        if v.len() != spec.dim {
            return Err(Error::DimensionMismatch {
                expected: spec.dim,
                got: v.len(),
            });
        }
    }
    Ok(window_measure(spec, xi, xb, xr1, xr2, cfg, None))
}
