//! Quantities that need local curvature data: safe ball, crossover
//! stability, donor-pair fractions and the tightened floor.

use crate::engine::{pbest_count, AlgoState, EngineConfig};
use crate::error::{Error, Result};
use crate::objectives::{MorseData, ObjectiveSpec};

use super::floors::{cauchy_density_inf, cr_tail, WitnessConfig};

/// `(1 - 1/sqrt 2) sqrt(eps / L)`.
pub fn r_safe(eps: f64, lip: f64) -> f64 {
    (1.0 - std::f64::consts::FRAC_1_SQRT_2) * (eps / lip).sqrt()
}

/// `(sqrt 2 - 1) sqrt(eps / (L r))`; `+inf` for `r = 0` (nothing is replaced).
pub fn delta_max(eps: f64, lip: f64, r: usize) -> f64 {
    if r == 0 {
        return f64::INFINITY;
    }
    (std::f64::consts::SQRT_2 - 1.0) * (eps / (lip * r as f64)).sqrt()
}

/// Largest dimension handled by [`crossover_stable_check`].
pub const EXHAUSTIVE_MAX_DIM: usize = 20;

fn morse_of(spec: &ObjectiveSpec) -> Result<&MorseData> {
    spec.morse
        .as_ref()
        .ok_or_else(|| Error::MissingMorseData(spec.id.clone()))
}

/// Brute-force check that every hybrid of `v` and `x` keeping at least
/// `d - r` coordinates of `v` lies in `A_eps`.
pub fn crossover_stable_check(
    spec: &ObjectiveSpec,
    eps: f64,
    r: usize,
    delta: f64,
    v: &[f64],
    x: &[f64],
) -> Result<bool> {
    let d = spec.dim;
    if d > EXHAUSTIVE_MAX_DIM {
        return Err(Error::ExhaustiveTooLarge {
            d,
            limit: EXHAUSTIVE_MAX_DIM,
        });
    }
    if v.len() != d || x.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: v.len().min(x.len()),
        });
    }
    if spec.eval(v) > spec.f_star + eps / 2.0 {
        return Err(Error::Parameter("v must lie in A_{eps/2}".into()));
    }
    if v.iter().zip(x).any(|(a, b)| (a - b).abs() > delta) {
        return Err(Error::Parameter("||x - v||_inf exceeds delta".into()));
    }
    let target = spec.f_star + eps;
    let mut u = v.to_vec();
    for mask in 0u32..(1u32 << d) {
        if mask.count_ones() as usize > r {
            continue;
        }
        for j in 0..d {
            u[j] = if mask >> j & 1 == 1 { x[j] } else { v[j] };
        }
        if spec.eval(&u) > target {
            return Ok(false);
        }
    }
    Ok(true)
}

/// `||x_r1 - x_r2|| <= r_safe / (F- + Delta_F)`.
pub fn donor_pair_good(
    spec: &ObjectiveSpec,
    xr1: &[f64],
    xr2: &[f64],
    cfg: &WitnessConfig,
) -> Result<bool> {
    let morse = morse_of(spec)?;
    let norm = dist(xr1, xr2);
    Ok(norm <= r_safe(cfg.eps, morse.lip) / (cfg.f_minus + cfg.delta_f))
}

/// Smaller root of `16 c t^2 - (3 + 16 c) t + 2 = 0`; `2/3` at `c = 0`.
pub fn theta_minus(c: f64) -> f64 {
    let b = 3.0 + 16.0 * c;
    // 2a / (b + sqrt(b^2 - 4ac)) form: no cancellation, continuous at c = 0.
    4.0 / (b + (b * b - 128.0 * c).sqrt())
}

/// `F0 (1 - theta_-(c))`, a lower bound on the success-F window that is
/// always at least `F0 / 3`.
pub fn strong_convex_interval(f0: f64, c: f64) -> Result<f64> {
    if !(f0 > 0.0 && f0 <= 1.0) || !(c >= 0.0) {
        return Err(Error::Parameter(format!(
            "need f0 in (0, 1] and c >= 0 (f0 = {f0}, c = {c})"
        )));
    }
    Ok(f0 * (1.0 - theta_minus(c)))
}

/// `beta1 beta2 (1 - 1/(beta2 s2))`; zero with a warning when `beta2 s2 <= 1`.
pub fn c_pair_bound(beta1: f64, beta2: f64, s2: usize) -> f64 {
    let bs = beta2 * s2 as f64;
    if bs <= 1.0 {
        log::warn!("degenerate donor concentration: beta2 * s2 = {bs} <= 1");
        return 0.0;
    }
    beta1 * beta2 * (1.0 - 1.0 / bs)
}

/// `(c_pair / H) (g- Delta_F) (q- eta_r)`.
pub fn morse_hazard_floor(c_pair: f64, h: usize, cfg: &WitnessConfig, dim: usize) -> Result<f64> {
    Ok((c_pair / h as f64 * cfg.floor_product(dim)?).clamp(0.0, 1.0))
}

/// Witness-probability floor in the stabilised regime.
#[allow(clippy::too_many_arguments)]
pub fn gamma0(
    h: usize,
    g_minus: f64,
    f_range: f64,
    q_minus: f64,
    p: f64,
    n: usize,
    a: usize,
    m_cluster: usize,
) -> Result<f64> {
    if m_cluster < 4 {
        return Err(Error::Parameter(format!(
            "cluster size must be >= 4, got {m_cluster}"
        )));
    }
    if n < m_cluster {
        return Err(Error::Parameter(format!(
            "population ({n}) smaller than cluster size ({m_cluster})"
        )));
    }
    let m = pbest_count(p, n);
    let mc = m_cluster as f64;
    Ok(g_minus * f_range * q_minus / h as f64 / m as f64 * (mc - 2.0) / (n as f64 - 2.0)
        * (mc - 3.0)
        / ((n + a) as f64 - 3.0))
}

/// Both sides of the noisy-descent inequality.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoisyDescent {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// Evaluate `f(v) <= f(x) - (mu/2) F (1-F) ||x-z||^2 + L r0 ||e|| + (L/2) ||e||^2`
/// with `v = (1-F) x + F z + e`, `e = F (x_r1 - x_r2)`.
pub fn verify_noisy_descent(
    spec: &ObjectiveSpec,
    x: &[f64],
    z: &[f64],
    xr1: &[f64],
    xr2: &[f64],
    f: f64,
) -> Result<NoisyDescent> {
    let morse = morse_of(spec)?;
    let xs = spec
        .x_star
        .as_ref()
        .ok_or_else(|| Error::MissingMorseData(spec.id.clone()))?;
    if !(f > 0.0 && f < 1.0) {
        return Err(Error::Parameter(format!("F must lie in (0, 1), got {f}")));
    }
    let in_ball = |p: &[f64]| dist(p, xs) <= morse.r0;
    if ![x, z, xr1, xr2].iter().all(|p| in_ball(p)) {
        return Err(Error::Parameter("points must lie in B(x*, r0)".into()));
    }
    let (fx, fz) = (spec.eval(x), spec.eval(z));
    if fz > fx {
        return Err(Error::Parameter("need f(z) <= f(x)".into()));
    }
    let e: Vec<f64> = xr1.iter().zip(xr2).map(|(a, b)| f * (a - b)).collect();
    let v: Vec<f64> = (0..x.len())
        .map(|j| (1.0 - f) * x[j] + f * z[j] + e[j])
        .collect();
    if !in_ball(&v) {
        return Err(Error::Parameter("mutant leaves B(x*, r0)".into()));
    }
    let en = e.iter().map(|c| c * c).sum::<f64>().sqrt();
    let lhs = spec.eval(&v);
    let rhs = fx - 0.5 * morse.mu * f * (1.0 - f) * dist(x, z).powi(2)
        + morse.lip * morse.r0 * en
        + 0.5 * morse.lip * en * en;
    Ok(NoisyDescent {
        lhs,
        rhs,
        holds: lhs <= rhs + 1e-12 * (1.0 + rhs.abs()),
    })
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(p, q)| (p - q) * (p - q))
        .sum::<f64>()
        .sqrt()
}

/// Conditions (C1)-(C3) of the tightened floor, evaluated for `b` = best.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MorseCheck {
    pub b: usize,
    /// `x_b` in the local `A_{eps/4}`.
    pub c1: bool,
    pub beta1: f64,
    pub beta2: f64,
    pub c_pair: f64,
    /// Concentration gives a positive donor-pair fraction.
    pub c2: bool,
    /// Some memory slot is good.
    pub c3: bool,
    pub a_tilde: f64,
}

impl MorseCheck {
    pub fn conditioned(&self) -> bool {
        self.c1 && self.c2 && self.c3
    }
}

/// Index of a good memory slot, if any.
pub(crate) fn good_slot(state: &AlgoState, ecfg: &EngineConfig, cfg: &WitnessConfig) -> Option<usize> {
    (0..state.memory_size()).find(|&k| {
        let tail = if state.cr_terminal[k] {
            0.0
        } else {
            cr_tail(state.mem_cr[k], ecfg.sigma_cr, cfg.c_cr)
        };
        cauchy_density_inf(state.mem_f[k], ecfg.sigma_f, cfg.f_minus, cfg.f_plus) >= cfg.g_minus
            && tail >= cfg.q_minus
    })
}

/// Evaluate (C1)-(C3) and `a~_t` on the pre-generation state.
///
/// Returns `None` when the objective has no Morse data or `eps` is outside
/// the basin (`2 eps > mu r0^2`).
pub fn morse_check(
    state: &AlgoState,
    spec: &ObjectiveSpec,
    ecfg: &EngineConfig,
    cfg: &WitnessConfig,
) -> Result<Option<MorseCheck>> {
    let (Some(morse), Some(xs)) = (spec.morse.as_ref(), spec.x_star.as_ref()) else {
        return Ok(None);
    };
    if 2.0 * cfg.eps > morse.mu * morse.r0 * morse.r0 {
        return Ok(None);
    }
    let b = state.best_index();
    let xb = &state.population[b].x;
    let c1 = state.population[b].f <= spec.f_star + cfg.eps / 4.0 && dist(xb, xs) <= morse.r0;
    let rho = r_safe(cfg.eps, morse.lip) / (2.0 * (cfg.f_minus + cfg.delta_f));
    let n = state.n();
    let near_pop = (0..n)
        .filter(|&j| j != b && dist(&state.population[j].x, xb) <= rho)
        .count();
    let near_arc = state.archive.iter().filter(|a| dist(a, xb) <= rho).count();
    let s1 = n - 1;
    let s2 = n + state.archive.len() - 1;
    let beta1 = near_pop as f64 / s1 as f64;
    let beta2 = (near_pop + near_arc) as f64 / s2 as f64;
    let c_pair = if beta1 > 0.0 && beta2 * s2 as f64 > 1.0 {
        c_pair_bound(beta1, beta2, s2)
    } else {
        0.0
    };
    let c2 = c_pair > 0.0;
    let c3 = good_slot(state, ecfg, cfg).is_some();
    let a_tilde = if c1 && c2 && c3 {
        morse_hazard_floor(c_pair, state.memory_size(), cfg, spec.dim)?
    } else {
        0.0
    };
    Ok(Some(MorseCheck {
        b,
        c1,
        beta1,
        beta2,
        c_pair,
        c2,
        c3,
        a_tilde,
    }))
}
