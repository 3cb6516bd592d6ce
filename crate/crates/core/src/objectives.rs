//! Benchmark objectives with known optima and local curvature constants.
//!
//! The suite is a local analogue of the usual shifted/rotated test bed:
//! classical functions translated by a shift vector and optionally rotated
//! by an orthogonal matrix. Shift/rotation pairs can be imported from a
//! plain-text data file:
//!
//! ```text
//! d
//! s_1 s_2 ... s_d
//! [r_11 r_12 ... r_1d
//!  ...
//!  r_d1 r_d2 ... r_dd]
//! ```
//!
//! All tokens are whitespace separated; the rotation block is optional and
//! is read row-major.

use std::f64::consts::{E, PI};
use std::fmt;
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive, Purpose, StreamRng};

pub const DEFAULT_LOWER: f64 = -100.0;
pub const DEFAULT_UPPER: f64 = 100.0;
const SHIFT_RANGE: f64 = 80.0;
const RASTRIGIN_SCALE: f64 = 5.12 / 100.0;
const ACKLEY_SCALE: f64 = 32.0 / 100.0;
/// Default condition number of the built-in ellipsoid.
pub const ELLIPSOID_CONDITION: f64 = 100.0;

/// Whether Morse constants are exact or came from the numeric estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MorseSource {
    Exact,
    Estimated,
}

/// Local strong-convexity / smoothness constants around the global minimizer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MorseData {
    pub mu: f64,
    pub lip: f64,
    pub r0: f64,
    pub source: MorseSource,
}

impl MorseData {
    pub fn new(mu: f64, lip: f64, r0: f64, source: MorseSource) -> Result<Self> {
        if !(mu > 0.0 && lip >= mu && r0 > 0.0) || !lip.is_finite() {
            return Err(Error::Parameter(format!(
                "Morse data needs 0 < mu <= L and r0 > 0 (mu = {mu}, L = {lip}, r0 = {r0})"
            )));
        }
        Ok(Self {
            mu,
            lip,
            r0,
            source,
        })
    }

    pub fn kappa(&self) -> f64 {
        self.lip / self.mu
    }
}

/// Inner and outer ball radii of the sublevel set `{f <= f* + eps}`.
///
/// Returns `(sqrt(2 eps / L), sqrt(2 eps / mu))`.
pub fn sublevel_radii(eps: f64, morse: &MorseData) -> Result<(f64, f64)> {
    if !(eps > 0.0) {
        return Err(Error::Parameter(format!("eps must be positive, got {eps}")));
    }
    let limit = morse.mu * morse.r0 * morse.r0;
    if 2.0 * eps > limit {
        return Err(Error::EpsTooLarge { eps, limit });
    }
    Ok(((2.0 * eps / morse.lip).sqrt(), (2.0 * eps / morse.mu).sqrt()))
}

/// Shift vector and optional row-major orthogonal rotation.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftRotation {
    pub shift: Vec<f64>,
    pub rotation: Option<Vec<f64>>,
}

impl ShiftRotation {
    pub fn dim(&self) -> usize {
        self.shift.len()
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|msg| Error::DataFile {
            path: path.to_path_buf(),
            msg,
        })
    }

    pub fn parse(text: &str) -> std::result::Result<Self, String> {
        let mut tokens = text.split_whitespace();
        let d: usize = tokens
            .next()
            .ok_or("missing dimension line")?
            .parse()
            .map_err(|e| format!("bad dimension: {e}"))?;
        if d == 0 {
            return Err("dimension must be positive".into());
        }
        let values = tokens
            .map(|t| t.parse::<f64>().map_err(|e| format!("bad number `{t}`: {e}")))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err("non-finite value".into());
        }
        let rotation = match values.len() {
            n if n == d => None,
            n if n == d + d * d => Some(values[d..].to_vec()),
            n => {
                return Err(format!(
                    "expected {d} shift values and optionally {} rotation entries, found {n} numbers",
                    d * d
                ))
            }
        };
        if let Some(r) = &rotation {
            check_orthogonal(r, d)?;
        }
        Ok(Self {
            shift: values[..d].to_vec(),
            rotation,
        })
    }
}

fn check_orthogonal(r: &[f64], d: usize) -> std::result::Result<(), String> {
    for a in 0..d {
        for b in 0..d {
            let dot: f64 = (0..d).map(|k| r[a * d + k] * r[b * d + k]).sum();
            let want = if a == b { 1.0 } else { 0.0 };
            if (dot - want).abs() > 1e-6 {
                return Err(format!(
                    "rotation is not orthogonal (row {a} . row {b} = {dot})"
                ));
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
struct CompositionComponent {
    center: Vec<f64>,
    kind: Base,
    lambda: f64,
    sigma: f64,
    bias: f64,
}

#[derive(Debug, Clone, PartialEq)]
enum Base {
    Quadratic(Vec<f64>),
    Rosenbrock,
    Rastrigin,
    Ackley,
}

impl Base {
    /// Value of the base function at rotated, centred coordinates `z`.
    fn value(&self, z: &[f64]) -> f64 {
        match self {
            Base::Quadratic(c) => z.iter().zip(c).map(|(zi, ci)| ci * zi * zi).sum(),
            Base::Rosenbrock => {
                if z.len() == 1 {
                    return z[0] * z[0];
                }
                z.windows(2)
                    .map(|w| {
                        let a = w[0] + 1.0;
                        let b = w[1] + 1.0;
                        100.0 * (b - a * a).powi(2) + (a - 1.0).powi(2)
                    })
                    .sum()
            }
            Base::Rastrigin => z
                .iter()
                .map(|&zi| {
                    let s = RASTRIGIN_SCALE * zi;
                    s * s - 10.0 * (2.0 * PI * s).cos() + 10.0
                })
                .sum(),
            Base::Ackley => {
                let n = z.len() as f64;
                let (sq, cs) = z.iter().fold((0.0, 0.0), |(sq, cs), &zi| {
                    let s = ACKLEY_SCALE * zi;
                    (sq + s * s, cs + (2.0 * PI * s).cos())
                });
                -20.0 * (-0.2 * (sq / n).sqrt()).exp() - (cs / n).exp() + 20.0 + E
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    Simple(Base),
    Composition(Vec<CompositionComponent>),
}

/// A benchmark objective on a box with a known global minimum.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveSpec {
    pub id: String,
    pub dim: usize,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub f_star: f64,
    pub x_star: Option<Vec<f64>>,
    pub morse: Option<MorseData>,
    shift: Vec<f64>,
    rotation: Option<Vec<f64>>,
    kind: Kind,
}

impl fmt::Display for ObjectiveSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (d = {})", self.id, self.dim)
    }
}

/// Identifiers accepted by [`objective`].
pub const SUITE_IDS: [&str; 6] = [
    "sphere",
    "ellipsoid",
    "rosenbrock",
    "rastrigin",
    "ackley",
    "composition",
];

impl ObjectiveSpec {
    /// Shifted (and optionally rotated) quadratic `sum_j c_j z_j^2` with exact Morse data.
    pub fn quadratic(
        id: impl Into<String>,
        coeffs: Vec<f64>,
        shift_rotation: ShiftRotation,
        lower: Vec<f64>,
        upper: Vec<f64>,
    ) -> Result<Self> {
        if coeffs.iter().any(|&c| !(c > 0.0)) {
            return Err(Error::Parameter("quadratic coefficients must be positive".into()));
        }
        let cmin = coeffs.iter().cloned().fold(f64::INFINITY, f64::min);
        let cmax = coeffs.iter().cloned().fold(0.0, f64::max);
        let mut spec = Self::build(
            id.into(),
            Kind::Simple(Base::Quadratic(coeffs)),
            shift_rotation,
            lower,
            upper,
        )?;
        // Hessian eigenvalues of sum c_j z_j^2 are 2 c_j; the bounds hold on
        // the whole box, so r0 is the distance to the farthest corner.
        let r0 = spec.farthest_corner_distance();
        spec.morse = Some(MorseData::new(2.0 * cmin, 2.0 * cmax, r0, MorseSource::Exact)?);
        Ok(spec)
    }

    fn build(
        id: String,
        kind: Kind,
        sr: ShiftRotation,
        lower: Vec<f64>,
        upper: Vec<f64>,
    ) -> Result<Self> {
        let dim = sr.dim();
        if dim == 0 {
            return Err(Error::Parameter("dimension must be positive".into()));
        }
        if lower.len() != dim || upper.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: lower.len().min(upper.len()),
            });
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l < u)) {
            return Err(Error::Parameter("box needs lower[j] < upper[j]".into()));
        }
        if let Some(r) = &sr.rotation {
            if r.len() != dim * dim {
                return Err(Error::DimensionMismatch {
                    expected: dim * dim,
                    got: r.len(),
                });
            }
        }
        let inside = sr
            .shift
            .iter()
            .zip(lower.iter().zip(&upper))
            .all(|(s, (l, u))| l <= s && s <= u);
        if !inside {
            return Err(Error::Parameter("shift vector lies outside the box".into()));
        }
        Ok(Self {
            id,
            dim,
            lower,
            upper,
            f_star: 0.0,
            x_star: Some(sr.shift.clone()),
            morse: None,
            shift: sr.shift,
            rotation: sr.rotation,
            kind,
        })
    }

    fn farthest_corner_distance(&self) -> f64 {
        let c = self.x_star.as_ref().unwrap_or(&self.shift);
        c.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(x, (l, u))| (x - l).abs().max((u - x).abs()).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// `R (x - center)`.
    fn transform(&self, x: &[f64], center: &[f64], out: &mut [f64]) {
        match &self.rotation {
            None => {
                for ((o, xi), ci) in out.iter_mut().zip(x).zip(center) {
                    *o = xi - ci;
                }
            }
            Some(r) => {
                let d = self.dim;
                for (a, o) in out.iter_mut().enumerate() {
                    let row = &r[a * d..(a + 1) * d];
                    *o = row
                        .iter()
                        .zip(x.iter().zip(center))
                        .map(|(rk, (xk, ck))| rk * (xk - ck))
                        .sum();
                }
            }
        }
    }

    /// Objective value; checks the dimension.
    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(self.eval(x))
    }

    /// Objective value without the dimension check.
    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        let mut z = vec![0.0; self.dim];
        match &self.kind {
            Kind::Simple(base) => {
                self.transform(x, &self.shift, &mut z);
                self.f_star + base.value(&z)
            }
            Kind::Composition(parts) => {
                let mut weights = Vec::with_capacity(parts.len());
                let mut values = Vec::with_capacity(parts.len());
                let mut exact = None;
                for (k, part) in parts.iter().enumerate() {
                    let d2: f64 = x
                        .iter()
                        .zip(&part.center)
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum();
                    if d2 == 0.0 && exact.is_none() {
                        exact = Some(k);
                    }
                    weights.push(
                        (-d2 / (2.0 * self.dim as f64 * part.sigma * part.sigma)).exp()
                            / d2.sqrt(),
                    );
                    self.transform(x, &part.center, &mut z);
                    values.push(part.lambda * part.kind.value(&z) + part.bias);
                }
                if let Some(k) = exact {
                    return self.f_star + values[k];
                }
                let total: f64 = weights.iter().sum();
                let mix = if total > 0.0 && total.is_finite() {
                    weights.iter().zip(&values).map(|(w, v)| w * v).sum::<f64>() / total
                } else {
                    values.iter().sum::<f64>() / values.len() as f64
                };
                self.f_star + mix
            }
        }
    }

    pub fn in_box(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (l, u))| l <= v && v <= u)
    }

    /// `f(x) <= f* + eps`.
    pub fn in_sublevel(&self, fx: f64, eps: f64) -> bool {
        fx <= self.f_star + eps
    }

    pub fn with_f_star(mut self, f_star: f64) -> Self {
        self.f_star = f_star;
        self
    }

    /// Replace Morse data, e.g. with the output of [`estimate_morse`].
    pub fn with_morse(mut self, morse: Option<MorseData>) -> Self {
        self.morse = morse;
        self
    }
}

fn random_shift(dim: usize, seed: u64, id: &str) -> Vec<f64> {
    let tag = id.bytes().fold(0u64, |h, b| derive(h, &[b as u64]));
    let mut rng = StreamRng::new(seed).stream(Purpose::Suite, tag, dim as u64);
    (0..dim)
        .map(|_| rng.random_range(-SHIFT_RANGE..SHIFT_RANGE))
        .collect()
}

fn rastrigin_morse() -> Result<MorseData> {
    // Per rotated coordinate the curvature is c^2 (2 + 40 pi^2 cos(2 pi c z)).
    // On the ball where cos(.) >= (20 pi^2 - 1) / (40 pi^2) it stays within
    // [L/2, L] with L = c^2 (2 + 40 pi^2).
    let c = RASTRIGIN_SCALE;
    let peak = 2.0 + 40.0 * PI * PI;
    let lip = c * c * peak;
    let cos_floor = (20.0 * PI * PI - 1.0) / (40.0 * PI * PI);
    let r0 = cos_floor.acos() / (2.0 * PI * c);
    MorseData::new(lip / 2.0, lip, r0, MorseSource::Exact)
}

/// Build one suite member.
///
/// `data` overrides the generated shift (and supplies a rotation); its
/// dimension must equal `dim`.
pub fn objective(
    id: &str,
    dim: usize,
    seed: u64,
    data: Option<ShiftRotation>,
) -> Result<ObjectiveSpec> {
    if !SUITE_IDS.contains(&id) {
        return Err(Error::UnknownObjective(id.to_string()));
    }
    if dim == 0 {
        return Err(Error::Parameter("dimension must be positive".into()));
    }
    let sr = match data {
        Some(sr) if sr.dim() != dim => {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: sr.dim(),
            })
        }
        Some(sr) => sr,
        None => ShiftRotation {
            shift: random_shift(dim, seed, id),
            rotation: None,
        },
    };
    let lower = vec![DEFAULT_LOWER; dim];
    let upper = vec![DEFAULT_UPPER; dim];
    let spec = match id {
        "sphere" => ObjectiveSpec::quadratic(id, vec![1.0; dim], sr, lower, upper)?,
        "ellipsoid" => {
            let coeffs = (0..dim)
                .map(|j| {
                    if dim == 1 {
                        1.0
                    } else {
                        ELLIPSOID_CONDITION.powf(j as f64 / (dim - 1) as f64)
                    }
                })
                .collect();
            ObjectiveSpec::quadratic(id, coeffs, sr, lower, upper)?
        }
        "rosenbrock" => {
            ObjectiveSpec::build(id.into(), Kind::Simple(Base::Rosenbrock), sr, lower, upper)?
        }
        "rastrigin" => {
            let mut s =
                ObjectiveSpec::build(id.into(), Kind::Simple(Base::Rastrigin), sr, lower, upper)?;
            s.morse = Some(rastrigin_morse()?);
            s
        }
        // Ackley has a conical kink at its minimizer, so no quadratic upper
        // bound exists there and it carries no Morse data.
        "ackley" => ObjectiveSpec::build(id.into(), Kind::Simple(Base::Ackley), sr, lower, upper)?,
        "composition" => {
            let mut parts = vec![CompositionComponent {
                center: sr.shift.clone(),
                kind: Base::Quadratic(vec![1.0; dim]),
                lambda: 1.0,
                sigma: 10.0,
                bias: 0.0,
            }];
            let extra = [
                (Base::Rastrigin, 10.0, 20.0, 100.0),
                (Base::Rosenbrock, 1e-4, 30.0, 200.0),
            ];
            for (k, (kind, lambda, sigma, bias)) in extra.into_iter().enumerate() {
                parts.push(CompositionComponent {
                    center: random_shift(dim, seed, &format!("composition/{k}")),
                    kind,
                    lambda,
                    sigma,
                    bias,
                });
            }
            ObjectiveSpec::build(id.into(), Kind::Composition(parts), sr, lower, upper)?
        }
        _ => unreachable!(),
    };
    Ok(spec)
}

/// The built-in suite at dimension `dim`.
pub fn builtin_suite(dim: usize, seed: u64) -> Result<Vec<ObjectiveSpec>> {
    SUITE_IDS
        .iter()
        .filter(|id| dim >= 2 || **id != "rosenbrock")
        .map(|id| objective(id, dim, seed, None))
        .collect()
}

/// Uniform sample from the closed Euclidean ball `B(center, radius)`.
pub fn sample_ball<R: Rng + ?Sized>(rng: &mut R, center: &[f64], radius: f64) -> Vec<f64> {
    let d = center.len();
    let mut dir: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
    let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    let rad = radius * rng.random::<f64>().powf(1.0 / d as f64);
    for (v, c) in dir.iter_mut().zip(center) {
        *v = c + *v / norm * rad;
    }
    dir
}

/// Count violations of the two-sided quadratic-growth inequality on
/// `samples` uniform points of `B(x*, radius)` intersected with the box.
pub fn quadratic_growth_violations<R: Rng + ?Sized>(
    spec: &ObjectiveSpec,
    mu: f64,
    lip: f64,
    radius: f64,
    samples: usize,
    rng: &mut R,
) -> Result<usize> {
    let x_star = spec
        .x_star
        .as_ref()
        .ok_or_else(|| Error::Parameter(format!("{} has no known minimizer", spec.id)))?;
    let mut bad = 0;
    let mut seen = 0;
    while seen < samples {
        let x = sample_ball(rng, x_star, radius);
        if !spec.in_box(&x) {
            continue;
        }
        seen += 1;
        let r2: f64 = x.iter().zip(x_star).map(|(a, b)| (a - b) * (a - b)).sum();
        let fx = spec.eval(&x);
        let lo = spec.f_star + 0.5 * mu * r2;
        let hi = spec.f_star + 0.5 * lip * r2;
        let tol = 1e-12 * (1.0 + fx.abs());
        if fx < lo - tol || fx > hi + tol {
            bad += 1;
        }
    }
    Ok(bad)
}

fn power_iteration(h: &[f64], d: usize, shift: f64) -> f64 {
    let mut v: Vec<f64> = (0..d).map(|j| 1.0 + 0.1 * j as f64).collect();
    let mut lambda = 0.0;
    for _ in 0..500 {
        let mut w = vec![0.0; d];
        for a in 0..d {
            w[a] = (0..d).map(|b| h[a * d + b] * v[b]).sum::<f64>() - shift * v[a];
        }
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return shift;
        }
        let next: f64 = w.iter().zip(&v).map(|(a, b)| a * b).sum();
        v = w.into_iter().map(|x| x / norm).collect();
        if (next - lambda).abs() <= 1e-12 * next.abs().max(1.0) {
            lambda = next;
            break;
        }
        lambda = next;
    }
    lambda + shift
}

/// Numeric Morse constants (labelled [`MorseSource::Estimated`]).
///
/// Central finite-difference Hessian at `x*`, extreme eigenvalues by power
/// iteration, `mu = lambda_min / 2`, `L = 2 lambda_max`, and `r0` by
/// bisection on the sampled quadratic-growth check. Returns `None` when the
/// Hessian estimate is not positive definite or no radius passes.
pub fn estimate_morse(spec: &ObjectiveSpec, samples: usize, seed: u64) -> Option<MorseData> {
    let x0 = spec.x_star.as_ref()?;
    let d = spec.dim;
    let h = 1e-4 * x0.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let f = |dx: &[(usize, f64)]| {
        let mut x = x0.clone();
        for &(j, s) in dx {
            x[j] += s;
        }
        spec.eval(&x)
    };
    let mut hess = vec![0.0; d * d];
    for a in 0..d {
        for b in a..d {
            let v = if a == b {
                (f(&[(a, h)]) - 2.0 * f(&[]) + f(&[(a, -h)])) / (h * h)
            } else {
                (f(&[(a, h), (b, h)]) - f(&[(a, h), (b, -h)]) - f(&[(a, -h), (b, h)])
                    + f(&[(a, -h), (b, -h)]))
                    / (4.0 * h * h)
            };
            hess[a * d + b] = v;
            hess[b * d + a] = v;
        }
    }
    let lmax = power_iteration(&hess, d, 0.0);
    // Largest eigenvalue of (H - lmax I) is lmin - lmax.
    let lmin = power_iteration(&hess, d, lmax);
    if !(lmin > 0.0) || !lmax.is_finite() {
        return None;
    }
    let (mu, lip) = (lmin / 2.0, 2.0 * lmax);
    let mut rng = StreamRng::new(seed).stream(Purpose::Sampling, 0, 0);
    let mut lo = 0.0;
    let mut hi = spec.farthest_corner_distance();
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        match quadratic_growth_violations(spec, mu, lip, mid, samples, &mut rng) {
            Ok(0) => lo = mid,
            _ => hi = mid,
        }
    }
    if lo <= 0.0 {
        return None;
    }
    MorseData::new(mu, lip, lo, MorseSource::Estimated).ok()
}
