//! First-hitting times, survival identities, tail envelopes and
//! Kaplan–Meier estimation.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::RunTrace;
use crate::error::{Error, Result};
use crate::objectives::ObjectiveSpec;
use crate::rng::{Purpose, StreamRng};

/// First hit of `A_eps` for one run. `None` times are right-censored.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HitRecord {
    pub run_id: usize,
    pub seed: u64,
    pub tau_gen: Option<usize>,
    pub tau_eval: Option<usize>,
    /// Last completed generation.
    pub censor_gen: usize,
    /// Evaluation budget.
    pub censor_nfe: usize,
}

impl HitRecord {
    pub fn time(&self, index: TimeIndex) -> (usize, bool) {
        match index {
            TimeIndex::Gen => self.tau_gen.map_or((self.censor_gen, false), |t| (t, true)),
            TimeIndex::Eval => self.tau_eval.map_or((self.censor_nfe, false), |t| (t, true)),
        }
    }
}

/// Clock used for hitting times.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeIndex {
    Gen,
    Eval,
}

/// First generation (0 = initial population) and evaluation with
/// `f <= f* + eps`.
pub fn first_hit(trace: &RunTrace, eps: f64, spec: &ObjectiveSpec, run_id: usize) -> HitRecord {
    let hit = trace.first_hit(spec.f_star + eps);
    HitRecord {
        run_id,
        seed: trace.seed,
        tau_gen: hit.map(|h| h.0),
        tau_eval: hit.map(|h| h.1),
        censor_gen: trace.last_gen(),
        censor_nfe: trace.max_nfe,
    }
}

/// Product-limit estimate with Greenwood standard errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMCurve {
    pub event_times: Vec<usize>,
    pub at_risk: Vec<usize>,
    pub events: Vec<usize>,
    pub survival: Vec<f64>,
    pub se: Vec<f64>,
    pub censored_count: usize,
    pub n: usize,
}

impl KMCurve {
    fn position(&self, t: usize) -> Option<usize> {
        match self.event_times.partition_point(|&e| e <= t) {
            0 => None,
            p => Some(p - 1),
        }
    }

    /// `S(t) = P(tau > t)`.
    pub fn survival_at(&self, t: usize) -> f64 {
        self.position(t).map_or(1.0, |p| self.survival[p])
    }

    pub fn se_at(&self, t: usize) -> f64 {
        self.position(t).map_or(0.0, |p| self.se[p])
    }
}

/// Kaplan–Meier estimator over `records` on the chosen clock. Events at a
/// censoring time are counted before the censoring.
pub fn km_estimate(records: &[HitRecord], index: TimeIndex) -> Result<KMCurve> {
    let times: Vec<(usize, bool)> = records.iter().map(|r| r.time(index)).collect();
    km_from_times(&times)
}

/// Kaplan–Meier estimator over `(time, observed)` pairs.
pub fn km_from_times(times: &[(usize, bool)]) -> Result<KMCurve> {
    if times.is_empty() {
        return Err(Error::Empty("hit records"));
    }
    let mut sorted = times.to_vec();
    sorted.sort_unstable();
    let n = sorted.len();
    let mut curve = KMCurve {
        event_times: Vec::new(),
        at_risk: Vec::new(),
        events: Vec::new(),
        survival: Vec::new(),
        se: Vec::new(),
        censored_count: sorted.iter().filter(|t| !t.1).count(),
        n,
    };
    let mut s = 1.0;
    let mut green = 0.0;
    let mut j = 0;
    while j < n {
        let t = sorted[j].0;
        let risk = n - j;
        let mut d = 0;
        while j < n && sorted[j].0 == t {
            d += sorted[j].1 as usize;
            j += 1;
        }
        if d == 0 {
            continue;
        }
        s *= 1.0 - d as f64 / risk as f64;
        if risk > d {
            green += d as f64 / (risk as f64 * (risk - d) as f64);
        }
        curve.event_times.push(t);
        curve.at_risk.push(risk);
        curve.events.push(d);
        curve.survival.push(s);
        curve.se.push(if s > 0.0 { s * green.sqrt() } else { 0.0 });
    }
    Ok(curve)
}

/// Hazard rule of a synthetic process.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HazardRule {
    /// `p_t = p`.
    Constant(f64),
    /// `p_t = min(1, c / t)`.
    Decaying(f64),
    /// `p_t = base` until the first near miss, `min(1, 2 base)` afterwards.
    /// A near miss happens with probability `near_miss` after each step,
    /// independently of the hit draws.
    NearMiss { base: f64, near_miss: f64 },
}

/// A first-hit process with known hazards, for checking survival identities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticHazard {
    pub rule: HazardRule,
    /// `P(E_0)`, a hit at time 0.
    pub p_e0: f64,
    pub horizon: usize,
}

impl SyntheticHazard {
    fn validate(&self) -> Result<()> {
        let ok = |p: f64| (0.0..=1.0).contains(&p);
        let valid = ok(self.p_e0)
            && match self.rule {
                HazardRule::Constant(p) => ok(p),
                HazardRule::Decaying(c) => c >= 0.0,
                HazardRule::NearMiss { base, near_miss } => ok(base) && ok(near_miss),
            };
        if valid {
            Ok(())
        } else {
            Err(Error::Parameter(format!("invalid synthetic hazard {self:?}")))
        }
    }

    /// `p_t` given the near-miss flag.
    pub fn hazard(&self, t: usize, flagged: bool) -> f64 {
        match self.rule {
            HazardRule::Constant(p) => p,
            HazardRule::Decaying(c) => (c / t as f64).min(1.0),
            HazardRule::NearMiss { base, .. } => {
                if flagged {
                    (2.0 * base).min(1.0)
                } else {
                    base
                }
            }
        }
    }

    /// Survival-only hazards `h_1..h_horizon`, by forward recursion on the
    /// joint law of survival and the near-miss flag.
    pub fn survival_only_hazards(&self) -> Vec<f64> {
        let q = match self.rule {
            HazardRule::NearMiss { near_miss, .. } => near_miss,
            _ => 0.0,
        };
        let (mut clean, mut flagged) = (1.0, 0.0);
        let mut h = Vec::with_capacity(self.horizon);
        for t in 1..=self.horizon {
            let (pc, pf) = (self.hazard(t, false), self.hazard(t, true));
            let alive = clean + flagged;
            h.push(if alive > 0.0 {
                (clean * pc + flagged * pf) / alive
            } else {
                0.0
            });
            let c_surv = clean * (1.0 - pc);
            clean = c_surv * (1.0 - q);
            flagged = flagged * (1.0 - pf) + c_surv * q;
        }
        h
    }

    /// `P(E_0^c) prod_{t <= n} (1 - h_t)` for `n = 0..=horizon`.
    pub fn certified_product(&self) -> Vec<f64> {
        let mut out = vec![1.0 - self.p_e0];
        for h in self.survival_only_hazards() {
            let last = *out.last().expect("nonempty");
            out.push(last * (1.0 - h));
        }
        out
    }
}

/// Monte-Carlo survival of a synthetic process, indexed by `n = 0..=horizon`.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSurvival {
    pub reps: usize,
    pub survival: Vec<f64>,
    pub se: Vec<f64>,
    /// `E[1{not E_0} prod_{t <= n} (1 - p_t)]` along the simulated hazard paths.
    pub product_mean: Vec<f64>,
    pub product_se: Vec<f64>,
    /// Survivors at `n` and hits at `n + 1`, for estimating `h_{n+1}`.
    pub survivors: Vec<usize>,
    pub hits: Vec<usize>,
}

/// Draw `reps` first-hit times from `process`.
pub fn simulate_synthetic(process: &SyntheticHazard, reps: usize, seed: u64) -> Result<SyntheticSurvival> {
    process.validate()?;
    if reps == 0 {
        return Err(Error::Parameter("reps must be >= 1".into()));
    }
    let horizon = process.horizon;
    let streams = StreamRng::new(seed);
    let q = match process.rule {
        HazardRule::NearMiss { near_miss, .. } => near_miss,
        _ => 0.0,
    };
    // per replication: hitting time (horizon + 1 = survived) and the product path
    let paths: Vec<(usize, Vec<f64>)> = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let mut rng = streams.stream(Purpose::Synthetic, rep as u64, 0);
            let mut prod = Vec::with_capacity(horizon + 1);
            let e0 = rng.random::<f64>() < process.p_e0;
            let mut cur = if e0 { 0.0 } else { 1.0 };
            prod.push(cur);
            let mut tau = if e0 { Some(0) } else { None };
            let mut flagged = false;
            for t in 1..=horizon {
                let p = process.hazard(t, flagged);
                if tau.is_none() && rng.random::<f64>() < p {
                    tau = Some(t);
                }
                cur *= 1.0 - p;
                prod.push(cur);
                if rng.random::<f64>() < q {
                    flagged = true;
                }
            }
            (tau.unwrap_or(horizon + 1), prod)
        })
        .collect();

    let r = reps as f64;
    let mut survival = Vec::with_capacity(horizon + 1);
    let mut se = Vec::with_capacity(horizon + 1);
    let mut product_mean = Vec::with_capacity(horizon + 1);
    let mut product_se = Vec::with_capacity(horizon + 1);
    let mut survivors = Vec::with_capacity(horizon + 1);
    let mut hits = Vec::with_capacity(horizon + 1);
    for n in 0..=horizon {
        let alive = paths.iter().filter(|p| p.0 > n).count();
        let s = alive as f64 / r;
        survival.push(s);
        se.push((s * (1.0 - s) / r).sqrt());
        let (sum, sq) = paths
            .iter()
            .fold((0.0, 0.0), |(a, b), p| (a + p.1[n], b + p.1[n] * p.1[n]));
        let mean = sum / r;
        product_mean.push(mean);
        product_se.push(((sq / r - mean * mean).max(0.0) / r).sqrt());
        survivors.push(alive);
        hits.push(paths.iter().filter(|p| p.0 == n + 1).count());
    }
    Ok(SyntheticSurvival {
        reps,
        survival,
        se,
        product_mean,
        product_se,
        survivors,
        hits,
    })
}

/// `p0c (1 - a)^n`. With `a = 0` the bound is vacuous and `p0c` is returned.
pub fn tail_bound_constant(a: f64, n: usize, p0c: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&a) || !(0.0..=1.0).contains(&p0c) {
        return Err(Error::Parameter(format!("need a, p0c in [0, 1] (a = {a}, p0c = {p0c})")));
    }
    if a == 0.0 {
        log::warn!("hazard floor a = 0: the tail bound is vacuous");
        return Ok(p0c);
    }
    Ok(p0c * (1.0 - a).powi(n as i32))
}

/// `E[tau] <= p0c / a`.
pub fn expected_hit_bound(a: f64, p0c: f64) -> f64 {
    if a <= 0.0 {
        f64::INFINITY
    } else {
        p0c / a
    }
}

/// Tail bound for `a_t = C t^(-alpha)`.
pub fn tail_bound_power(c: f64, alpha: f64, n: usize, p0c: f64) -> Result<f64> {
    if !(c > 0.0) || !(alpha > 0.0 && alpha <= 1.0) || !(0.0..=1.0).contains(&p0c) {
        return Err(Error::Parameter(format!(
            "need C > 0, alpha in (0, 1], p0c in [0, 1] (C = {c}, alpha = {alpha}, p0c = {p0c})"
        )));
    }
    let m = (n + 1) as f64;
    if alpha == 1.0 {
        return Ok(p0c * m.powf(-c));
    }
    if c > 1.0 {
        return Err(Error::Parameter(format!("C t^(-alpha) exceeds 1 at t = 1 (C = {c})")));
    }
    let k = c / (1.0 - alpha);
    Ok(p0c * (k - k * m.powf(1.0 - alpha)).exp())
}

/// Survival envelopes indexed by `n = 0..=len`.
#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    pub product: Vec<f64>,
    pub exponential: Vec<f64>,
}

/// `p0c prod (1 - a_t gamma_t)` and `p0c exp(-sum a_t gamma_t)`; entry `n`
/// uses `t = 1..=n`, so `a[0]` belongs to generation 1.
pub fn envelope_from_witness(a: &[f64], gamma: &[f64], p0c: f64) -> Result<Envelope> {
    if a.len() != gamma.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: gamma.len(),
        });
    }
    let mut product = vec![p0c];
    let mut exponential = vec![p0c];
    let (mut prod, mut sum) = (1.0, 0.0);
    for (&at, &gt) in a.iter().zip(gamma) {
        if !(0.0..=1.0).contains(&at) || !(0.0..=1.0).contains(&gt) {
            return Err(Error::Parameter(format!("a_t and gamma_t must lie in [0, 1] ({at}, {gt})")));
        }
        prod *= 1.0 - at * gt;
        sum += at * gt;
        product.push(p0c * prod);
        exponential.push(p0c * (-sum).exp());
    }
    Ok(Envelope { product, exponential })
}

/// Plug-in two-phase bound
/// `P(T_wit > n) + p0c E[exp(-a_min gamma0 (n - T_wit)^+)]`, with `None`
/// standing for `T_wit = inf`.
pub fn two_phase_envelope(a_min: f64, gamma0: f64, twit: &[Option<usize>], n: usize, p0c: f64) -> Result<f64> {
    if twit.is_empty() {
        return Err(Error::Empty("stabilisation times"));
    }
    if !(a_min > 0.0 && a_min <= 1.0) || !(gamma0 > 0.0 && gamma0 <= 1.0) {
        return Err(Error::Parameter(format!(
            "need a_min, gamma0 in (0, 1] (a_min = {a_min}, gamma0 = {gamma0})"
        )));
    }
    let k = twit.len() as f64;
    let late = twit.iter().filter(|t| t.is_none_or(|t| t > n)).count() as f64 / k;
    let tail: f64 = twit
        .iter()
        .map(|t| match t {
            Some(t) => (-a_min * gamma0 * n.saturating_sub(*t) as f64).exp(),
            None => 1.0,
        })
        .sum::<f64>()
        / k;
    Ok((late + p0c * tail).min(1.0))
}

/// Empirical regime of a hitting-time sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegimeLabel {
    Clustered,
    NearGeometric,
    HeavyOther,
    Intractable,
    Insufficient,
}

impl RegimeLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Clustered => "clustered",
            Self::NearGeometric => "near-geometric",
            Self::HeavyOther => "heavy/other",
            Self::Intractable => "intractable",
            Self::Insufficient => "insufficient",
        }
    }
}

impl std::fmt::Display for RegimeLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

pub const CLUSTERED_BELOW: f64 = 0.2;
pub const HEAVY_ABOVE: f64 = 2.0;
pub const INTRACTABLE_HIT_FRACTION: f64 = 0.1;
pub const MIN_HITS_FOR_CLUSTERING: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometricFit {
    pub hits: usize,
    pub runs: usize,
    pub mean: Option<f64>,
    pub sd: Option<f64>,
    pub p_hat: Option<f64>,
    /// Sample variance over the variance of the fitted geometric law.
    pub clustering: Option<f64>,
    pub regime: RegimeLabel,
}

/// Moment fit of a geometric law to the observed hitting times and the
/// variance-ratio clustering coefficient. `None` entries are censored.
pub fn geometric_fit_and_cluster(taus: &[Option<usize>]) -> GeometricFit {
    let hits: Vec<f64> = taus.iter().flatten().map(|&t| t as f64).collect();
    let runs = taus.len();
    let k = hits.len();
    let mean = (k >= 1).then(|| hits.iter().sum::<f64>() / k as f64);
    let var = (k >= 2).then(|| {
        let m = mean.expect("k >= 1");
        hits.iter().map(|t| (t - m).powi(2)).sum::<f64>() / (k - 1) as f64
    });
    let p_hat = if k >= 2 { mean.map(|m| (1.0 / m).min(1.0)) } else { None };
    let clustering = match (p_hat, var) {
        (Some(p), Some(v)) if k >= MIN_HITS_FOR_CLUSTERING => {
            let geo = (1.0 - p) / (p * p);
            Some(if geo > 0.0 {
                v / geo
            } else if v == 0.0 {
                0.0
            } else {
                f64::INFINITY
            })
        }
        _ => None,
    };
    let regime = if runs == 0 || (k as f64) < INTRACTABLE_HIT_FRACTION * runs as f64 {
        RegimeLabel::Intractable
    } else {
        match clustering {
            None => RegimeLabel::Insufficient,
            Some(c) if c < CLUSTERED_BELOW => RegimeLabel::Clustered,
            Some(c) if c <= HEAVY_ABOVE => RegimeLabel::NearGeometric,
            Some(_) => RegimeLabel::HeavyOther,
        }
    };
    GeometricFit {
        hits: k,
        runs,
        mean,
        sd: var.map(f64::sqrt),
        p_hat,
        clustering,
        regime,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidityReport {
    pub checked: usize,
    /// `(n, S(n), envelope(n), se(n))` where `S(n) > envelope(n) + se(n)`.
    pub violations: Vec<(usize, f64, f64, f64)>,
}

impl ValidityReport {
    pub fn valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Check `S(n) <= envelope(n) + se(n)` for every `n` on the envelope grid.
pub fn envelope_validity_check(km: &KMCurve, envelope: &[f64]) -> ValidityReport {
    let violations = envelope
        .iter()
        .enumerate()
        .filter_map(|(n, &env)| {
            let (s, se) = (km.survival_at(n), km.se_at(n));
            (s > env + se).then_some((n, s, env, se))
        })
        .collect();
    ValidityReport {
        checked: envelope.len(),
        violations,
    }
}

/// Witness flags of one run: `flags[t - 1]` is generation `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct WitnessSeries {
    pub tau_gen: Option<usize>,
    pub flags: Vec<bool>,
}

/// Witness frequency at one generation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaEstimate {
    pub t: usize,
    pub surviving: usize,
    pub witnessed: usize,
    pub gamma: f64,
    pub lower: f64,
    pub upper: f64,
}

/// 95% Wilson score interval for `k` successes out of `n`.
pub fn wilson_interval(k: usize, n: usize) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959_963_984_540_054_f64;
    let (nf, p) = (n as f64, k as f64 / n as f64);
    let denom = 1.0 + z * z / nf;
    let centre = (p + z * z / (2.0 * nf)) / denom;
    let half = z * (p * (1.0 - p) / nf + z * z / (4.0 * nf * nf)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// `gamma_t` for `t = 1..=horizon`: the fraction of runs still alive after
/// `t - 1` whose generation-`t` witness holds. Generations with no
/// survivors get `gamma = 0`.
pub fn gamma_hat(runs: &[WitnessSeries], horizon: usize) -> Vec<GammaEstimate> {
    (1..=horizon)
        .map(|t| {
            let alive: Vec<&WitnessSeries> = runs
                .iter()
                .filter(|r| r.tau_gen.is_none_or(|tau| tau >= t) && r.flags.len() >= t)
                .collect();
            let surviving = alive.len();
            let witnessed = alive.iter().filter(|r| r.flags[t - 1]).count();
            let gamma = if surviving > 0 {
                witnessed as f64 / surviving as f64
            } else {
                0.0
            };
            let (lower, upper) = wilson_interval(witnessed, surviving);
            GammaEstimate {
                t,
                surviving,
                witnessed,
                gamma,
                lower,
                upper,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn rec(tau: Option<usize>, censor: usize) -> HitRecord {
        HitRecord {
            run_id: 0,
            seed: 0,
            tau_gen: tau,
            tau_eval: tau.map(|t| 10 * t),
            censor_gen: censor,
            censor_nfe: 10 * censor,
        }
    }

    #[test]
    fn km_hand_case() {
        let recs = [rec(Some(2), 10), rec(Some(5), 10), rec(None, 10)];
        let km = km_estimate(&recs, TimeIndex::Gen).unwrap();
        assert_relative_eq!(km.survival_at(2), 2.0 / 3.0, epsilon = 1e-12);
        assert_relative_eq!(km.survival_at(5), 1.0 / 3.0, epsilon = 1e-12);
        assert_relative_eq!(km.survival_at(10), 1.0 / 3.0, epsilon = 1e-12);
        assert_eq!(km.survival_at(1), 1.0);
        assert_eq!(km.censored_count, 1);
        // Greenwood at t = 2: S^2 * 1/(3*2)
        assert_relative_eq!(km.se_at(2), 2.0 / 3.0 * (1.0f64 / 6.0).sqrt(), epsilon = 1e-12);
        let kme = km_estimate(&recs, TimeIndex::Eval).unwrap();
        assert_relative_eq!(kme.survival_at(20), 2.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn km_edge_cases() {
        let all = [rec(Some(1), 5), rec(Some(1), 5)];
        let km = km_estimate(&all, TimeIndex::Gen).unwrap();
        assert_eq!(km.survival_at(1), 0.0);
        assert_eq!(km.se_at(1), 0.0);
        let none = [rec(None, 5), rec(None, 7)];
        let km = km_estimate(&none, TimeIndex::Gen).unwrap();
        assert!((0..20).all(|t| km.survival_at(t) == 1.0));
        assert!(km_estimate(&[], TimeIndex::Gen).is_err());
        let e0 = [rec(Some(0), 5), rec(None, 5)];
        assert_eq!(km_estimate(&e0, TimeIndex::Gen).unwrap().survival_at(0), 0.5);
    }

    #[test]
    fn km_tie_between_event_and_censoring() {
        // the censored run is still at risk at its censoring time
        let km = km_from_times(&[(3, true), (3, false), (4, true)]).unwrap();
        assert_relative_eq!(km.survival_at(3), 2.0 / 3.0);
        assert_eq!(km.survival_at(4), 0.0);
    }

    proptest! {
        #[test]
        fn km_without_censoring_is_empirical(times in prop::collection::vec(0usize..30, 1..40)) {
            let pairs: Vec<(usize, bool)> = times.iter().map(|&t| (t, true)).collect();
            let km = km_from_times(&pairs).unwrap();
            for n in 0..32 {
                let emp = times.iter().filter(|&&t| t > n).count() as f64 / times.len() as f64;
                prop_assert!((km.survival_at(n) - emp).abs() < 1e-12);
            }
        }

        #[test]
        fn km_is_monotone(times in prop::collection::vec((0usize..30, any::<bool>()), 1..40)) {
            let km = km_from_times(&times).unwrap();
            for w in km.survival.windows(2) {
                prop_assert!(w[1] <= w[0]);
            }
            prop_assert!(km.survival.iter().all(|s| (0.0..=1.0).contains(s)));
        }

        #[test]
        fn envelope_ordering(ag in prop::collection::vec((0.0f64..=1.0, 0.0f64..=1.0), 0..60), p0c in 0.0f64..=1.0) {
            let (a, g): (Vec<f64>, Vec<f64>) = ag.into_iter().unzip();
            let env = envelope_from_witness(&a, &g, p0c).unwrap();
            for n in 0..env.product.len() {
                prop_assert!(env.product[n] <= env.exponential[n] + 1e-15);
                if n > 0 {
                    prop_assert!(env.product[n] <= env.product[n - 1]);
                    prop_assert!(env.exponential[n] <= env.exponential[n - 1]);
                }
            }
        }
    }

    #[test]
    fn tail_bounds() {
        assert_relative_eq!(tail_bound_constant(0.1, 10, 1.0).unwrap(), 0.9f64.powi(10));
        assert_relative_eq!(tail_bound_constant(0.1, 10, 1.0).unwrap(), 0.348_678_440_1, epsilon = 1e-10);
        assert_eq!(tail_bound_constant(0.3, 0, 0.7).unwrap(), 0.7);
        assert_eq!(tail_bound_constant(1.0, 3, 1.0).unwrap(), 0.0);
        assert_eq!(tail_bound_constant(0.0, 3, 0.4).unwrap(), 0.4);
        assert_eq!(expected_hit_bound(0.1, 0.5), 5.0);
        assert_relative_eq!(tail_bound_power(2.0, 1.0, 9, 1.0).unwrap(), 0.01, epsilon = 1e-15);
        assert_eq!(tail_bound_power(2.0, 1.0, 0, 0.8).unwrap(), 0.8);
        assert_relative_eq!(tail_bound_power(0.1, 0.5, 99, 1.0).unwrap(), (-1.8f64).exp(), max_relative = 1e-12);
        assert!(tail_bound_power(0.0, 0.5, 3, 1.0).is_err());
        assert!(tail_bound_power(0.5, 1.5, 3, 1.0).is_err());
    }

    #[test]
    fn envelope_examples() {
        let env = envelope_from_witness(&[0.5; 4], &[0.0; 4], 0.9).unwrap();
        assert!(env.product.iter().all(|&v| v == 0.9));
        let env = envelope_from_witness(&[0.1; 100], &[0.1; 100], 1.0).unwrap();
        assert_relative_eq!(env.product[100], 0.99f64.powi(100), max_relative = 1e-12);
        assert_relative_eq!(env.exponential[100], (-1.0f64).exp(), max_relative = 1e-12);
        let env = envelope_from_witness(&[0.2, 1.0, 0.3], &[1.0, 1.0, 0.5], 1.0).unwrap();
        assert_eq!(env.product[2], 0.0);
        assert_eq!(env.product[3], 0.0);
        assert!(envelope_from_witness(&[0.1], &[], 1.0).is_err());
    }

    #[test]
    fn two_phase_examples() {
        let v = two_phase_envelope(0.01, 0.5, &[Some(0); 4], 100, 0.9).unwrap();
        assert_relative_eq!(v, 0.9 * (-0.5f64).exp(), max_relative = 1e-12);
        assert_eq!(two_phase_envelope(0.01, 0.5, &[None; 3], 7, 1.0).unwrap(), 1.0);
        let v = two_phase_envelope(0.5, 0.5, &[Some(0), None], 1000, 1.0).unwrap();
        assert_relative_eq!(v, 1.0, epsilon = 1e-12);
        let v = two_phase_envelope(0.5, 0.5, &[Some(0), None], 1000, 0.0).unwrap();
        assert_relative_eq!(v, 0.5, epsilon = 1e-12);
        assert!(two_phase_envelope(0.5, 0.5, &[], 3, 1.0).is_err());
    }

    #[test]
    fn geometric_fit_labels() {
        let same = vec![Some(7); 20];
        let fit = geometric_fit_and_cluster(&same);
        assert_eq!(fit.clustering, Some(0.0));
        assert_eq!(fit.regime, RegimeLabel::Clustered);
        let mut rare = vec![None; 49];
        rare.extend([Some(3), Some(40)]);
        assert_eq!(geometric_fit_and_cluster(&rare).regime, RegimeLabel::Intractable);
        let few = vec![Some(3), Some(9), None];
        let fit = geometric_fit_and_cluster(&few);
        assert_eq!(fit.regime, RegimeLabel::Insufficient);
        assert_relative_eq!(fit.p_hat.unwrap(), 1.0 / 6.0);
        let spread: Vec<Option<usize>> = [1, 1, 1, 1, 200, 400].iter().map(|&t| Some(t)).collect();
        assert_eq!(geometric_fit_and_cluster(&spread).regime, RegimeLabel::HeavyOther);
    }

    #[test]
    fn synthetic_constant_half() {
        let p = SyntheticHazard { rule: HazardRule::Constant(0.5), p_e0: 0.0, horizon: 5 };
        let sim = simulate_synthetic(&p, 20_000, 3).unwrap();
        assert!((sim.survival[5] - 1.0 / 32.0).abs() <= 4.0 * sim.se[5]);
        assert_relative_eq!(p.certified_product()[5], 1.0 / 32.0);
        let z = SyntheticHazard { rule: HazardRule::Constant(0.0), p_e0: 0.0, horizon: 5 };
        let sim = simulate_synthetic(&z, 100, 3).unwrap();
        assert!(sim.survival.iter().all(|&s| s == 1.0));
    }

    #[test]
    fn near_miss_hazards_by_enumeration() {
        // exact h_t by enumerating every flag path for a short horizon
        let (base, q) = (0.2, 0.3);
        let p = SyntheticHazard { rule: HazardRule::NearMiss { base, near_miss: q }, p_e0: 0.0, horizon: 4 };
        let h = p.survival_only_hazards();
        for t in 1..=4usize {
            let (mut alive, mut hit) = (0.0, 0.0);
            for mask in 0u32..(1 << (t - 1)) {
                // bit s: near miss after step s + 1
                let mut w = 1.0;
                let mut flag = false;
                for s in 1..t {
                    let ps = if flag { 2.0 * base } else { base };
                    w *= 1.0 - ps;
                    let b = mask >> (s - 1) & 1 == 1;
                    w *= if b { q } else { 1.0 - q };
                    flag |= b;
                }
                let pt = if flag { 2.0 * base } else { base };
                alive += w;
                hit += w * pt;
            }
            assert_relative_eq!(h[t - 1], hit / alive, max_relative = 1e-12);
        }
    }

    #[test]
    fn gamma_hat_counts_survivors() {
        let runs = vec![
            WitnessSeries { tau_gen: Some(2), flags: vec![true, true, true] },
            WitnessSeries { tau_gen: None, flags: vec![false, true, false] },
        ];
        let g = gamma_hat(&runs, 3);
        assert_eq!((g[0].surviving, g[0].witnessed), (2, 1));
        assert_eq!((g[1].surviving, g[1].witnessed), (2, 2));
        assert_eq!((g[2].surviving, g[2].witnessed), (1, 0));
        assert!(g[1].lower < 1.0 && g[1].upper == 1.0);
    }

    #[test]
    fn wilson_reference() {
        // 7 of 20: p = 0.35
        let (lo, hi) = wilson_interval(7, 20);
        assert_relative_eq!(lo, 0.181_192_4, epsilon = 1e-6);
        assert_relative_eq!(hi, 0.567_146_6, epsilon = 1e-6);
    }

    #[test]
    fn validity_check_detects_inflated_floors() {
        let times: Vec<(usize, bool)> = (1..=20).map(|t| (t, true)).collect();
        let km = km_from_times(&times).unwrap();
        assert!(envelope_validity_check(&km, &[1.0; 25]).valid());
        let env = envelope_from_witness(&[1.0; 24], &[1.0; 24], 1.0).unwrap();
        let rep = envelope_validity_check(&km, &env.product);
        assert!(!rep.valid());
        assert_eq!(rep.violations[0].0, 1);
    }
}
