//! Per-generation witness evaluation.

use rand::Rng;

use super::floors::{cauchy_density_inf, cr_tail, floor_unchecked, window_measure, WitnessConfig};
use super::morse::{delta_max, dist, morse_check, MorseCheck};
use super::regime::{detect_regime, RegimeFlags, RegimeParams};
use crate::engine::{pbest_count, AlgoState, Donor, EngineConfig};
use crate::error::Result;
use crate::objectives::ObjectiveSpec;
use crate::rng::{Purpose, StreamRng};

/// Indices `(i, b, r1, r2, k)` of a witness configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WitnessTuple {
    pub i: usize,
    pub b: usize,
    pub r1: usize,
    pub r2: Donor,
    pub k: usize,
}

/// Witness quantities for generation `gen`, measured on the state the
/// generation's trials are built from.
#[derive(Debug, Clone, PartialEq)]
pub struct WitnessReport {
    pub gen: usize,
    /// `None` when L1 was not evaluated.
    pub l1: Option<bool>,
    pub l2: bool,
    pub l3: bool,
    pub tuple: Option<WitnessTuple>,
    /// Largest success-window measure among the candidates tried.
    pub interval_measure: f64,
    pub density_inf: f64,
    pub cr_tail: f64,
    /// Configured hazard floor for the current pool sizes.
    pub a_t: f64,
    pub morse: Option<MorseCheck>,
    pub regime: Option<RegimeFlags>,
}

impl WitnessReport {
    /// L1, L2 and L3 all hold.
    pub fn witnessed(&self) -> bool {
        self.l1 == Some(true) && self.l2 && self.l3
    }
}

/// Pool sizes used for the logged floor: `s1 = N - 1` and
/// `s2 = N + A_cap - 1` bound both the `i = b` and `i != b` pools from above.
pub fn floor_pools(state: &AlgoState, ecfg: &EngineConfig) -> (usize, usize, usize) {
    let n = state.n();
    let m = pbest_count(ecfg.p_best, n);
    (m, n - 1, n + state.archive_cap.max(state.archive.len()) - 1)
}

/// Memory slot maximising `min(density / g-, tail / q-)`.
fn best_slot(state: &AlgoState, ecfg: &EngineConfig, cfg: &WitnessConfig) -> (usize, f64, f64) {
    let mut best = (0, 0.0, 0.0);
    let mut score = f64::NEG_INFINITY;
    for k in 0..state.memory_size() {
        let g = cauchy_density_inf(state.mem_f[k], ecfg.sigma_f, cfg.f_minus, cfg.f_plus);
        let q = if state.cr_terminal[k] {
            0.0
        } else {
            cr_tail(state.mem_cr[k], ecfg.sigma_cr, cfg.c_cr)
        };
        let s = (g / cfg.g_minus).min(q / cfg.q_minus);
        if s > score {
            score = s;
            best = (k, g, q);
        }
    }
    best
}

/// Two donors nearest to `x_b`: `r1` from the population, `r2` from
/// population and archive.
fn nearest_donors(state: &AlgoState, i: usize, b: usize) -> (usize, Donor) {
    let xb = &state.population[b].x;
    let mut pop: Vec<(f64, usize)> = (0..state.n())
        .filter(|&j| j != i && j != b)
        .map(|j| (dist(&state.population[j].x, xb), j))
        .collect();
    pop.sort_by(|a, c| a.0.total_cmp(&c.0).then(a.1.cmp(&c.1)));
    let r1 = pop[0].1;
    let pop_next = pop.get(1).map(|&(d, j)| (d, Donor::Pop(j)));
    let arc_next = state
        .archive
        .iter()
        .enumerate()
        .map(|(a, x)| (dist(x, xb), Donor::Archive(a)))
        .min_by(|a, c| a.0.total_cmp(&c.0));
    let r2 = match (pop_next, arc_next) {
        (Some(p), Some(a)) => {
            if a.0 < p.0 {
                a.1
            } else {
                p.1
            }
        }
        (Some(p), None) => p.1,
        (None, Some(a)) => a.1,
        (None, None) => unreachable!("population has at least four members"),
    };
    (r1, r2)
}

fn random_tuple<R: Rng>(state: &AlgoState, pbest: &[usize], rng: &mut R) -> (usize, usize, usize, Donor) {
    let n = state.n();
    let i = rng.random_range(0..n);
    let b = pbest[rng.random_range(0..pbest.len())];
    let r1 = loop {
        let j = rng.random_range(0..n);
        if j != i && j != b {
            break j;
        }
    };
    let r2 = loop {
        let j = rng.random_range(0..n + state.archive.len());
        if j >= n {
            break Donor::Archive(j - n);
        }
        if j != i && j != b && j != r1 {
            break Donor::Pop(j);
        }
    };
    (i, b, r1, r2)
}

/// Evaluate L1-L3, the floors and (optionally) the regime flags.
///
/// L1 is searched over a bounded candidate list: the best individual as
/// both target and guide with its nearest donors, the other p-best members
/// likewise, then random tuples. The search stops at the first tuple whose
/// window reaches `delta_f`. With Morse data and `stability_filter`, a grid
/// point only counts when the mutant stays within `delta_max` of the parent
/// in sup norm, which certifies the crossover step.
pub fn evaluate_witness(
    state: &AlgoState,
    spec: &ObjectiveSpec,
    ecfg: &EngineConfig,
    cfg: &WitnessConfig,
    regime: Option<&RegimeParams>,
    streams: &StreamRng,
    eval_l1: bool,
) -> Result<WitnessReport> {
    let gen = state.gen + 1;
    let d = spec.dim;
    let (m, s1, s2) = floor_pools(state, ecfg);
    let a_t = floor_unchecked(cfg, state.memory_size(), m, s1, s2, d)?;
    let (k, density_inf, cr_tail) = best_slot(state, ecfg, cfg);

    let mut l1 = None;
    let mut tuple = None;
    let mut interval_measure = 0.0;
    if eval_l1 {
        let delta = match (&spec.morse, cfg.stability_filter) {
            (Some(morse), true) => Some(delta_max(cfg.eps, morse.lip, cfg.r(d))),
            _ => None,
        };
        let pbest = state.pbest(ecfg.p_best);
        let mut rng = streams.stream(Purpose::Witness, gen as u64, 0);
        let mut found = false;
        for c in 0..cfg.max_candidates {
            let (i, b, r1, r2) = if c < pbest.len() {
                let b = pbest[c];
                let (r1, r2) = nearest_donors(state, b, b);
                (b, b, r1, r2)
            } else {
                random_tuple(state, &pbest, &mut rng)
            };
            let lam = window_measure(
                spec,
                &state.population[i].x,
                &state.population[b].x,
                &state.population[r1].x,
                state.donor(r2),
                cfg,
                delta,
            );
            if lam > interval_measure || tuple.is_none() {
                interval_measure = lam.max(interval_measure);
                tuple = Some(WitnessTuple { i, b, r1, r2, k });
            }
            if lam >= cfg.delta_f {
                tuple = Some(WitnessTuple { i, b, r1, r2, k });
                found = true;
                break;
            }
        }
        l1 = Some(found);
        if !found {
            tuple = None;
        }
    }

    let morse = morse_check(state, spec, ecfg, cfg)?;
    let regime = regime.map(|p| detect_regime(state, spec, p, ecfg, cfg));
    Ok(WitnessReport {
        gen,
        l1,
        l2: density_inf >= cfg.g_minus,
        l3: cr_tail >= cfg.q_minus,
        tuple,
        interval_measure,
        density_inf,
        cr_tail,
        a_t,
        morse,
        regime,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::Individual;
    use crate::objectives::{objective, ShiftRotation};
    use crate::witness::floors::combinatorial_prefactor;
    use approx::assert_relative_eq;

    fn centred_sphere(d: usize) -> ObjectiveSpec {
        objective("sphere", d, 0, Some(ShiftRotation { shift: vec![0.0; d], rotation: None })).unwrap()
    }

    fn state_from(points: Vec<Vec<f64>>, spec: &ObjectiveSpec, cap: usize) -> AlgoState {
        let pop = points
            .into_iter()
            .map(|x| {
                let f = spec.eval(&x);
                Individual { x, f }
            })
            .collect();
        AlgoState::new(pop, 6, cap)
    }

    #[test]
    fn concentrated_population_is_witnessed() {
        let spec = centred_sphere(3);
        let pts = (0..12).map(|j| vec![1e-4 * j as f64, 0.0, 0.0]).collect();
        let state = state_from(pts, &spec, 20);
        let ecfg = EngineConfig::for_dim(3);
        let cfg = WitnessConfig::default();
        let rep = evaluate_witness(&state, &spec, &ecfg, &cfg, None, &StreamRng::new(1), true).unwrap();
        assert_eq!(rep.gen, 1);
        assert_eq!(rep.l1, Some(true));
        assert!(rep.tuple.is_some());
        assert!(rep.interval_measure >= cfg.delta_f);
        assert!(rep.interval_measure <= cfg.f_plus - cfg.f_minus + 1e-12);
        assert!(rep.l2 && rep.l3);
        assert!(rep.witnessed());
        let m = pbest_count(ecfg.p_best, 12);
        let expected = combinatorial_prefactor(6, m, 11, 31) * cfg.floor_product(3).unwrap();
        assert_relative_eq!(rep.a_t, expected, max_relative = 1e-12);
        assert!(rep.morse.unwrap().conditioned());
    }

    #[test]
    fn far_population_is_not_witnessed() {
        let spec = centred_sphere(2);
        let pts = (0..10).map(|j| vec![50.0 + j as f64, -40.0 + 3.0 * j as f64]).collect();
        let state = state_from(pts, &spec, 0);
        let ecfg = EngineConfig::for_dim(2);
        let cfg = WitnessConfig::default();
        let rep = evaluate_witness(&state, &spec, &ecfg, &cfg, None, &StreamRng::new(1), true).unwrap();
        assert_eq!(rep.l1, Some(false));
        assert!(rep.tuple.is_none());
        assert!(!rep.witnessed());
        assert!(rep.a_t > 0.0 && rep.a_t <= 1.0);
        assert!(!rep.morse.unwrap().c1);
    }

    #[test]
    fn skipped_l1_is_unknown() {
        let spec = centred_sphere(2);
        let pts = (0..6).map(|j| vec![j as f64, 0.0]).collect();
        let state = state_from(pts, &spec, 0);
        let rep = evaluate_witness(
            &state,
            &spec,
            &EngineConfig::for_dim(2),
            &WitnessConfig::default(),
            None,
            &StreamRng::new(3),
            false,
        )
        .unwrap();
        assert_eq!(rep.l1, None);
        assert!(!rep.witnessed());
    }

    #[test]
    fn bad_memory_fails_l2_and_l3() {
        let spec = centred_sphere(2);
        let pts = (0..6).map(|j| vec![1e-5 * j as f64, 0.0]).collect();
        let mut state = state_from(pts, &spec, 0);
        state.mem_f = vec![0.02; 6];
        state.mem_cr = vec![0.0; 6];
        let rep = evaluate_witness(
            &state,
            &spec,
            &EngineConfig::for_dim(2),
            &WitnessConfig::default(),
            None,
            &StreamRng::new(3),
            true,
        )
        .unwrap();
        assert!(!rep.l3);
        assert!(!rep.witnessed());
    }

    #[test]
    fn nearest_donors_exclude_target_and_guide() {
        let spec = centred_sphere(1);
        let pts = vec![vec![0.0], vec![5.0], vec![0.1], vec![0.2], vec![3.0]];
        let mut state = state_from(pts, &spec, 4);
        state.archive.push(vec![0.05]);
        let (r1, r2) = nearest_donors(&state, 0, 0);
        assert_eq!(r1, 2);
        assert_eq!(r2, Donor::Archive(0));
    }
}
