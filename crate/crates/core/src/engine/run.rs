use rand::Rng;

use super::ops::{
    boundary_repair, crossover, lehmer_mean, mutate_unchecked, sample_cr, sample_f, select_from,
};
use super::state::{AlgoState, Donor, EngineConfig, Individual};
use crate::error::Result;
use crate::objectives::ObjectiveSpec;
use crate::rng::{Purpose, StreamRng};

/// What happened to one target in one generation.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub target: usize,
    /// Memory slot, 0-based.
    pub k: usize,
    pub f: f64,
    /// `None` when the crossover rate was not effective (see [`super::Crossover`]).
    pub cr: Option<f64>,
    /// Raw sampled CR, kept even when undefined for bookkeeping.
    pub cr_raw: f64,
    pub b: usize,
    pub r1: usize,
    pub r2: Donor,
    pub mutant_count: usize,
    pub trial_f: f64,
    /// 1-based evaluation index of the trial.
    pub nfe: usize,
    pub accepted: bool,
    pub improved: bool,
}

/// Full per-generation record handed to observers.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationRecord {
    pub gen: usize,
    pub nfe_at_start: usize,
    pub nfe_at_end: usize,
    /// Population and archive sizes the trials were generated from.
    pub pop_size: usize,
    pub archive_size: usize,
    pub best_f: f64,
    pub best_index: usize,
    pub trials: Vec<TrialRecord>,
    /// Budget ran out before every target produced a trial.
    pub truncated: bool,
}

/// Compact per-generation summary kept in a [`RunTrace`].
#[derive(Debug, Clone, PartialEq)]
pub struct GenSummary {
    pub gen: usize,
    pub nfe_at_start: usize,
    pub nfe_at_end: usize,
    pub pop_size: usize,
    pub archive_size: usize,
    pub best_f: f64,
    pub truncated: bool,
    /// Running minima `(nfe, f)` of the evaluations in this generation, in
    /// evaluation order. Enough to recover the first evaluation below any
    /// threshold.
    pub record_lows: Vec<(usize, f64)>,
}

impl GenSummary {
    fn from_evals(
        gen: usize,
        nfe_at_start: usize,
        pop_size: usize,
        archive_size: usize,
        best_f: f64,
        truncated: bool,
        evals: impl Iterator<Item = (usize, f64)>,
    ) -> Self {
        let mut record_lows: Vec<(usize, f64)> = Vec::new();
        let mut nfe_at_end = nfe_at_start;
        for (nfe, f) in evals {
            nfe_at_end = nfe;
            if record_lows.last().is_none_or(|&(_, low)| f < low) {
                record_lows.push((nfe, f));
            }
        }
        Self {
            gen,
            nfe_at_start,
            nfe_at_end,
            pop_size,
            archive_size,
            best_f,
            truncated,
            record_lows,
        }
    }

    /// First evaluation in this generation with `f <= threshold`.
    pub fn first_at_or_below(&self, threshold: f64) -> Option<usize> {
        self.record_lows
            .iter()
            .find(|&&(_, f)| f <= threshold)
            .map(|&(n, _)| n)
    }
}

/// The record stream of one seeded run. `gens[0]` is the initial population.
#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub seed: u64,
    pub max_nfe: usize,
    pub gens: Vec<GenSummary>,
    /// Full records, only when requested.
    pub records: Vec<GenerationRecord>,
    pub final_state: AlgoState,
}

impl RunTrace {
    /// `(generation, nfe)` of the first evaluation with `f <= threshold`.
    pub fn first_hit(&self, threshold: f64) -> Option<(usize, usize)> {
        self.gens
            .iter()
            .find_map(|g| g.first_at_or_below(threshold).map(|n| (g.gen, n)))
    }

    /// Generation during which evaluation `nfe` happened.
    pub fn generation_at_nfe(&self, nfe: usize) -> Option<usize> {
        self.gens
            .iter()
            .find(|g| g.nfe_at_start < nfe && nfe <= g.nfe_at_end)
            .map(|g| g.gen)
    }

    pub fn last_gen(&self) -> usize {
        self.gens.last().map_or(0, |g| g.gen)
    }

    pub fn total_nfe(&self) -> usize {
        self.gens.last().map_or(0, |g| g.nfe_at_end)
    }
}

/// Per-generation hook. `pre` is the state the trials were generated from.
pub trait Observer {
    fn initial(&mut self, _state: &AlgoState) -> Result<()> {
        Ok(())
    }

    fn generation(
        &mut self,
        _pre: &AlgoState,
        _record: &GenerationRecord,
        _post: &AlgoState,
    ) -> Result<()> {
        Ok(())
    }

    /// Whether the observer needs the pre-generation state. Cloning it costs
    /// a copy of the population per generation.
    fn wants_pre_state(&self) -> bool {
        true
    }
}

impl Observer for () {
    fn wants_pre_state(&self) -> bool {
        false
    }
}

fn initialize(spec: &ObjectiveSpec, cfg: &EngineConfig, streams: &StreamRng) -> AlgoState {
    let population = (0..cfg.n_init)
        .map(|i| {
            let mut rng = streams.stream(Purpose::Init, 0, i as u64);
            let x: Vec<f64> = spec
                .lower
                .iter()
                .zip(&spec.upper)
                .map(|(&l, &u)| l + (u - l) * rng.random::<f64>())
                .collect();
            let f = spec.eval(&x);
            Individual { x, f }
        })
        .collect();
    AlgoState::new(population, cfg.memory_size, cfg.archive_capacity())
}

/// One synchronous generation: all trials are built from the current state,
/// then selection, archive, memory update and LPSR are applied.
pub fn step_generation(
    state: &mut AlgoState,
    spec: &ObjectiveSpec,
    cfg: &EngineConfig,
    streams: &StreamRng,
) -> Result<GenerationRecord> {
    let gen = state.gen + 1;
    let t = gen as u64;
    let n = state.n();
    let nfe_at_start = state.nfe;
    let archive_size = state.archive.len();
    let pbest = state.pbest(cfg.p_best);

    let mut trials = Vec::with_capacity(n);
    let mut vectors = Vec::with_capacity(n);
    let mut truncated = false;
    for i in 0..n {
        if state.nfe >= cfg.max_nfe {
            truncated = true;
            break;
        }
        let mut ri = streams.stream(Purpose::Indices, t, i as u64);
        let sel = select_from(state, i, &pbest, &mut ri)?;
        let mut rp = streams.stream(Purpose::Params, t, i as u64);
        let f = sample_f(state.mem_f[sel.k], cfg.sigma_f, &mut rp)?;
        let cr_raw = if state.cr_terminal[sel.k] {
            0.0
        } else {
            sample_cr(state.mem_cr[sel.k], cfg.sigma_cr, &mut rp)
        };
        let xi = &state.population[i].x;
        let v = mutate_unchecked(
            xi,
            &state.population[sel.b].x,
            &state.population[sel.r1].x,
            state.donor(sel.r2),
            f,
        );
        let v = boundary_repair(&v, xi, &spec.lower, &spec.upper);
        let mut rc = streams.stream(Purpose::Crossover, t, i as u64);
        let cx = crossover(&v, xi, cr_raw, &mut rc);
        let trial_f = spec.eval(&cx.u);
        state.nfe += 1;
        trials.push(TrialRecord {
            target: i,
            k: sel.k,
            f,
            cr: cx.cr_defined.then_some(cr_raw),
            cr_raw,
            b: sel.b,
            r1: sel.r1,
            r2: sel.r2,
            mutant_count: cx.mutant_count,
            trial_f,
            nfe: state.nfe,
            accepted: false,
            improved: false,
        });
        vectors.push(cx.u);
    }

    let mut s_f = Vec::new();
    let mut w_f = Vec::new();
    let mut s_cr = Vec::new();
    let mut w_cr = Vec::new();
    for (rec, u) in trials.iter_mut().zip(vectors) {
        let parent = &mut state.population[rec.target];
        if rec.trial_f <= parent.f {
            rec.accepted = true;
            if rec.trial_f < parent.f {
                rec.improved = true;
                let gain = parent.f - rec.trial_f;
                s_f.push(rec.f);
                w_f.push(gain);
                if let Some(cr) = rec.cr {
                    s_cr.push(cr);
                    w_cr.push(gain);
                }
                let old = std::mem::replace(&mut parent.x, u);
                state.archive.push(old);
            } else {
                parent.x = u;
            }
            parent.f = rec.trial_f;
        }
    }

    if state.archive.len() > state.archive_cap {
        let mut ra = streams.stream(Purpose::Archive, t, 0);
        while state.archive.len() > state.archive_cap {
            let j = ra.random_range(0..state.archive.len());
            state.archive.swap_remove(j);
        }
    }

    if !s_f.is_empty() {
        let k = state.slot_ptr;
        if let Some(m) = lehmer_mean(&s_f, &w_f) {
            state.mem_f[k] = m;
        }
        if !s_cr.is_empty() && !state.cr_terminal[k] {
            match lehmer_mean(&s_cr, &w_cr) {
                Some(m) => state.mem_cr[k] = m,
                None if cfg.terminal_cr => state.cr_terminal[k] = true,
                None => state.mem_cr[k] = 0.0,
            }
        }
        state.slot_ptr = (k + 1) % state.memory_size();
    }

    let n_new = cfg.lpsr_size(state.nfe);
    if n_new < state.n() {
        let mut keep = state.ranking();
        keep.truncate(n_new);
        keep.sort_unstable();
        let mut keep = keep.into_iter().peekable();
        let mut idx = 0;
        state.population.retain(|_| {
            let hit = keep.peek() == Some(&idx);
            if hit {
                keep.next();
            }
            idx += 1;
            hit
        });
    }
    state.gen = gen;

    let best_index = state.best_index();
    Ok(GenerationRecord {
        gen,
        nfe_at_start,
        nfe_at_end: state.nfe,
        pop_size: n,
        archive_size,
        best_f: state.population[best_index].f,
        best_index,
        trials,
        truncated,
    })
}

/// Run to budget without observation.
pub fn run(spec: &ObjectiveSpec, cfg: &EngineConfig) -> Result<RunTrace> {
    run_observed(spec, cfg, false, &mut ())
}

/// Run to budget, calling `observer` after every generation. With
/// `keep_records` the full generation records are retained in the trace.
pub fn run_observed<O: Observer + ?Sized>(
    spec: &ObjectiveSpec,
    cfg: &EngineConfig,
    keep_records: bool,
    observer: &mut O,
) -> Result<RunTrace> {
    cfg.validate()?;
    let streams = StreamRng::new(cfg.seed);
    let mut state = initialize(spec, cfg, &streams);
    observer.initial(&state)?;
    let mut gens = vec![GenSummary::from_evals(
        0,
        0,
        state.n(),
        0,
        state.best_f(),
        false,
        state.population.iter().enumerate().map(|(i, ind)| (i + 1, ind.f)),
    )];
    let mut records = Vec::new();
    let want_pre = observer.wants_pre_state();
    while state.nfe < cfg.max_nfe {
        let pre = want_pre.then(|| state.clone());
        let record = step_generation(&mut state, spec, cfg, &streams)?;
        if let Some(pre) = &pre {
            observer.generation(pre, &record, &state)?;
        }
        gens.push(GenSummary::from_evals(
            record.gen,
            record.nfe_at_start,
            record.pop_size,
            record.archive_size,
            record.best_f,
            record.truncated,
            record.trials.iter().map(|t| (t.nfe, t.trial_f)),
        ));
        if keep_records {
            records.push(record);
        }
    }
    Ok(RunTrace {
        seed: cfg.seed,
        max_nfe: cfg.max_nfe,
        gens,
        records,
        final_state: state,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::{objective, ShiftRotation};

    fn sphere(d: usize) -> ObjectiveSpec {
        objective("sphere", d, 1, None).unwrap()
    }

    fn small_cfg(d: usize, budget: usize, seed: u64) -> EngineConfig {
        EngineConfig::for_dim(d).with_budget(budget).with_seed(seed)
    }

    #[test]
    fn deterministic_replay() {
        let s = sphere(3);
        let c = small_cfg(3, 3000, 5);
        let a = run(&s, &c).unwrap();
        let b = run(&s, &c).unwrap();
        assert_eq!(a, b);
        let c2 = small_cfg(3, 3000, 6);
        assert_ne!(a.final_state, run(&s, &c2).unwrap().final_state);
    }

    #[test]
    fn budget_and_lpsr_endpoints() {
        let s = sphere(2);
        let c = small_cfg(2, 2000, 1);
        let t = run(&s, &c).unwrap();
        assert_eq!(t.total_nfe(), 2000);
        assert_eq!(t.gens[0].pop_size, 36);
        assert_eq!(t.final_state.n(), 4);
        assert!(t.final_state.archive.len() <= c.archive_capacity());
    }

    #[test]
    fn best_is_monotone_and_fitness_cached() {
        let s = objective("rastrigin", 4, 2, None).unwrap();
        let c = small_cfg(4, 4000, 3);
        let mut check = FitnessCheck { spec: &s, cap: c.archive_capacity(), last_best: f64::INFINITY };
        run_observed(&s, &c, false, &mut check).unwrap();
    }

    struct FitnessCheck<'a> {
        spec: &'a ObjectiveSpec,
        cap: usize,
        last_best: f64,
    }

    impl Observer for FitnessCheck<'_> {
        fn generation(&mut self, _pre: &AlgoState, rec: &GenerationRecord, post: &AlgoState) -> Result<()> {
            for ind in &post.population {
                assert_eq!(ind.f, self.spec.eval(&ind.x));
                assert!(self.spec.in_box(&ind.x));
            }
            assert!(post.archive.len() <= self.cap);
            assert!(rec.best_f <= self.last_best);
            self.last_best = rec.best_f;
            for t in &rec.trials {
                assert!(t.k < 6 && t.f > 0.0 && t.f <= 1.0);
                if let Some(cr) = t.cr {
                    assert!((0.0..=1.0).contains(&cr));
                }
            }
            Ok(())
        }
    }

    #[test]
    fn equal_trial_is_accepted_but_not_archived() {
        // With the whole population at the optimum every trial ties its parent.
        let collapsed = objective(
            "sphere",
            2,
            0,
            Some(ShiftRotation { shift: vec![0.0, 0.0], rotation: None }),
        )
        .unwrap();
        let c = small_cfg(2, 200, 1);
        let streams = StreamRng::new(1);
        let mut state = initialize(&collapsed, &c, &streams);
        for ind in &mut state.population {
            ind.x = vec![0.0, 0.0];
            ind.f = 0.0;
        }
        let mem = (state.mem_f.clone(), state.mem_cr.clone(), state.slot_ptr);
        let rec = step_generation(&mut state, &collapsed, &c, &streams).unwrap();
        assert!(rec.trials.iter().all(|t| t.accepted && !t.improved));
        assert!(state.archive.is_empty());
        assert_eq!((state.mem_f.clone(), state.mem_cr.clone(), state.slot_ptr), mem);
    }

    #[test]
    fn rejected_generation_leaves_memory_and_archive() {
        let s = sphere(2);
        let c = small_cfg(2, 200, 1);
        let streams = StreamRng::new(1);
        let mut state = initialize(&s, &c, &streams);
        let xs = s.x_star.clone().unwrap();
        for ind in &mut state.population {
            ind.x = xs.clone();
            ind.f = -1.0; // unreachable fitness: every trial is rejected
        }
        let before = state.clone();
        step_generation(&mut state, &s, &c, &streams).unwrap();
        assert_eq!(state.archive, before.archive);
        assert_eq!(state.mem_f, before.mem_f);
        assert_eq!(state.mem_cr, before.mem_cr);
    }

    #[test]
    fn truncated_generation() {
        let s = sphere(2);
        let mut c = small_cfg(2, 40, 1);
        c.n_init = 36;
        let t = run_observed(&s, &c, true, &mut ()).unwrap();
        assert_eq!(t.total_nfe(), 40);
        let last = t.records.last().unwrap();
        assert!(last.truncated);
        assert_eq!(last.trials.len(), 4);
    }

    #[test]
    fn hit_bookkeeping() {
        let s = sphere(2);
        let c = small_cfg(2, 3000, 4);
        let t = run(&s, &c).unwrap();
        // threshold above every initial value: tau = 0 at the first evaluation
        assert_eq!(t.first_hit(f64::INFINITY), Some((0, 1)));
        assert_eq!(t.first_hit(-1.0), None);
        let (g, n) = t.first_hit(1e-2).unwrap();
        assert_eq!(t.generation_at_nfe(n), Some(g));
        // persistence: once hit, best stays below the threshold
        assert!(t.gens[g..].iter().all(|s| s.best_f <= 1e-2));
    }
}
