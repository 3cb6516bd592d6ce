//! Batch experiments: configuration, instrumented runs, logs and reports.

mod config;
mod log;
mod report;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

pub use config::{eps_dir_name, EngineOverrides, EpsPlan, ExperimentConfig, FunctionEntry, Group, RegimeOverrides};
pub use log::{fmt_f64, LogRow, RunLog, COLUMNS, LOG_VERSION_LINE};
pub use report::{
    build_reports, cell_dirs, curve_table, envelope_check, load_runs, report_row, EnvelopeCheck,
    ReportRow, Reports, FAILURE_HEADER, KM_HEADER, MORSE_HEADER,
};

use crate::engine::{run_observed, AlgoState, EngineConfig, GenerationRecord, Observer};
use crate::error::{Error, Result};
use crate::objectives::{MorseSource, ObjectiveSpec};
use crate::rng::StreamRng;
use crate::witness::{detect_regime, evaluate_witness, gamma0};

struct EpsLog<'a> {
    plan: &'a EpsPlan,
    threshold: f64,
    hit: bool,
    rows: Vec<LogRow>,
}

/// Observer that evaluates the witness machinery for every eps and
/// collects log rows.
struct LogObserver<'a> {
    spec: &'a ObjectiveSpec,
    engine: &'a EngineConfig,
    streams: StreamRng,
    logs: Vec<EpsLog<'a>>,
}

impl Observer for LogObserver<'_> {
    fn initial(&mut self, state: &AlgoState) -> Result<()> {
        for log in &mut self.logs {
            let first = state.population.iter().position(|ind| ind.f <= log.threshold);
            log.hit = first.is_some();
            let flags = detect_regime(state, self.spec, &log.plan.regime, self.engine, &log.plan.witness);
            log.rows.push(LogRow {
                gen: 0,
                nfe: state.nfe,
                n: state.n(),
                a: state.archive.len(),
                best_f: state.best_f(),
                g: flags.g,
                hit: first.is_some(),
                hit_nfe: first.map(|i| i + 1),
                ..LogRow::default()
            });
        }
        Ok(())
    }

    fn generation(&mut self, pre: &AlgoState, rec: &GenerationRecord, post: &AlgoState) -> Result<()> {
        for log in &mut self.logs {
            let w = &log.plan.witness;
            let rep = evaluate_witness(pre, self.spec, self.engine, w, None, &self.streams, !log.hit)?;
            let flags = detect_regime(post, self.spec, &log.plan.regime, self.engine, w);
            let first = rec.trials.iter().find(|t| t.trial_f <= log.threshold);
            log.hit |= first.is_some();
            let morse_success = rep.morse.filter(|m| m.conditioned()).and_then(|m| {
                rec.trials
                    .iter()
                    .find(|t| t.target == m.b)
                    .map(|t| t.trial_f <= log.threshold)
            });
            let g0 = gamma0(
                pre.memory_size(),
                w.g_minus,
                w.f_plus - w.f_minus,
                w.q_minus,
                self.engine.p_best,
                pre.n(),
                pre.archive.len(),
                log.plan.regime.m_cluster,
            )
            .ok();
            log.rows.push(LogRow {
                gen: rec.gen,
                nfe: rec.nfe_at_end,
                n: rec.pop_size,
                a: rec.archive_size,
                best_f: rec.best_f,
                l1: rep.l1,
                l2: Some(rep.l2),
                l3: Some(rep.l3),
                interval_measure: rep.l1.map(|_| rep.interval_measure),
                density_inf: Some(rep.density_inf),
                cr_tail: Some(rep.cr_tail),
                a_t: Some(rep.a_t),
                a_tilde: rep.morse.map(|m| m.a_tilde),
                g: flags.g,
                hit: first.is_some(),
                hit_nfe: first.map(|t| t.nfe),
                morse_cond: rep.morse.map(|m| m.conditioned()),
                morse_success,
                c_pair: rep.morse.map(|m| m.c_pair),
                gamma0: g0,
            });
        }
        Ok(())
    }
}

fn metadata(group: &Group, plan: &EpsPlan, run: usize, seed: u64, master: u64) -> BTreeMap<String, String> {
    let (s, e, w, r) = (&group.spec, &group.engine, &plan.witness, &plan.regime);
    let mut m = BTreeMap::new();
    let mut put = |k: &str, v: String| {
        m.insert(k.to_string(), v);
    };
    put("function", s.id.clone());
    put("dim", s.dim.to_string());
    put("eps", fmt_f64(plan.eps));
    put("f_star", fmt_f64(s.f_star));
    put("run", run.to_string());
    put("seed", seed.to_string());
    put("master_seed", master.to_string());
    put("max_nfe", e.max_nfe.to_string());
    put("n_init", e.n_init.to_string());
    put("n_min", e.n_min.to_string());
    put("memory_size", e.memory_size.to_string());
    put("p_best", fmt_f64(e.p_best));
    put("arc_rate", fmt_f64(e.arc_rate));
    put("archive_cap", e.archive_capacity().to_string());
    put("sigma_f", fmt_f64(e.sigma_f));
    put("sigma_cr", fmt_f64(e.sigma_cr));
    put("terminal_cr", e.terminal_cr.to_string());
    put("f_minus", fmt_f64(w.f_minus));
    put("f_plus", fmt_f64(w.f_plus));
    put("delta_f", fmt_f64(w.delta_f));
    put("c_cr", fmt_f64(w.c_cr));
    put("g_minus", fmt_f64(w.g_minus));
    put("q_minus", fmt_f64(w.q_minus));
    put("r_mask", w.r(s.dim).to_string());
    put("grid_points", w.grid_points.to_string());
    put("max_candidates", w.max_candidates.to_string());
    put("stability_filter", w.stability_filter.to_string());
    put("eps_in", fmt_f64(r.eps_in));
    put("eps_out", fmt_f64(r.eps_out));
    put("r_conc", fmt_f64(r.r_conc));
    put("m_cluster", r.m_cluster.to_string());
    match &s.morse {
        Some(md) => {
            let src = match md.source {
                MorseSource::Exact => "exact",
                MorseSource::Estimated => "estimated",
            };
            put("morse", src.into());
            put("mu", fmt_f64(md.mu));
            put("lip", fmt_f64(md.lip));
            put("r0", fmt_f64(md.r0));
        }
        None => put("morse", "none".into()),
    }
    m
}

pub fn run_file_name(run: usize) -> String {
    format!("run_{run:03}.log")
}

/// Execute one seeded run of `group` and return one log per eps.
pub fn run_logs(group: &Group, run: usize, master_seed: u64) -> Result<Vec<RunLog>> {
    let seed = StreamRng::run_seed(master_seed, run as u64);
    let engine = group.engine.clone().with_seed(seed);
    let mut obs = LogObserver {
        spec: &group.spec,
        engine: &engine,
        streams: StreamRng::new(seed),
        logs: group
            .eps
            .iter()
            .map(|plan| EpsLog {
                plan,
                threshold: group.spec.f_star + plan.eps,
                hit: false,
                rows: Vec::new(),
            })
            .collect(),
    };
    run_observed(&group.spec, &engine, false, &mut obs)?;
    Ok(obs
        .logs
        .into_iter()
        .map(|l| RunLog {
            meta: metadata(group, l.plan, run, seed, master_seed),
            rows: l.rows,
        })
        .collect())
}

/// Paths and summary rows produced by [`run_experiment`].
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub log_dir: PathBuf,
    pub rows: Vec<ReportRow>,
}

pub fn cell_dir(log_dir: &Path, group: &Group, plan: &EpsPlan) -> PathBuf {
    log_dir.join(&group.name).join(&plan.dir_name)
}

/// Run the whole grid in parallel over `(group, run)` and write logs to
/// `<out_dir>/logs/<function>_d<dim>_b<budget>/eps_<eps>/run_<k>.log`,
/// then a `summary.tsv` per cell rebuilt from those logs. `jobs` caps the
/// worker threads (`None` = all cores).
pub fn run_experiment(cfg: &ExperimentConfig, jobs: Option<usize>) -> Result<ExperimentOutput> {
    let groups = cfg.plan()?;
    let log_dir = cfg.out_dir.join("logs");
    for g in &groups {
        for p in &g.eps {
            let d = cell_dir(&log_dir, g, p);
            std::fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
        }
    }
    let tasks: Vec<(usize, usize)> = (0..groups.len())
        .flat_map(|g| (0..cfg.runs).map(move |r| (g, r)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| {
        tasks.par_iter().try_for_each(|&(gi, run)| {
            let g = &groups[gi];
            let logs = run_logs(g, run, cfg.seed)?;
            for (log, plan) in logs.iter().zip(&g.eps) {
                log.write(&cell_dir(&log_dir, g, plan).join(run_file_name(run)))?;
            }
            ::log::debug!("{} run {run} done", g.name);
            Ok::<(), Error>(())
        })
    })?;
    let mut cells: Vec<(&str, f64, PathBuf)> = groups
        .iter()
        .flat_map(|g| g.eps.iter().map(|p| (g.name.as_str(), p.eps, cell_dir(&log_dir, g, p))))
        .collect();
    cells.sort_by(|a, b| a.0.cmp(b.0).then(a.1.total_cmp(&b.1)));
    let mut rows = Vec::new();
    for (_, _, dir) in cells {
        let row = report_row(&load_runs(&dir)?)?;
        let path = dir.join("summary.tsv");
        std::fs::write(&path, row.summary_text()).map_err(|e| Error::io(&path, e))?;
        rows.push(row);
    }
    Ok(ExperimentOutput { log_dir, rows })
}
