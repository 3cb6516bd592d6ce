//! Report tables rebuilt from run logs.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::log::{fmt_f64, RunLog};
use crate::error::{Error, Result};
use crate::survival::{
    envelope_from_witness, envelope_validity_check, gamma_hat, geometric_fit_and_cluster,
    km_estimate, Envelope, GammaEstimate, HitRecord, KMCurve, RegimeLabel, TimeIndex,
    ValidityReport, WitnessSeries,
};
use crate::witness::t_wit;

/// Failure-mode thresholds.
pub const EXPLOITATION_GAMMA: f64 = 0.3;
pub const EXPLOITATION_L3: f64 = 0.5;
pub const EXPLORATION_GAMMA: f64 = 0.9;
pub const EXPLORATION_HIT_RATE: f64 = 0.1;

/// Summary of one `(function, dim, budget, eps)` cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub function: String,
    pub dim: usize,
    pub budget: usize,
    pub eps: f64,
    pub runs: usize,
    pub hits: usize,
    /// Kaplan–Meier survival at the evaluation budget.
    pub s_budget: f64,
    pub tau_gen_mean: Option<f64>,
    pub tau_gen_sd: Option<f64>,
    pub tau_eval_mean: Option<f64>,
    pub tau_eval_sd: Option<f64>,
    pub clustering: Option<f64>,
    pub regime: RegimeLabel,
    pub gamma_mean: Option<f64>,
    pub l1_rate: Option<f64>,
    pub l2_rate: Option<f64>,
    pub l3_rate: Option<f64>,
    pub cond_samples: usize,
    pub p_hat: Option<f64>,
    pub a_bar: Option<f64>,
    pub ratio: Option<f64>,
    pub twit_finite: usize,
    pub failure_mode: &'static str,
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "n/a".into(), fmt_f64)
}

fn mean_sd(xs: &[f64]) -> (Option<f64>, Option<f64>) {
    if xs.is_empty() {
        return (None, None);
    }
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let sd = (xs.len() >= 2)
        .then(|| (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt());
    (Some(m), sd)
}

/// Load every `run_*.log` in `dir`, ordered by file name.
pub fn load_runs(dir: &Path) -> Result<Vec<RunLog>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("run_") && n.ends_with(".log"))
        })
        .collect();
    paths.sort();
    paths.iter().map(|p| RunLog::read(p)).collect()
}

fn hit_records(logs: &[RunLog]) -> Result<Vec<HitRecord>> {
    logs.iter().map(RunLog::hit_record).collect()
}

fn witness_series(logs: &[RunLog], records: &[HitRecord]) -> Vec<WitnessSeries> {
    logs.iter()
        .zip(records)
        .map(|(l, r)| WitnessSeries {
            tau_gen: r.tau_gen,
            flags: l.rows.iter().filter(|row| row.gen >= 1).map(|row| row.witnessed()).collect(),
        })
        .collect()
}

fn horizon(logs: &[RunLog]) -> usize {
    logs.iter().filter_map(|l| l.rows.last()).map(|r| r.gen).max().unwrap_or(0)
}

fn meta_or<T: std::str::FromStr>(log: &RunLog, key: &str) -> Result<T> {
    log.meta(key)
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::Config(format!("log metadata `{key}` missing or malformed")))
}

/// Witness envelope against the generation-indexed Kaplan–Meier curve.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeCheck {
    pub km: KMCurve,
    /// `a_t` for `t = 1..=horizon` (after scaling).
    pub a: Vec<f64>,
    pub gamma: Vec<GammaEstimate>,
    pub p0c: f64,
    pub envelope: Envelope,
    pub validity: ValidityReport,
}

/// Build `p0c prod (1 - a_t gamma_t)` from the logged floors and the
/// measured witness frequencies, and compare it with the Kaplan–Meier
/// survival. `a_scale` multiplies every `a_t` (use 1 for the real check).
pub fn envelope_check(logs: &[RunLog], a_scale: f64) -> Result<EnvelopeCheck> {
    if logs.is_empty() {
        return Err(Error::Empty("run logs"));
    }
    let records = hit_records(logs)?;
    let km = km_estimate(&records, TimeIndex::Gen)?;
    let h = horizon(logs);
    let gamma = gamma_hat(&witness_series(logs, &records), h);
    let mut a = vec![0.0; h];
    for t in 1..=h {
        // N_t is the same in every run, so a_t is too; take the smallest seen
        let at = logs
            .iter()
            .filter_map(|l| l.rows.get(t).filter(|r| r.gen == t).and_then(|r| r.a_t))
            .fold(f64::INFINITY, f64::min);
        a[t - 1] = if at.is_finite() { (at * a_scale).min(1.0) } else { 0.0 };
    }
    let p0c = records.iter().filter(|r| r.tau_gen != Some(0)).count() as f64 / records.len() as f64;
    let g: Vec<f64> = gamma.iter().map(|g| g.gamma).collect();
    let envelope = envelope_from_witness(&a, &g, p0c)?;
    let validity = envelope_validity_check(&km, &envelope.product);
    Ok(EnvelopeCheck { km, a, gamma, p0c, envelope, validity })
}

/// Summary row for the runs of one cell.
pub fn report_row(logs: &[RunLog]) -> Result<ReportRow> {
    let first = logs.first().ok_or(Error::Empty("run logs"))?;
    let records = hit_records(logs)?;
    let runs = records.len();
    let hits = records.iter().filter(|r| r.tau_gen.is_some()).count();
    let budget: usize = meta_or(first, "max_nfe")?;
    let km_eval = km_estimate(&records, TimeIndex::Eval)?;
    let taus: Vec<Option<usize>> = records.iter().map(|r| r.tau_gen).collect();
    let fit = geometric_fit_and_cluster(&taus);
    let (tau_eval_mean, tau_eval_sd) =
        mean_sd(&records.iter().filter_map(|r| r.tau_eval).map(|t| t as f64).collect::<Vec<_>>());

    let series = witness_series(logs, &records);
    let gamma = gamma_hat(&series, horizon(logs));
    let live: Vec<f64> = gamma.iter().filter(|g| g.surviving > 0).map(|g| g.gamma).collect();
    let gamma_mean = mean_sd(&live).0;

    let (mut n_l, mut c1, mut c2, mut c3) = (0usize, 0usize, 0usize, 0usize);
    let (mut cond, mut succ, mut a_sum) = (0usize, 0usize, 0.0);
    let mut twit_finite = 0;
    for (log, rec) in logs.iter().zip(&records) {
        for row in log.rows.iter().filter(|r| r.gen >= 1) {
            if rec.tau_gen.is_none_or(|tau| tau >= row.gen) && row.l1.is_some() {
                n_l += 1;
                c1 += (row.l1 == Some(true)) as usize;
                c2 += (row.l2 == Some(true)) as usize;
                c3 += (row.l3 == Some(true)) as usize;
            }
            if let (Some(true), Some(s)) = (row.morse_cond, row.morse_success) {
                cond += 1;
                succ += s as usize;
                a_sum += row.a_tilde.unwrap_or(0.0);
            }
        }
        let holds: Vec<Option<bool>> = log.rows.iter().map(|r| r.regime_holds()).collect();
        twit_finite += t_wit(&holds).is_some() as usize;
    }
    let rate = |c: usize| (n_l > 0).then(|| c as f64 / n_l as f64);
    let (p_hat, a_bar) = if cond > 0 {
        (Some(succ as f64 / cond as f64), Some(a_sum / cond as f64))
    } else {
        (None, None)
    };
    let ratio = match (p_hat, a_bar) {
        (Some(p), Some(a)) if a > 0.0 => Some(p / a),
        _ => None,
    };
    let (l3_rate, hit_rate) = (rate(c3), hits as f64 / runs as f64);
    let failure_mode = match (gamma_mean, l3_rate) {
        (Some(g), Some(l3)) if g < EXPLOITATION_GAMMA && l3 < EXPLOITATION_L3 => "exploitation",
        (Some(g), _) if g > EXPLORATION_GAMMA && hit_rate < EXPLORATION_HIT_RATE => "exploration",
        _ => "-",
    };
    Ok(ReportRow {
        function: first.meta("function").unwrap_or("?").to_string(),
        dim: meta_or(first, "dim")?,
        budget,
        eps: meta_or(first, "eps")?,
        runs,
        hits,
        s_budget: km_eval.survival_at(budget),
        tau_gen_mean: fit.mean,
        tau_gen_sd: fit.sd,
        tau_eval_mean,
        tau_eval_sd,
        clustering: fit.clustering,
        regime: fit.regime,
        gamma_mean,
        l1_rate: rate(c1),
        l2_rate: rate(c2),
        l3_rate,
        cond_samples: cond,
        p_hat,
        a_bar,
        ratio,
        twit_finite,
        failure_mode,
    })
}

pub const MORSE_HEADER: &str = "function\tdim\tbudget\teps\tcond_samples\tp_hat\ta_bar\tratio\tbound_holds";
pub const KM_HEADER: &str =
    "function\tdim\tbudget\teps\thits\truns\tS_budget\ttau_gen_mean\ttau_gen_sd\ttau_eval_mean\ttau_eval_sd\tclustering\tregime\ttwit_finite";
pub const FAILURE_HEADER: &str =
    "function\tdim\tbudget\teps\tgamma_mean\tL1_rate\tL2_rate\tL3_rate\thit_rate\tfailure_mode";

impl ReportRow {
    fn key(&self) -> String {
        format!("{}\t{}\t{}\t{}", self.function, self.dim, self.budget, fmt_f64(self.eps))
    }

    pub fn morse_line(&self) -> String {
        let holds = match self.ratio {
            Some(r) => if r >= 1.0 { "yes" } else { "no" },
            None => "n/a",
        };
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}",
            self.key(),
            self.cond_samples,
            opt(self.p_hat),
            opt(self.a_bar),
            opt(self.ratio),
            holds
        )
    }

    pub fn km_line(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            self.key(),
            self.hits,
            self.runs,
            fmt_f64(self.s_budget),
            opt(self.tau_gen_mean),
            opt(self.tau_gen_sd),
            opt(self.tau_eval_mean),
            opt(self.tau_eval_sd),
            opt(self.clustering),
            self.regime,
            self.twit_finite
        )
    }

    pub fn failure_line(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            self.key(),
            opt(self.gamma_mean),
            opt(self.l1_rate),
            opt(self.l2_rate),
            opt(self.l3_rate),
            fmt_f64(self.hits as f64 / self.runs as f64),
            self.failure_mode
        )
    }

    /// One-row summary file written next to the logs.
    pub fn summary_text(&self) -> String {
        format!(
            "{KM_HEADER}\n{}\n\n{MORSE_HEADER}\n{}\n\n{FAILURE_HEADER}\n{}\n",
            self.km_line(),
            self.morse_line(),
            self.failure_line()
        )
    }
}

/// The three report tables.
#[derive(Debug, Clone, PartialEq)]
pub struct Reports {
    pub rows: Vec<ReportRow>,
    pub morse_table: String,
    pub km_table: String,
    pub failure_table: String,
}

impl Reports {
    pub fn from_rows(rows: Vec<ReportRow>) -> Self {
        let table = |header: &str, f: fn(&ReportRow) -> String| {
            let mut s = format!("{header}\n");
            for r in &rows {
                let _ = writeln!(s, "{}", f(r));
            }
            s
        };
        let morse_table = table(MORSE_HEADER, ReportRow::morse_line);
        let km_table = table(KM_HEADER, ReportRow::km_line);
        let failure_table = table(FAILURE_HEADER, ReportRow::failure_line);
        Self { rows, morse_table, km_table, failure_table }
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (name, text) in [
            ("morse_table.tsv", &self.morse_table),
            ("km_table.tsv", &self.km_table),
            ("failure_table.tsv", &self.failure_table),
        ] {
            let p = dir.join(name);
            std::fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
        }
        Ok(())
    }
}

fn sorted_subdirs(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    v.sort();
    Ok(v)
}

/// Every `<group>/<eps>` directory holding run logs under `log_dir`.
pub fn cell_dirs(log_dir: &Path) -> Result<Vec<PathBuf>> {
    let mut cells = Vec::new();
    for g in sorted_subdirs(log_dir)? {
        let mut eps_dirs: Vec<(f64, PathBuf)> = sorted_subdirs(&g)?
            .into_iter()
            .filter_map(|p| {
                let e = p.file_name()?.to_str()?.strip_prefix("eps_")?.parse().ok()?;
                Some((e, p))
            })
            .collect();
        eps_dirs.sort_by(|a, b| a.0.total_cmp(&b.0));
        cells.extend(eps_dirs.into_iter().map(|(_, p)| p));
    }
    Ok(cells)
}

/// Rebuild all tables from the logs under `log_dir`.
pub fn build_reports(log_dir: &Path) -> Result<Reports> {
    let mut rows = Vec::new();
    for cell in cell_dirs(log_dir)? {
        let logs = load_runs(&cell)?;
        if !logs.is_empty() {
            rows.push(report_row(&logs)?);
        }
    }
    if rows.is_empty() {
        return Err(Error::Empty("log directory"));
    }
    Ok(Reports::from_rows(rows))
}

/// Survival curve table. On the generation clock it carries the witness
/// envelopes; on the evaluation clock those columns are `-`.
pub fn curve_table(logs: &[RunLog], index: TimeIndex) -> Result<String> {
    let mut s = String::from("n\tS\tSE\tenvelope_product\tenvelope_exp\n");
    match index {
        TimeIndex::Gen => {
            let chk = envelope_check(logs, 1.0)?;
            for n in 0..chk.envelope.product.len() {
                let _ = writeln!(
                    s,
                    "{n}\t{}\t{}\t{}\t{}",
                    fmt_f64(chk.km.survival_at(n)),
                    fmt_f64(chk.km.se_at(n)),
                    fmt_f64(chk.envelope.product[n]),
                    fmt_f64(chk.envelope.exponential[n])
                );
            }
        }
        TimeIndex::Eval => {
            let km = km_estimate(&hit_records(logs)?, TimeIndex::Eval)?;
            let _ = writeln!(s, "0\t1e0\t0e0\t-\t-");
            for (i, &t) in km.event_times.iter().enumerate() {
                let _ = writeln!(s, "{t}\t{}\t{}\t-\t-", fmt_f64(km.survival[i]), fmt_f64(km.se[i]));
            }
        }
    }
    Ok(s)
}
