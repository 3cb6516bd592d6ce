//! Per-run log files.
//!
//! A log is a `# lshade-fht log v1` line, `# key=value` metadata lines, a
//! `# columns` line and one tab-separated row per generation. Row 0 is the
//! initial population. Booleans are `1`/`0`, unevaluated fields are `-`,
//! floats use shortest round-trip exponent notation.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::survival::HitRecord;

pub const LOG_VERSION_LINE: &str = "# lshade-fht log v1";

pub const COLUMNS: [&str; 24] = [
    "gen",
    "nfe",
    "N",
    "A",
    "best_f",
    "L1",
    "L2",
    "L3",
    "interval_measure",
    "density_inf",
    "cr_tail",
    "a_t",
    "a_tilde",
    "G1",
    "G2",
    "G3",
    "G4",
    "G5",
    "hit_flag",
    "hit_nfe",
    "morse_cond",
    "morse_success",
    "c_pair",
    "gamma0",
];

/// One generation. Witness fields refer to the state the generation's
/// trials were built from; `G1..G5` and `best_f` to the state after it.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LogRow {
    pub gen: usize,
    pub nfe: usize,
    pub n: usize,
    pub a: usize,
    pub best_f: f64,
    pub l1: Option<bool>,
    pub l2: Option<bool>,
    pub l3: Option<bool>,
    pub interval_measure: Option<f64>,
    pub density_inf: Option<f64>,
    pub cr_tail: Option<f64>,
    pub a_t: Option<f64>,
    pub a_tilde: Option<f64>,
    pub g: [Option<bool>; 5],
    pub hit: bool,
    pub hit_nfe: Option<usize>,
    pub morse_cond: Option<bool>,
    pub morse_success: Option<bool>,
    pub c_pair: Option<f64>,
    pub gamma0: Option<f64>,
}

impl LogRow {
    /// L1, L2 and L3 all recorded true.
    pub fn witnessed(&self) -> bool {
        self.l1 == Some(true) && self.l2 == Some(true) && self.l3 == Some(true)
    }

    /// Regime flags all known and true.
    pub fn regime_holds(&self) -> Option<bool> {
        if self.g.contains(&Some(false)) {
            Some(false)
        } else if self.g.contains(&None) {
            None
        } else {
            Some(true)
        }
    }
}

pub fn fmt_f64(x: f64) -> String {
    format!("{x:e}")
}

fn fmt_opt_f64(x: Option<f64>) -> String {
    x.map_or_else(|| "-".into(), fmt_f64)
}

fn fmt_opt_bool(x: Option<bool>) -> &'static str {
    match x {
        Some(true) => "1",
        Some(false) => "0",
        None => "-",
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunLog {
    pub meta: BTreeMap<String, String>,
    pub rows: Vec<LogRow>,
}

impl RunLog {
    pub fn meta(&self, key: &str) -> Option<&str> {
        self.meta.get(key).map(String::as_str)
    }

    fn meta_parse<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        self.meta(key)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::Config(format!("log metadata `{key}` missing or malformed")))
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str(LOG_VERSION_LINE);
        s.push('\n');
        for (k, v) in &self.meta {
            let _ = writeln!(s, "# {k}={v}");
        }
        let _ = writeln!(s, "# columns\t{}", COLUMNS.join("\t"));
        for r in &self.rows {
            let fields = [
                r.gen.to_string(),
                r.nfe.to_string(),
                r.n.to_string(),
                r.a.to_string(),
                fmt_f64(r.best_f),
                fmt_opt_bool(r.l1).into(),
                fmt_opt_bool(r.l2).into(),
                fmt_opt_bool(r.l3).into(),
                fmt_opt_f64(r.interval_measure),
                fmt_opt_f64(r.density_inf),
                fmt_opt_f64(r.cr_tail),
                fmt_opt_f64(r.a_t),
                fmt_opt_f64(r.a_tilde),
                fmt_opt_bool(r.g[0]).into(),
                fmt_opt_bool(r.g[1]).into(),
                fmt_opt_bool(r.g[2]).into(),
                fmt_opt_bool(r.g[3]).into(),
                fmt_opt_bool(r.g[4]).into(),
                fmt_opt_bool(Some(r.hit)).into(),
                r.hit_nfe.map_or_else(|| "-".into(), |v| v.to_string()),
                fmt_opt_bool(r.morse_cond).into(),
                fmt_opt_bool(r.morse_success).into(),
                fmt_opt_f64(r.c_pair),
                fmt_opt_f64(r.gamma0),
            ];
            s.push_str(&fields.join("\t"));
            s.push('\n');
        }
        s
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let err = |line: usize, msg: String| Error::Log {
            path: path.to_path_buf(),
            line,
            msg,
        };
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, l)) if l == LOG_VERSION_LINE => {}
            _ => return Err(err(1, format!("expected `{LOG_VERSION_LINE}`"))),
        }
        let mut log = RunLog::default();
        let mut seen_columns = false;
        for (i, line) in lines {
            let ln = i + 1;
            if let Some(rest) = line.strip_prefix("# ") {
                if let Some(cols) = rest.strip_prefix("columns\t") {
                    if cols.split('\t').ne(COLUMNS.iter().copied()) {
                        return Err(err(ln, "unexpected column layout".into()));
                    }
                    seen_columns = true;
                } else if let Some((k, v)) = rest.split_once('=') {
                    log.meta.insert(k.to_string(), v.to_string());
                } else {
                    return Err(err(ln, format!("malformed metadata `{line}`")));
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            if !seen_columns {
                return Err(err(ln, "data before the columns line".into()));
            }
            log.rows.push(parse_row(line).map_err(|m| err(ln, m))?);
        }
        if !seen_columns {
            return Err(err(0, "missing columns line".into()));
        }
        Ok(log)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    /// First hit on the generation and evaluation clocks; censored at the
    /// last logged generation and the evaluation budget.
    pub fn hit_record(&self) -> Result<HitRecord> {
        let first = self.rows.iter().find(|r| r.hit);
        Ok(HitRecord {
            run_id: self.meta_parse("run")?,
            seed: self.meta_parse("seed")?,
            tau_gen: first.map(|r| r.gen),
            tau_eval: first.and_then(|r| r.hit_nfe),
            censor_gen: self.rows.last().map_or(0, |r| r.gen),
            censor_nfe: self.meta_parse("max_nfe")?,
        })
    }
}

fn parse_row(line: &str) -> std::result::Result<LogRow, String> {
    let f: Vec<&str> = line.split('\t').collect();
    if f.len() != COLUMNS.len() {
        return Err(format!("expected {} fields, found {}", COLUMNS.len(), f.len()));
    }
    let us = |i: usize| f[i].parse::<usize>().map_err(|_| format!("bad {} `{}`", COLUMNS[i], f[i]));
    let fl = |i: usize| f[i].parse::<f64>().map_err(|_| format!("bad {} `{}`", COLUMNS[i], f[i]));
    let ofl = |i: usize| if f[i] == "-" { Ok(None) } else { fl(i).map(Some) };
    let ob = |i: usize| match f[i] {
        "1" => Ok(Some(true)),
        "0" => Ok(Some(false)),
        "-" => Ok(None),
        v => Err(format!("bad {} `{v}`", COLUMNS[i])),
    };
    Ok(LogRow {
        gen: us(0)?,
        nfe: us(1)?,
        n: us(2)?,
        a: us(3)?,
        best_f: fl(4)?,
        l1: ob(5)?,
        l2: ob(6)?,
        l3: ob(7)?,
        interval_measure: ofl(8)?,
        density_inf: ofl(9)?,
        cr_tail: ofl(10)?,
        a_t: ofl(11)?,
        a_tilde: ofl(12)?,
        g: [ob(13)?, ob(14)?, ob(15)?, ob(16)?, ob(17)?],
        hit: ob(18)?.ok_or("hit_flag must be 0 or 1")?,
        hit_nfe: if f[19] == "-" { None } else { Some(us(19)?) },
        morse_cond: ob(20)?,
        morse_success: ob(21)?,
        c_pair: ofl(22)?,
        gamma0: ofl(23)?,
    })
}
