//! Experiment configuration (TOML).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::engine::EngineConfig;
use crate::error::{Error, Result};
use crate::objectives::{objective, ObjectiveSpec, ShiftRotation};
use crate::witness::{r_safe, RegimeParams, WitnessConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionEntry {
    pub id: String,
    pub dim: usize,
    /// Optional shift/rotation file.
    #[serde(default)]
    pub data: Option<PathBuf>,
}

/// Engine fields that may be overridden; the rest follow
/// [`EngineConfig::for_dim`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineOverrides {
    pub n_init: Option<usize>,
    pub n_min: Option<usize>,
    pub memory_size: Option<usize>,
    pub p_best: Option<f64>,
    pub arc_rate: Option<f64>,
    pub sigma_f: Option<f64>,
    pub sigma_cr: Option<f64>,
    pub terminal_cr: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegimeOverrides {
    /// `eps_out = eps_out_factor * eps`.
    pub eps_out_factor: f64,
    /// Defaults to `r_safe / (2 (F- + Delta_F))` with curvature data and
    /// to `sqrt(eps)` without.
    pub r_conc: Option<f64>,
    pub m_cluster: usize,
}

impl Default for RegimeOverrides {
    fn default() -> Self {
        Self {
            eps_out_factor: 10.0,
            r_conc: None,
            m_cluster: 4,
        }
    }
}

fn default_runs() -> usize {
    51
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub functions: Vec<FunctionEntry>,
    pub eps: Vec<f64>,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out_dir: PathBuf,
    /// Evaluation budgets; empty means `10000 d`.
    #[serde(default)]
    pub budgets: Vec<usize>,
    #[serde(default)]
    pub engine: EngineOverrides,
    /// `eps` inside this table is ignored; each entry of `eps` is used.
    #[serde(default)]
    pub witness: WitnessConfig,
    #[serde(default)]
    pub regime: RegimeOverrides,
}

/// One `(function, budget)` cell of the experiment grid.
#[derive(Debug, Clone)]
pub struct Group {
    pub name: String,
    pub spec: ObjectiveSpec,
    pub engine: EngineConfig,
    pub eps: Vec<EpsPlan>,
}

#[derive(Debug, Clone)]
pub struct EpsPlan {
    pub eps: f64,
    pub dir_name: String,
    pub witness: WitnessConfig,
    pub regime: RegimeParams,
}

pub fn eps_dir_name(eps: f64) -> String {
    format!("eps_{eps:e}")
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        // data files are relative to the config file
        if let Some(base) = path.parent() {
            for f in &mut cfg.functions {
                if let Some(d) = &f.data {
                    if d.is_relative() {
                        f.data = Some(base.join(d));
                    }
                }
            }
        }
        Ok(cfg)
    }

    pub fn engine_for(&self, dim: usize, budget: usize) -> EngineConfig {
        let o = &self.engine;
        let mut c = EngineConfig::for_dim(dim).with_budget(budget);
        c.n_init = o.n_init.unwrap_or(c.n_init);
        c.n_min = o.n_min.unwrap_or(c.n_min);
        c.memory_size = o.memory_size.unwrap_or(c.memory_size);
        c.p_best = o.p_best.unwrap_or(c.p_best);
        c.arc_rate = o.arc_rate.unwrap_or(c.arc_rate);
        c.sigma_f = o.sigma_f.unwrap_or(c.sigma_f);
        c.sigma_cr = o.sigma_cr.unwrap_or(c.sigma_cr);
        c.terminal_cr = o.terminal_cr.unwrap_or(c.terminal_cr);
        c
    }

    /// Validate everything and expand the grid. Fails before any run starts.
    pub fn plan(&self) -> Result<Vec<Group>> {
        if self.functions.is_empty() {
            return Err(Error::Config("no functions configured".into()));
        }
        if self.eps.is_empty() {
            return Err(Error::Config("no eps values configured".into()));
        }
        if let Some(e) = self.eps.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
            return Err(Error::Config(format!("eps values must be positive, got {e}")));
        }
        if self.runs == 0 {
            return Err(Error::Config("runs must be >= 1".into()));
        }
        if !(self.regime.eps_out_factor > 1.0) {
            return Err(Error::Config("regime.eps_out_factor must exceed 1".into()));
        }
        let mut groups = Vec::new();
        for f in &self.functions {
            let data = f.data.as_deref().map(ShiftRotation::from_file).transpose()?;
            let spec = objective(&f.id, f.dim, self.seed, data)?;
            let budgets = if self.budgets.is_empty() {
                vec![10_000 * f.dim]
            } else {
                self.budgets.clone()
            };
            for &b in &budgets {
                let engine = self.engine_for(f.dim, b);
                engine.validate()?;
                let mut eps = Vec::new();
                for &e in &self.eps {
                    let witness = self.witness.clone().with_eps(e);
                    witness.validate(f.dim)?;
                    let r_conc = self.regime.r_conc.unwrap_or_else(|| match &spec.morse {
                        Some(m) => r_safe(e, m.lip) / (2.0 * (witness.f_minus + witness.delta_f)),
                        None => e.sqrt(),
                    });
                    let regime = RegimeParams {
                        eps_in: e,
                        eps_out: e * self.regime.eps_out_factor,
                        r_conc,
                        m_cluster: self.regime.m_cluster,
                    };
                    regime.validate()?;
                    eps.push(EpsPlan { eps: e, dir_name: eps_dir_name(e), witness, regime });
                }
                groups.push(Group {
                    name: format!("{}_d{}_b{}", f.id, f.dim, b),
                    spec: spec.clone(),
                    engine,
                    eps,
                });
            }
        }
        let mut names: Vec<&str> = groups.iter().map(|g| g.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("duplicate (function, dim, budget) entries".into()));
        }
        Ok(groups)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = r#"
        functions = [{ id = "sphere", dim = 2 }, { id = "rastrigin", dim = 3 }]
        eps = [1e-2, 1e-4]
        runs = 3
        seed = 9
        budgets = [400]

        [engine]
        n_init = 20

        [witness]
        delta_f = 0.1
    "#;

    #[test]
    fn parses_and_plans() {
        let cfg = ExperimentConfig::from_toml(BASIC).unwrap();
        assert_eq!(cfg.runs, 3);
        assert_eq!(cfg.out_dir, PathBuf::from("out"));
        assert_eq!(cfg.witness.delta_f, 0.1);
        assert_eq!(cfg.witness.f_minus, 0.1);
        let groups = cfg.plan().unwrap();
        assert_eq!(groups.len(), 2);
        assert_eq!(groups[0].name, "sphere_d2_b400");
        assert_eq!(groups[0].engine.n_init, 20);
        assert_eq!(groups[0].engine.max_nfe, 400);
        assert_eq!(groups[1].eps[1].dir_name, "eps_1e-4");
        assert_eq!(groups[1].eps[1].witness.eps, 1e-4);
        assert_eq!(groups[0].eps[0].regime.eps_out, 0.1);
    }

    #[test]
    fn defaults() {
        let cfg = ExperimentConfig::from_toml(
            "functions = [{ id = \"ackley\", dim = 4 }]\neps = [0.5]\n",
        )
        .unwrap();
        assert_eq!(cfg.runs, 51);
        let g = cfg.plan().unwrap();
        assert_eq!(g[0].engine.max_nfe, 40_000);
        assert_eq!(g[0].eps[0].regime.r_conc, 0.5f64.sqrt());
    }

    #[test]
    fn rejects_bad_configs() {
        let bad_id = "functions = [{ id = \"nope\", dim = 2 }]\neps = [0.1]\n";
        assert!(matches!(
            ExperimentConfig::from_toml(bad_id).unwrap().plan(),
            Err(Error::UnknownObjective(_))
        ));
        let bad_eps = "functions = [{ id = \"sphere\", dim = 2 }]\neps = [0.0]\n";
        assert!(ExperimentConfig::from_toml(bad_eps).unwrap().plan().is_err());
        let zero_runs = "functions = [{ id = \"sphere\", dim = 2 }]\neps = [0.1]\nruns = 0\n";
        assert!(ExperimentConfig::from_toml(zero_runs).unwrap().plan().is_err());
        assert!(ExperimentConfig::from_toml("functions = []\neps = [0.1]\nbogus = 1\n").is_err());
        let tiny_budget = "functions = [{ id = \"sphere\", dim = 2 }]\neps = [0.1]\nbudgets = [5]\n";
        assert!(ExperimentConfig::from_toml(tiny_budget).unwrap().plan().is_err());
    }
}
