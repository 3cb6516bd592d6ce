use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

// Guards floor/ceil against representation error such as 2.3 * 100 = 229.99999999999997.
const ROUND_SLACK: f64 = 1e-9;

/// Algorithm parameters. Use [`EngineConfig::for_dim`] for the usual defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub n_init: usize,
    pub n_min: usize,
    pub memory_size: usize,
    pub p_best: f64,
    pub arc_rate: f64,
    pub sigma_f: f64,
    pub sigma_cr: f64,
    pub max_nfe: usize,
    pub seed: u64,
    /// Freeze a CR memory slot at a terminal value once every successful CR
    /// in an update was zero. Off by default.
    pub terminal_cr: bool,
}

impl EngineConfig {
    pub fn for_dim(dim: usize) -> Self {
        Self {
            n_init: 18 * dim,
            n_min: 4,
            memory_size: 6,
            p_best: 0.11,
            arc_rate: 2.6,
            sigma_f: 0.1,
            sigma_cr: 0.1,
            max_nfe: 10_000 * dim,
            seed: 0,
            terminal_cr: false,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_budget(mut self, max_nfe: usize) -> Self {
        self.max_nfe = max_nfe;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.n_min < 4 {
            return fail(format!("n_min must be >= 4, got {}", self.n_min));
        }
        if self.n_init < self.n_min {
            return fail(format!(
                "n_init ({}) must be >= n_min ({})",
                self.n_init, self.n_min
            ));
        }
        if self.memory_size == 0 {
            return fail("memory_size must be >= 1".into());
        }
        if !(self.p_best > 0.0 && self.p_best <= 1.0) {
            return fail(format!("p_best must lie in (0, 1], got {}", self.p_best));
        }
        if !(self.arc_rate >= 0.0) || !self.arc_rate.is_finite() {
            return fail(format!("arc_rate must be >= 0, got {}", self.arc_rate));
        }
        if !(self.sigma_f > 0.0) || !(self.sigma_cr > 0.0) {
            return fail("sigma_f and sigma_cr must be positive".into());
        }
        if self.max_nfe < self.n_init {
            return fail(format!(
                "max_nfe ({}) must cover the initial population ({})",
                self.max_nfe, self.n_init
            ));
        }
        Ok(())
    }

    /// `floor(arc_rate * N_init)`.
    pub fn archive_capacity(&self) -> usize {
        (self.arc_rate * self.n_init as f64 + ROUND_SLACK).floor() as usize
    }

    /// LPSR target size after `nfe` evaluations.
    pub fn lpsr_size(&self, nfe: usize) -> usize {
        let frac = nfe.min(self.max_nfe) as f64 / self.max_nfe as f64;
        let n = self.n_init as f64 + (self.n_min as f64 - self.n_init as f64) * frac;
        (n.round() as usize).clamp(self.n_min, self.n_init)
    }

    /// `max(1, ceil(p N))`.
    pub fn pbest_count(&self, n: usize) -> usize {
        pbest_count(self.p_best, n)
    }
}

/// `max(1, ceil(p N))`, the p-best set size.
pub fn pbest_count(p: f64, n: usize) -> usize {
    ((p * n as f64 - ROUND_SLACK).ceil() as usize).clamp(1, n.max(1))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Individual {
    pub x: Vec<f64>,
    pub f: f64,
}

/// Second donor: a population member or an archived parent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Donor {
    Pop(usize),
    Archive(usize),
}

/// Full algorithm state after a generation.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgoState {
    pub population: Vec<Individual>,
    pub archive: Vec<Vec<f64>>,
    pub archive_cap: usize,
    pub mem_f: Vec<f64>,
    pub mem_cr: Vec<f64>,
    /// Slots frozen at the terminal CR value (only with `terminal_cr`).
    pub cr_terminal: Vec<bool>,
    pub slot_ptr: usize,
    pub nfe: usize,
    pub gen: usize,
}

impl AlgoState {
    /// State with the given population and fresh memories.
    pub fn new(population: Vec<Individual>, memory_size: usize, archive_cap: usize) -> Self {
        let nfe = population.len();
        Self {
            population,
            archive: Vec::new(),
            archive_cap,
            mem_f: vec![0.5; memory_size],
            mem_cr: vec![0.5; memory_size],
            cr_terminal: vec![false; memory_size],
            slot_ptr: 0,
            nfe,
            gen: 0,
        }
    }

    pub fn n(&self) -> usize {
        self.population.len()
    }

    pub fn memory_size(&self) -> usize {
        self.mem_f.len()
    }

    /// Population indices sorted by `(f, index)`.
    pub fn ranking(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.n()).collect();
        idx.sort_by(|&a, &b| {
            self.population[a]
                .f
                .total_cmp(&self.population[b].f)
                .then(a.cmp(&b))
        });
        idx
    }

    pub fn best_index(&self) -> usize {
        (0..self.n())
            .min_by(|&a, &b| {
                self.population[a]
                    .f
                    .total_cmp(&self.population[b].f)
                    .then(a.cmp(&b))
            })
            .expect("population is never empty")
    }

    pub fn best_f(&self) -> f64 {
        self.population[self.best_index()].f
    }

    /// The p-best set: the `max(1, ceil(p N))` best indices.
    pub fn pbest(&self, p: f64) -> Vec<usize> {
        let mut r = self.ranking();
        r.truncate(pbest_count(p, self.n()));
        r
    }

    pub fn donor(&self, d: Donor) -> &[f64] {
        match d {
            Donor::Pop(i) => &self.population[i].x,
            Donor::Archive(a) => &self.archive[a],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_validation() {
        let c = EngineConfig::for_dim(10);
        assert_eq!((c.n_init, c.n_min, c.memory_size, c.max_nfe), (180, 4, 6, 100_000));
        c.validate().unwrap();
        let mut bad = c.clone();
        bad.n_min = 3;
        assert!(bad.validate().is_err());
        let mut bad = c.clone();
        bad.p_best = 0.0;
        assert!(bad.validate().is_err());
        let mut bad = c;
        bad.max_nfe = 10;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn pbest_size_examples() {
        assert_eq!(pbest_count(0.11, 180), 20);
        assert_eq!(pbest_count(0.1, 30), 3);
        assert_eq!(pbest_count(0.11, 4), 1);
        assert_eq!(pbest_count(1.0, 7), 7);
    }

    #[test]
    fn archive_capacity_floor() {
        let mut c = EngineConfig::for_dim(10);
        assert_eq!(c.archive_capacity(), 468);
        c.arc_rate = 2.3;
        c.n_init = 100;
        assert_eq!(c.archive_capacity(), 230);
        c.arc_rate = 0.0;
        assert_eq!(c.archive_capacity(), 0);
    }

    #[test]
    fn lpsr_schedule() {
        let mut c = EngineConfig::for_dim(1);
        c.n_init = 18;
        c.max_nfe = 1000;
        assert_eq!(c.lpsr_size(0), 18);
        assert_eq!(c.lpsr_size(500), 11);
        assert_eq!(c.lpsr_size(1000), 4);
        assert_eq!(c.lpsr_size(5000), 4);
    }

    #[test]
    fn ranking_breaks_ties_by_index() {
        let pop = [3.0, 1.0, 1.0, 0.5]
            .iter()
            .map(|&f| Individual { x: vec![0.0], f })
            .collect();
        let s = AlgoState::new(pop, 2, 0);
        assert_eq!(s.ranking(), vec![3, 1, 2, 0]);
        assert_eq!(s.best_index(), 3);
        assert_eq!(s.pbest(0.5), vec![3, 1]);
    }
}
