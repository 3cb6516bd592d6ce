//! Witness-stable regime detection and the stabilisation time.

use serde::{Deserialize, Serialize};

use super::floors::WitnessConfig;
use super::morse::{dist, good_slot};
use crate::engine::{AlgoState, EngineConfig};
use crate::error::{Error, Result};
use crate::objectives::ObjectiveSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeParams {
    pub eps_in: f64,
    pub eps_out: f64,
    pub r_conc: f64,
    pub m_cluster: usize,
}

impl RegimeParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps_in > 0.0 && self.eps_in < self.eps_out) {
            return Err(Error::Config(format!(
                "need 0 < eps_in < eps_out, got {} and {}",
                self.eps_in, self.eps_out
            )));
        }
        if !(self.r_conc > 0.0) {
            return Err(Error::Config("r_conc must be positive".into()));
        }
        if self.m_cluster < 4 {
            return Err(Error::Config(format!(
                "m_cluster must be >= 4, got {}",
                self.m_cluster
            )));
        }
        Ok(())
    }
}

/// G1..G5 for one state. `None` means "unknown" (no curvature data).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeFlags {
    pub g: [Option<bool>; 5],
    pub cluster_size: usize,
    /// Diameter of the `m_cluster` individuals nearest to the best.
    pub core_diameter: f64,
}

impl RegimeFlags {
    /// `Some(true)` iff every flag is known and true.
    pub fn holds(&self) -> Option<bool> {
        if self.g.iter().any(|g| *g == Some(false)) {
            return Some(false);
        }
        if self.g.iter().any(Option::is_none) {
            return None;
        }
        Some(true)
    }
}

/// Evaluate the regime conditions on `state`.
///
/// The cluster is every individual within `r_conc / 2` of the best one, so
/// its diameter never exceeds `r_conc`. G3 is judged on the `m_cluster`
/// individuals nearest to the best, so a spread-out population fails it
/// even when the cluster above degenerates to the best point alone.
pub fn detect_regime(
    state: &AlgoState,
    spec: &ObjectiveSpec,
    params: &RegimeParams,
    ecfg: &EngineConfig,
    wcfg: &WitnessConfig,
) -> RegimeFlags {
    let b = state.best_index();
    let xb = &state.population[b].x;
    let mut by_dist: Vec<(f64, usize)> = state
        .population
        .iter()
        .enumerate()
        .map(|(j, ind)| (dist(&ind.x, xb), j))
        .collect();
    by_dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let cluster: Vec<usize> = by_dist
        .iter()
        .take_while(|(d, _)| *d <= params.r_conc / 2.0)
        .map(|&(_, j)| j)
        .collect();
    let core: Vec<usize> = by_dist
        .iter()
        .take(params.m_cluster)
        .map(|&(_, j)| j)
        .collect();
    let mut core_diameter: f64 = 0.0;
    for (a, &p) in core.iter().enumerate() {
        for &q in &core[a + 1..] {
            core_diameter = core_diameter.max(dist(&state.population[p].x, &state.population[q].x));
        }
    }
    let g2 = cluster.len() >= params.m_cluster;
    let g3 = core.len() >= params.m_cluster && core_diameter <= params.r_conc;
    let local = spec.morse.as_ref().zip(spec.x_star.as_ref());
    let g1 = local.map(|(m, xs)| {
        cluster
            .iter()
            .all(|&j| dist(&state.population[j].x, xs) <= m.r0)
    });
    let g4 = local.map(|(m, xs)| {
        state.population[b].f <= spec.f_star + params.eps_out && dist(xb, xs) <= m.r0
    });
    let g5 = good_slot(state, ecfg, wcfg).is_some();
    RegimeFlags {
        g: [g1, Some(g2), Some(g3), g4, Some(g5)],
        cluster_size: cluster.len(),
        core_diameter,
    }
}

/// First `t` from which the regime holds at every recorded later step.
/// `None` stands for an infinite stabilisation time.
pub fn t_wit(holds: &[Option<bool>]) -> Option<usize> {
    let mut start = None;
    for (t, h) in holds.iter().enumerate().rev() {
        if *h == Some(true) {
            start = Some(t);
        } else {
            break;
        }
    }
    start
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::Individual;
    use crate::objectives::objective;

    fn setup(points: Vec<Vec<f64>>, spec: &ObjectiveSpec) -> AlgoState {
        let pop = points
            .into_iter()
            .map(|x| {
                let f = spec.eval(&x);
                Individual { x, f }
            })
            .collect();
        AlgoState::new(pop, 6, 0)
    }

    fn params() -> RegimeParams {
        RegimeParams {
            eps_in: 1e-2,
            eps_out: 1e-1,
            r_conc: 0.05,
            m_cluster: 4,
        }
    }

    #[test]
    fn collapsed_population_satisfies_everything() {
        let spec = objective("sphere", 3, 1, None).unwrap();
        let xs = spec.x_star.clone().unwrap();
        let state = setup(vec![xs; 8], &spec);
        let ecfg = EngineConfig::for_dim(3);
        let wcfg = WitnessConfig { g_minus: 0.01, q_minus: 0.1, ..WitnessConfig::default() };
        let flags = detect_regime(&state, &spec, &params(), &ecfg, &wcfg);
        assert_eq!(flags.holds(), Some(true), "{flags:?}");
        assert_eq!(flags.cluster_size, 8);
    }

    #[test]
    fn spread_population_fails_concentration() {
        let spec = objective("sphere", 2, 1, None).unwrap();
        let pts = (0..10).map(|k| vec![-90.0 + 18.0 * k as f64, 0.0]).collect();
        let state = setup(pts, &spec);
        let flags = detect_regime(&state, &spec, &params(), &EngineConfig::for_dim(2), &WitnessConfig::default());
        assert_eq!(flags.g[2], Some(false));
        assert_eq!(flags.g[1], Some(false));
        assert_eq!(flags.holds(), Some(false));
    }

    #[test]
    fn unknown_without_curvature_data() {
        let spec = objective("ackley", 2, 1, None).unwrap();
        let xs = spec.x_star.clone().unwrap();
        let state = setup(vec![xs; 6], &spec);
        let flags = detect_regime(&state, &spec, &params(), &EngineConfig::for_dim(2), &WitnessConfig::default());
        assert_eq!(flags.g[0], None);
        assert_eq!(flags.g[3], None);
        assert_eq!(flags.holds(), None);
    }

    #[test]
    fn stabilisation_time() {
        let mut series = vec![Some(false); 17];
        series[5] = Some(true);
        series.extend(vec![Some(true); 10]);
        assert_eq!(t_wit(&series), Some(17));
        assert_eq!(t_wit(&[Some(true), Some(false)]), None);
        assert_eq!(t_wit(&[Some(true); 3]), Some(0));
        assert_eq!(t_wit(&[]), None);
        assert_eq!(t_wit(&[Some(true), None]), None);
    }

    #[test]
    fn params_validation() {
        assert!(params().validate().is_ok());
        assert!(RegimeParams { m_cluster: 3, ..params() }.validate().is_err());
        assert!(RegimeParams { eps_out: 1e-3, ..params() }.validate().is_err());
    }
}
