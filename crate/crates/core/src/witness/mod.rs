//! Witness events, certified hazard floors and regime detection.

mod floors;
mod morse;
mod regime;
mod report;

pub use floors::{
    cauchy_density_inf, combinatorial_prefactor, cr_tail, eta_r, hazard_floor_a, median_r,
    success_f_interval, Measured, WitnessConfig,
};
pub use morse::{
    c_pair_bound, crossover_stable_check, delta_max, donor_pair_good, gamma0, morse_check,
    morse_hazard_floor, r_safe, strong_convex_interval, theta_minus, verify_noisy_descent,
    MorseCheck, NoisyDescent, EXHAUSTIVE_MAX_DIM,
};
pub use regime::{detect_regime, t_wit, RegimeFlags, RegimeParams};
pub use report::{evaluate_witness, floor_pools, WitnessReport, WitnessTuple};
