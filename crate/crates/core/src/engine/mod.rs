//! Seeded L-SHADE (current-to-pbest/1, binomial crossover, archive,
//! success-history adaptation and linear population size reduction).

mod ops;
mod run;
mod state;

pub use ops::{
    boundary_repair, clip_cr, crossover, lehmer_mean, mutate, sample_cr, sample_f,
    sample_f_from_uniforms, select_indices, truncate_f, Crossover, Selection, F_RETRY_CAP,
};
pub use run::{
    run, run_observed, step_generation, GenSummary, GenerationRecord, Observer, RunTrace,
    TrialRecord,
};
pub use state::{pbest_count, AlgoState, Donor, EngineConfig, Individual};
