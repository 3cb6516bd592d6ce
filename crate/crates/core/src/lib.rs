//! L-SHADE with first-hitting-time instrumentation.
//!
//! The crate is organised bottom-up:
//!
//! * [`objectives`] benchmark functions with known optima and local curvature data,
//! * [`engine`] a seeded, replayable L-SHADE,
//! * [`witness`] witness events and certified hazard floors,
//! * [`survival`] hitting times, tail envelopes and Kaplan–Meier estimation,
//! * [`harness`] batch experiments, logs and report tables.

pub mod engine;
pub mod error;
pub mod harness;
pub mod objectives;
pub mod rng;
pub mod survival;
pub mod witness;

pub use error::{Error, Result};
