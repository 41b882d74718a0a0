//! Broadcast control (BC) and pseudo-perturbation broadcast control (PBC) of
//! multi-agent systems.
//!
//! The crate provides the two control laws as pure step functions, the
//! coverage / rendezvous / assignment objectives behind a barrier wrapper, a
//! deterministic Monte Carlo engine driven by a counter-based sign stream, and
//! exhaustive-enumeration oracles for the estimator and the per-step
//! comparison results between the laws.
//!
//! All numerical code is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the scalar to `f64`, which is what the configuration and file
//! outputs use.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod controllers;
pub mod engine;
pub mod gains;
pub mod objectives;
pub mod oracle;
pub mod output;
pub mod rng;
pub mod scalar;
pub mod state;
pub mod verify;

pub use scalar::Real;

pub type CollectiveState = state::CollectiveState<f64>;
pub type CollectiveState32 = state::CollectiveState<f32>;
pub type GainSchedule = gains::GainSchedule<f64>;
pub type GainSchedule32 = gains::GainSchedule<f32>;
pub type ObjectiveSpec = objectives::ObjectiveSpec<f64>;
pub type ObjectiveSpec32 = objectives::ObjectiveSpec<f32>;
pub type Scenario = engine::Scenario<f64>;
pub type TrialRecord = engine::TrialRecord<f64>;
pub type SummaryStats = engine::SummaryStats<f64>;
