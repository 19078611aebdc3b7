//! Adaptive difficulty search.
//!
//! A subject passes every difficulty level up to some unknown threshold `p`
//! and fails the rest. The strategies in [`strategy`] locate `p` by asking
//! one level at a time; [`analysis`] scores each run by the pair
//! (failed probes, total probes) and compares strategies on it; [`harness`]
//! runs exhaustive sweeps, property checks and seeded Monte Carlo studies.

pub mod analysis;
pub mod error;
pub mod harness;
pub mod strategy;
pub mod subject;

pub use analysis::{FrustrationMeasure, FunRelation};
pub use error::{CatError, Result};
pub use strategy::{
    run_deterministic, run_to_completion, RunTrace, SearchDriver, SearchResult, SearchSession,
    StateMachineDriver, Status, StrategyKind,
};
pub use subject::{AbilityProfile, DifficultyLevel, Outcome, ProbeRecord, StreamKey};
