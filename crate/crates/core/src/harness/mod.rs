//! Sweeps, property verification, Monte Carlo runs and CSV emission.

mod monte_carlo;
mod report;
mod sweep;
mod verify;

pub use monte_carlo::{monte_carlo, MonteCarloSummary};
pub use report::{
    dominance_rows, read_sweep_csv, write_dominance_csv, write_sweep_csv, write_sweep_to,
    DominanceRow, SWEEP_HEADER,
};
pub use sweep::{sweep, sweep_many, sweep_parallel, SweepRow};
pub use verify::{verify, verify_with, Counterexample, PropertyCheck, VerifyReport};
