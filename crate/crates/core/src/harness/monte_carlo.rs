use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CatError, Result};
use crate::strategy::{run_to_completion, StrategyKind};
use crate::subject::AbilityProfile;

/// Aggregate of repeated runs against a noisy subject.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloSummary {
    pub strategy: StrategyKind,
    pub runs: usize,
    /// `found_counts[p]` runs ended with threshold `p`.
    pub found_counts: Vec<usize>,
    pub mean_negatives: f64,
    pub mean_total: f64,
}

impl MonteCarloSummary {
    /// Most frequent found threshold; the smallest one on ties.
    pub fn modal_found(&self) -> usize {
        let max = self.found_counts.iter().copied().max().unwrap_or(0);
        self.found_counts
            .iter()
            .position(|&c| c == max)
            .unwrap_or(0)
    }
}

/// Session name of run `index`; probe streams are keyed by
/// `(master_seed, this name, probe number)`.
fn run_session(index: usize) -> String {
    format!("mc-{index}")
}

pub fn monte_carlo(
    strategy: StrategyKind,
    profile: &AbilityProfile,
    runs: usize,
    master_seed: u64,
) -> Result<MonteCarloSummary> {
    if runs == 0 {
        return Err(CatError::InvalidArgument("runs must be at least 1".into()));
    }
    let n = profile.domain_size().ok_or(CatError::ExternalProfile)?;
    let results = (0..runs)
        .into_par_iter()
        .map(|i| run_to_completion(strategy, n, profile, master_seed, &run_session(i)))
        .collect::<Result<Vec<_>>>()?;

    let mut found_counts = vec![0; n + 1];
    let (mut negatives, mut total) = (0usize, 0usize);
    for r in &results {
        found_counts[r.found_p] += 1;
        negatives += r.trace.negatives();
        total += r.trace.len();
    }
    Ok(MonteCarloSummary {
        strategy,
        runs,
        found_counts,
        mean_negatives: negatives as f64 / runs as f64,
        mean_total: total as f64 / runs as f64,
    })
}
