use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{instance_lower_bound, measure, predicted};
use crate::error::{CatError, Result};
use crate::strategy::{run_deterministic, StrategyKind};

/// Empirical and reference measures of one strategy on one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: usize,
    pub p: usize,
    pub strategy: StrategyKind,
    pub negatives: usize,
    pub total: usize,
    pub predicted_negatives: f64,
    pub predicted_total: f64,
    #[serde(rename = "lb_negatives")]
    pub lower_bound_negatives: usize,
    #[serde(rename = "lb_total")]
    pub lower_bound_total: usize,
}

impl SweepRow {
    pub fn compute(strategy: StrategyKind, n: usize, p: usize) -> Result<Self> {
        let run = run_deterministic(strategy, n, p)?;
        let m = measure(&run.trace);
        let pred = predicted(strategy, n, p);
        let lb = instance_lower_bound(n, p);
        Ok(Self {
            n,
            p,
            strategy,
            negatives: m.negatives,
            total: m.total,
            predicted_negatives: pred.negatives_pred,
            predicted_total: pred.total_pred,
            lower_bound_negatives: lb.negatives,
            lower_bound_total: lb.total,
        })
    }
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        Err(CatError::EmptyDomain)
    } else {
        Ok(())
    }
}

/// One row per `p` in `0..=n`.
pub fn sweep(strategy: StrategyKind, n: usize) -> Result<Vec<SweepRow>> {
    check_n(n)?;
    (0..=n).map(|p| SweepRow::compute(strategy, n, p)).collect()
}

/// Serial sweep over several strategies, rows ordered by (strategy, p).
pub fn sweep_many(strategies: &[StrategyKind], n: usize) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::with_capacity(strategies.len() * (n + 1));
    for &kind in strategies {
        rows.extend(sweep(kind, n)?);
    }
    rows.sort_by_key(|r| (r.strategy, r.p));
    Ok(rows)
}

/// Same rows as [`sweep_many`], computed cell by cell on the rayon pool.
pub fn sweep_parallel(strategies: &[StrategyKind], n: usize) -> Result<Vec<SweepRow>> {
    check_n(n)?;
    let cells: Vec<_> = strategies
        .iter()
        .flat_map(|&kind| (0..=n).map(move |p| (kind, p)))
        .collect();
    let mut rows = cells
        .into_par_iter()
        .map(|(kind, p)| SweepRow::compute(kind, n, p))
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by_key(|r| (r.strategy, r.p));
    Ok(rows)
}
