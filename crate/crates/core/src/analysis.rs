//! Frustration accounting and the orders used to compare strategies.
//!
//! A run is scored by its [`FrustrationMeasure`]: how many probes the subject
//! failed and how many probes were presented in total. Lower is better on
//! both axes, so strategies are only partially ordered.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::strategy::{run_deterministic, RunTrace, StrategyKind};

/// Failed probes and total probes of one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct FrustrationMeasure {
    pub negatives: usize,
    pub total: usize,
}

impl FrustrationMeasure {
    pub fn new(negatives: usize, total: usize) -> Self {
        debug_assert!(negatives <= total);
        Self { negatives, total }
    }

    /// Componentwise `>=`.
    pub fn covers(&self, other: &Self) -> bool {
        self.negatives >= other.negatives && self.total >= other.total
    }
}

impl fmt::Display for FrustrationMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.negatives, self.total)
    }
}

pub fn measure(trace: &RunTrace) -> FrustrationMeasure {
    FrustrationMeasure::new(trace.negatives(), trace.len())
}

/// Three-way comparison of two runs, taken clause by clause from the
/// original definition.
///
/// Note this relation is not symmetric: `(1, 5)` is more fun than `(2, 6)`,
/// yet `(2, 6)` is not less fun than `(1, 5)` because neither component ties.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FunRelation {
    MoreFun,
    LessFun,
    NonComparable,
}

pub fn fun_relation(a: FrustrationMeasure, b: FrustrationMeasure) -> FunRelation {
    if a.negatives < b.negatives && a.total < b.total {
        FunRelation::MoreFun
    } else if (a.negatives > b.negatives && a.total == b.total)
        || (a.total > b.total && a.negatives == b.negatives)
    {
        FunRelation::LessFun
    } else {
        FunRelation::NonComparable
    }
}

/// Pareto dominance: `a <= b` componentwise with at least one strict `<`.
pub fn dominates(a: FrustrationMeasure, b: FrustrationMeasure) -> bool {
    b.covers(&a) && a != b
}

/// Non-dominated points, ordered by strategy (stable for equal kinds).
pub fn pareto_front(
    points: &[(StrategyKind, FrustrationMeasure)],
) -> Vec<(StrategyKind, FrustrationMeasure)> {
    let mut front: Vec<_> = points
        .iter()
        .filter(|(_, m)| !points.iter().any(|(_, other)| dominates(*other, *m)))
        .copied()
        .collect();
    front.sort_by_key(|(kind, _)| *kind);
    front
}

pub fn popcount(p: usize) -> u32 {
    p.count_ones()
}

/// Zero bits strictly below the most significant set bit; 0 for `p = 0`.
pub fn zeroes_below_msb(p: usize) -> u32 {
    if p == 0 {
        0
    } else {
        (usize::BITS - p.leading_zeros()) - p.count_ones()
    }
}

/// Reference closed form of a strategy's measure, as real numbers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictedCurve {
    pub strategy: StrategyKind,
    pub negatives_pred: f64,
    pub total_pred: f64,
}

fn log2_or_zero(x: usize) -> f64 {
    if x == 0 {
        0.0
    } else {
        (x as f64).log2()
    }
}

/// Published closed forms for each strategy, in base-2 logarithms.
///
/// Sequential is `(1, p - 1)`, Binary `(log n, 1 + log n)`, Doubling
/// `(1 + log p, 1 + 2 log p)`, Fun `(ones(p), 1 + 2 log p)` and Frustrating
/// `(zeroes(p), 1 + 2 log p)`. Terms are floored at zero.
pub fn predicted(strategy: StrategyKind, n: usize, p: usize) -> PredictedCurve {
    let log_n = log2_or_zero(n);
    let log_p = log2_or_zero(p);
    let (negatives_pred, total_pred) = match strategy {
        StrategyKind::Sequential => (1.0, (p as f64 - 1.0).max(0.0)),
        StrategyKind::Binary => (log_n, 1.0 + log_n),
        StrategyKind::Doubling => (1.0 + log_p, 1.0 + 2.0 * log_p),
        StrategyKind::Fun => (f64::from(popcount(p)), 1.0 + 2.0 * log_p),
        StrategyKind::Frustrating => (f64::from(zeroes_below_msb(p)), 1.0 + 2.0 * log_p),
    };
    PredictedCurve {
        strategy,
        negatives_pred,
        total_pred,
    }
}

/// Fewest probes any correct search must present on instance `(n, p)`.
///
/// A correct answer needs a witnessed pass at `p` (when `p >= 1`) and a
/// witnessed fail at `p + 1` (when `p < n`).
pub fn instance_lower_bound(n: usize, p: usize) -> FrustrationMeasure {
    let needs_fail = usize::from(p < n);
    let needs_pass = usize::from(p >= 1);
    FrustrationMeasure::new(needs_fail, needs_pass + needs_fail)
}

/// Worst per-instance ratio of a strategy against the best of the family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimalityRatio {
    pub negatives: f64,
    pub negatives_argmax: usize,
    pub total: f64,
    pub total_argmax: usize,
}

/// Per-instance best measure over all five strategies, floored by
/// [`instance_lower_bound`], for every `p` in `0..=n`.
pub fn best_measures(n: usize) -> Result<Vec<FrustrationMeasure>> {
    let per_kind = StrategyKind::ALL
        .iter()
        .map(|&kind| measures_for(kind, n))
        .collect::<Result<Vec<_>>>()?;
    Ok((0..=n)
        .map(|p| {
            let lb = instance_lower_bound(n, p);
            let negatives = per_kind.iter().map(|m| m[p].negatives).min().unwrap_or(0);
            let total = per_kind.iter().map(|m| m[p].total).min().unwrap_or(0);
            FrustrationMeasure::new(negatives.max(lb.negatives), total.max(lb.total))
        })
        .collect())
}

/// Measures of `kind` against every deterministic subject on `n` levels.
pub fn measures_for(kind: StrategyKind, n: usize) -> Result<Vec<FrustrationMeasure>> {
    (0..=n)
        .map(|p| run_deterministic(kind, n, p).map(|r| measure(&r.trace)))
        .collect()
}

/// How far `strategy` is from the best implemented strategy on its worst
/// instance, separately for negatives and totals.
///
/// The reference is the per-`p` minimum across the five strategies, never
/// below the certification bound. Ratios divide by `max(1, best)`.
pub fn optimality_ratio(strategy: StrategyKind, n: usize) -> Result<OptimalityRatio> {
    let best = best_measures(n)?;
    let own = measures_for(strategy, n)?;
    Ok(ratio_against(&own, &best))
}

pub(crate) fn ratio_against(
    own: &[FrustrationMeasure],
    best: &[FrustrationMeasure],
) -> OptimalityRatio {
    let ratio = |num: usize, den: usize| num as f64 / den.max(1) as f64;
    let mut out = OptimalityRatio {
        negatives: 0.0,
        negatives_argmax: 0,
        total: 0.0,
        total_argmax: 0,
    };
    for (p, (m, b)) in own.iter().zip(best).enumerate() {
        let neg = ratio(m.negatives, b.negatives);
        if neg > out.negatives {
            out.negatives = neg;
            out.negatives_argmax = p;
        }
        let tot = ratio(m.total, b.total);
        if tot > out.total {
            out.total = tot;
            out.total_argmax = p;
        }
    }
    out
}
