//! Exhaustive and randomized checks of the strategy and analysis laws.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{
    dominates, fun_relation, instance_lower_bound, measure, popcount, predicted, ratio_against,
    FrustrationMeasure, FunRelation,
};
use crate::error::{CatError, Result};
use crate::strategy::{
    RunTrace, SearchDriver, SearchResult, SearchSession, StateMachineDriver, StrategyKind,
};
use crate::subject::answer_deterministic;

/// Exhaustive correctness sweeps stop at this domain size.
const CORRECTNESS_N_MAX: usize = 512;
/// The popcount law is checked on powers of two up to this size.
const POPCOUNT_N_MAX: usize = 1 << 12;
const SEPARATION_K_MAX: u32 = 11;
const ORDER_TRIPLES: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counterexample {
    pub strategy: Option<StrategyKind>,
    pub n: usize,
    pub p: usize,
    pub detail: String,
    pub trace: Option<RunTrace>,
}

impl fmt::Display for Counterexample {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(kind) = self.strategy {
            write!(f, "{kind} ")?;
        }
        write!(f, "n={} p={}: {}", self.n, self.p, self.detail)?;
        if let Some(trace) = &self.trace {
            write!(f, " [trace: {trace}]")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PropertyCheck {
    pub name: String,
    pub passed: bool,
    pub cases: usize,
    pub counterexample: Option<Counterexample>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub n_max: usize,
    pub checks: Vec<PropertyCheck>,
    pub passed: bool,
}

impl VerifyReport {
    pub fn check(&self, name: &str) -> Option<&PropertyCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            let mark = if c.passed { "PASS" } else { "FAIL" };
            write!(f, "{mark} {} ({} cases)", c.name, c.cases)?;
            if let Some(cx) = &c.counterexample {
                write!(f, ": {cx}")?;
            }
            writeln!(f)?;
        }
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        writeln!(
            f,
            "{verdict} overall: {}/{} properties hold (n_max = {})",
            self.checks.iter().filter(|c| c.passed).count(),
            self.checks.len(),
            self.n_max
        )
    }
}

type Case = (StrategyKind, usize, usize);

fn cx(
    kind: StrategyKind,
    n: usize,
    p: usize,
    detail: String,
    trace: Option<&RunTrace>,
) -> Counterexample {
    Counterexample {
        strategy: Some(kind),
        n,
        p,
        detail,
        trace: trace.cloned(),
    }
}

/// Run `law` on every case through `driver`, reporting the first failure.
fn run_cases<D, F>(driver: &D, name: &str, cases: Vec<Case>, law: F) -> PropertyCheck
where
    D: SearchDriver + ?Sized,
    F: Fn(Case, &SearchResult) -> std::result::Result<(), String> + Sync,
{
    let count = cases.len();
    let failure =
        cases
            .into_par_iter()
            .find_map_first(|case @ (kind, n, p)| match driver.run(kind, n, p) {
                Ok(result) => law(case, &result)
                    .err()
                    .map(|d| cx(kind, n, p, d, Some(&result.trace))),
                Err(e) => Some(cx(kind, n, p, format!("driver error: {e}"), None)),
            });
    PropertyCheck {
        name: name.to_string(),
        passed: failure.is_none(),
        cases: count,
        counterexample: failure,
    }
}

fn all_instances(kinds: &[StrategyKind], ns: impl Iterator<Item = usize> + Clone) -> Vec<Case> {
    kinds
        .iter()
        .flat_map(|&k| {
            ns.clone()
                .flat_map(move |n| (0..=n).map(move |p| (k, n, p)))
        })
        .collect()
}

fn floor_log2(x: usize) -> u32 {
    usize::BITS - 1 - x.max(1).leading_zeros()
}

fn ceil_log2(x: usize) -> u32 {
    if x <= 1 {
        0
    } else {
        floor_log2(x - 1) + 1
    }
}

/// Probe cap used by the termination check.
pub(crate) fn probe_cap(kind: StrategyKind, n: usize) -> usize {
    match kind {
        StrategyKind::Sequential => n + 1,
        _ => {
            let l = floor_log2(n) as usize + 2;
            4 * l * l
        }
    }
}

/// Verify every law with the production strategies.
pub fn verify(n_max: usize) -> Result<VerifyReport> {
    verify_with(&StateMachineDriver, n_max)
}

/// Verify every law with `driver` standing in for the strategies.
///
/// Exhaustive correctness covers `n <= min(n_max, 512)`; the Binary bound
/// covers every `n <= n_max`; the popcount law covers powers of two up to
/// `min(n_max, 4096)`; the separation families use `k` up to
/// `min(11, log2(n_max) - 1)`.
pub fn verify_with<D: SearchDriver + ?Sized>(driver: &D, n_max: usize) -> Result<VerifyReport> {
    if n_max < 16 {
        return Err(CatError::InvalidArgument(format!(
            "n_max must be at least 16, got {n_max}"
        )));
    }
    let small = 1..=n_max.min(CORRECTNESS_N_MAX);
    let kinds = &StrategyKind::ALL;
    let mut checks = Vec::new();

    checks.push(run_cases(
        driver,
        "correctness",
        all_instances(kinds, small.clone()),
        |(_, _, p), r| {
            if r.found_p == p {
                Ok(())
            } else {
                Err(format!("found {} instead of {p}", r.found_p))
            }
        },
    ));

    checks.push(run_cases(
        driver,
        "probes_within_domain",
        all_instances(kinds, small.clone()),
        |(_, n, _), r| match r.trace.records().iter().find(|rec| {
            let l = rec.level.get();
            l == 0 || l > n
        }) {
            Some(rec) => Err(format!("probe #{} at level {}", rec.seq, rec.level)),
            None => Ok(()),
        },
    ));

    checks.push(run_cases(
        driver,
        "termination_bound",
        all_instances(kinds, small.clone()),
        |(kind, n, _), r| {
            let cap = probe_cap(kind, n);
            if r.trace.len() <= cap {
                Ok(())
            } else {
                Err(format!("{} probes exceed cap {cap}", r.trace.len()))
            }
        },
    ));

    checks.push(run_cases(
        driver,
        "trace_accounting",
        all_instances(kinds, small.clone()),
        |_, r| {
            let seqs_ok = r
                .trace
                .records()
                .iter()
                .enumerate()
                .all(|(i, rec)| rec.seq == i + 1);
            if !seqs_ok {
                return Err("sequence numbers are not 1..T".into());
            }
            if r.trace.negatives() + r.trace.positives() != r.trace.len() {
                return Err("negatives + positives != total".into());
            }
            Ok(())
        },
    ));

    checks.push(run_cases(
        driver,
        "lower_bound_respected",
        all_instances(kinds, small.clone()),
        |(_, n, p), r| {
            let m = measure(&r.trace);
            let lb = instance_lower_bound(n, p);
            if m.covers(&lb) {
                Ok(())
            } else {
                Err(format!("measure {m} below certification bound {lb}"))
            }
        },
    ));

    checks.push(interval_narrowing(small.clone()));

    checks.push(run_cases(
        driver,
        "sequential_law",
        all_instances(
            &[StrategyKind::Sequential],
            small.clone().chain(std::iter::once(n_max)),
        ),
        |(_, n, p), r| {
            let want = FrustrationMeasure::new(usize::from(p < n), (p + 1).min(n));
            let got = measure(&r.trace);
            if got == want {
                Ok(())
            } else {
                Err(format!("measure {got}, expected {want}"))
            }
        },
    ));

    checks.push(run_cases(
        driver,
        "sequential_prediction_negatives",
        all_instances(&[StrategyKind::Sequential], small.clone())
            .into_iter()
            .filter(|&(_, n, p)| p >= 1 && p < n)
            .collect(),
        |(kind, n, p), r| {
            let pred = predicted(kind, n, p).negatives_pred;
            if pred == r.trace.negatives() as f64 {
                Ok(())
            } else {
                Err(format!(
                    "{} negatives, predicted {pred}",
                    r.trace.negatives()
                ))
            }
        },
    ));

    checks.push(run_cases(
        driver,
        "binary_total_bound",
        all_instances(&[StrategyKind::Binary], 1..=n_max),
        |(_, n, _), r| {
            let cap = ceil_log2(n + 1) as usize;
            if r.trace.len() > cap {
                Err(format!(
                    "{} probes exceed ceil(log2(n+1)) = {cap}",
                    r.trace.len()
                ))
            } else {
                Ok(())
            }
        },
    ));

    let popcount_ns: Vec<usize> = (1..=12)
        .map(|e| 1usize << e)
        .filter(|&n| n <= n_max.min(POPCOUNT_N_MAX))
        .collect();
    checks.push(run_cases(
        driver,
        "fun_popcount_law",
        popcount_ns
            .iter()
            .flat_map(|&n| (0..n).map(move |p| (StrategyKind::Fun, n, p)))
            .collect(),
        |(_, _, p), r| {
            let want = popcount(p) as usize + usize::from(p % 2 == 0);
            if r.trace.negatives() == want {
                Ok(())
            } else {
                Err(format!(
                    "{} negatives, law gives {want}",
                    r.trace.negatives()
                ))
            }
        },
    ));

    let k_max = SEPARATION_K_MAX.min(floor_log2(n_max).saturating_sub(1));
    checks.push(separation(driver, "separation_all_ones", k_max, |k| {
        let p = (1usize << k) - 1;
        (
            1usize << (k + 1),
            p,
            Box::new(move |fun, fru| fun == k as usize && fru == 1),
        )
    }));
    checks.push(separation(driver, "separation_power_of_two", k_max, |k| {
        let p = 1usize << k;
        (
            1usize << (k + 2),
            p,
            Box::new(move |fun, fru| fun == 2 && fru >= k as usize),
        )
    }));

    checks.push(non_optimality(driver, n_max)?);
    checks.extend(order_laws());

    let passed = checks.iter().all(|c| c.passed);
    Ok(VerifyReport {
        n_max,
        checks,
        passed,
    })
}

type SeparationLaw = Box<dyn Fn(usize, usize) -> bool>;

fn separation<D, F>(driver: &D, name: &str, k_max: u32, instance: F) -> PropertyCheck
where
    D: SearchDriver + ?Sized,
    F: Fn(u32) -> (usize, usize, SeparationLaw),
{
    let mut cases = 0;
    let mut failure = None;
    for k in 2..=k_max {
        let (n, p, law) = instance(k);
        cases += 1;
        let runs = (
            driver.run(StrategyKind::Fun, n, p),
            driver.run(StrategyKind::Frustrating, n, p),
        );
        let outcome = match runs {
            (Ok(fun), Ok(fru)) => {
                let (a, b) = (fun.trace.negatives(), fru.trace.negatives());
                (!law(a, b)).then(|| Counterexample {
                    strategy: None,
                    n,
                    p,
                    detail: format!("k={k}: fun negatives {a}, frustrating negatives {b}"),
                    trace: None,
                })
            }
            (Err(e), _) | (_, Err(e)) => Some(Counterexample {
                strategy: None,
                n,
                p,
                detail: format!("driver error: {e}"),
                trace: None,
            }),
        };
        if outcome.is_some() {
            failure = outcome;
            break;
        }
    }
    PropertyCheck {
        name: name.to_string(),
        passed: failure.is_none(),
        cases,
        counterexample: failure,
    }
}

/// Fun and Frustrating each lose to the family best by a factor that grows
/// with `log2 n` on some instance.
fn non_optimality<D: SearchDriver + ?Sized>(driver: &D, n_max: usize) -> Result<PropertyCheck> {
    let n = n_max;
    let m = floor_log2(n) as f64;
    let measures = |kind| -> Result<Vec<FrustrationMeasure>> {
        (0..=n)
            .into_par_iter()
            .map(|p| driver.run(kind, n, p).map(|r| measure(&r.trace)))
            .collect()
    };
    let per_kind = StrategyKind::ALL
        .iter()
        .map(|&k| measures(k))
        .collect::<Result<Vec<_>>>()?;
    let best: Vec<_> = (0..=n)
        .map(|p| {
            let lb = instance_lower_bound(n, p);
            let neg = per_kind.iter().map(|v| v[p].negatives).min().unwrap_or(0);
            let tot = per_kind.iter().map(|v| v[p].total).min().unwrap_or(0);
            FrustrationMeasure::new(neg.max(lb.negatives), tot.max(lb.total))
        })
        .collect();

    let expectations = [
        (StrategyKind::Fun, m - 1.0),
        (StrategyKind::Frustrating, m - 2.0),
    ];
    let mut failure = None;
    for (kind, floor) in expectations {
        // per_kind follows StrategyKind::ALL, which is declaration order
        let ratio = ratio_against(&per_kind[kind as usize], &best);
        if ratio.negatives < floor {
            failure = Some(cx(
                kind,
                n,
                ratio.negatives_argmax,
                format!("negatives ratio {} below {floor}", ratio.negatives),
                None,
            ));
            break;
        }
    }
    let seq_ratio = ratio_against(&per_kind[StrategyKind::Sequential as usize], &best);
    if failure.is_none() && seq_ratio.negatives != 1.0 {
        failure = Some(cx(
            StrategyKind::Sequential,
            n,
            seq_ratio.negatives_argmax,
            format!("negatives ratio {} != 1", seq_ratio.negatives),
            None,
        ));
    }
    Ok(PropertyCheck {
        name: "not_instance_optimal".into(),
        passed: failure.is_none(),
        cases: 3,
        counterexample: failure,
    })
}

/// Pinned clauses of the three-way relation: (a, b, expected).
type RelationRow = ((usize, usize), (usize, usize), FunRelation);

pub(crate) const RELATION_TABLE: [RelationRow; 6] = [
    ((1, 5), (2, 6), FunRelation::MoreFun),
    ((2, 6), (1, 5), FunRelation::NonComparable),
    ((2, 5), (1, 5), FunRelation::LessFun),
    ((1, 6), (1, 5), FunRelation::LessFun),
    ((2, 5), (1, 6), FunRelation::NonComparable),
    ((3, 3), (3, 3), FunRelation::NonComparable),
];

fn order_laws() -> Vec<PropertyCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut random_measure = || {
        let total = rng.random_range(0..8usize);
        let negatives = rng.random_range(0..=total);
        FrustrationMeasure::new(negatives, total)
    };
    let triples: Vec<_> = (0..ORDER_TRIPLES)
        .map(|_| (random_measure(), random_measure(), random_measure()))
        .collect();

    let check = |name: &str, bad: Option<String>, cases: usize| PropertyCheck {
        name: name.into(),
        passed: bad.is_none(),
        cases,
        counterexample: bad.map(|detail| Counterexample {
            strategy: None,
            n: 0,
            p: 0,
            detail,
            trace: None,
        }),
    };

    let partial_order = triples.iter().find_map(|&(a, b, c)| {
        if dominates(a, a) {
            Some(format!("{a} dominates itself"))
        } else if dominates(a, b) && dominates(b, a) {
            Some(format!("{a} and {b} dominate each other"))
        } else if dominates(a, b) && dominates(b, c) && !dominates(a, c) {
            Some(format!("{a} > {b} > {c} but not {a} > {c}"))
        } else {
            None
        }
    });
    let more_fun = triples.iter().find_map(|&(a, b, _)| {
        (fun_relation(a, b) == FunRelation::MoreFun && !dominates(a, b))
            .then(|| format!("{a} more fun than {b} without dominating"))
    });
    let table = RELATION_TABLE.iter().find_map(|&(a, b, want)| {
        let (a, b) = (
            FrustrationMeasure::new(a.0, a.1),
            FrustrationMeasure::new(b.0, b.1),
        );
        let got = fun_relation(a, b);
        (got != want).then(|| format!("relation({a}, {b}) = {got:?}, expected {want:?}"))
    });

    vec![
        check(
            "dominance_strict_partial_order",
            partial_order,
            triples.len(),
        ),
        check("more_fun_implies_dominates", more_fun, triples.len()),
        check("fun_relation_table", table, RELATION_TABLE.len()),
    ]
}

/// `lo` never drops, `hi` never rises, and `hi - lo` shrinks strictly from
/// one phase end to the next.
fn interval_narrowing(ns: impl Iterator<Item = usize> + Clone) -> PropertyCheck {
    let cases = all_instances(&StrategyKind::ALL, ns);
    let count = cases.len();
    let failure = cases.into_par_iter().find_map_first(|(kind, n, p)| {
        let mut s = match SearchSession::start(kind, n) {
            Ok(s) => s,
            Err(e) => return Some(cx(kind, n, p, e.to_string(), None)),
        };
        let mut prev = s.bracket();
        let mut last_phase_width = prev.1 - prev.0;
        let mut phases = 0;
        while !s.is_done() {
            let step = s
                .next_probe()
                .and_then(|level| answer_deterministic(p, n, level.get()))
                .and_then(|o| s.observe(o));
            if let Err(e) = step {
                return Some(cx(kind, n, p, e.to_string(), Some(s.trace())));
            }
            let (lo, hi) = s.bracket();
            if lo < prev.0 || hi > prev.1 || lo >= hi {
                return Some(cx(
                    kind,
                    n,
                    p,
                    format!("bracket moved from {prev:?} to {:?}", (lo, hi)),
                    Some(s.trace()),
                ));
            }
            if s.phases_completed() != phases {
                phases = s.phases_completed();
                if hi - lo >= last_phase_width {
                    return Some(cx(
                        kind,
                        n,
                        p,
                        format!("width {} did not shrink below {last_phase_width}", hi - lo),
                        Some(s.trace()),
                    ));
                }
                last_phase_width = hi - lo;
            }
            prev = (lo, hi);
        }
        None
    });
    PropertyCheck {
        name: "interval_narrowing".into(),
        passed: failure.is_none(),
        cases: count,
        counterexample: failure,
    }
}
