//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Expected values come from oracles written here, not from the library.
//! Every tolerance is a named constant below. The process exits non-zero if
//! any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::{Duration, Instant};

use catsearch_core::analysis::{dominates, fun_relation, optimality_ratio};
use catsearch_core::harness::{monte_carlo, sweep_many, sweep_parallel, write_sweep_csv};
use catsearch_core::{
    run_deterministic, AbilityProfile, FrustrationMeasure, FunRelation, Outcome, SearchSession,
    StrategyKind,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const ALL: [StrategyKind; 5] = StrategyKind::ALL;

/// Wall-clock budget for the exhaustive correctness sweep.
const CORRECTNESS_BUDGET: Duration = Duration::from_secs(60);
/// Worst-case negatives of bisection over 1023 levels, from the oracle below.
const BINARY_1023_MAX_NEGATIVES: usize = 10;
const BINARY_1023_MAX_TOTAL: usize = 10;
const ORDER_TRIPLES: usize = 10_000;
const ORDER_SEED: u64 = 0;
/// Allowed gap between Monte Carlo counts and oracle expectations, in runs
/// per found-level bucket.
const MC_BUCKET_TOLERANCE: f64 = 5.0;
const MC_RUNS: usize = 100;
const MC_SEED: u64 = 0;
const MC_Q: [f64; 4] = [0.88, 0.82, 0.71, 0.67];
const MC_T: f64 = 0.8;
const MC_K: u32 = 200;

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        passed,
        detail: detail.into(),
    }
}

fn fm(negatives: usize, total: usize) -> FrustrationMeasure {
    FrustrationMeasure::new(negatives, total)
}

// ---------------------------------------------------------------------------
// Oracles

fn floor_log2(x: usize) -> u32 {
    usize::BITS - 1 - x.leading_zeros()
}

/// Plain bisection over levels 1..=n with the answer at `p`.
fn binary_oracle(n: usize, p: usize) -> (usize, usize) {
    let (mut lo, mut hi) = (0, n + 1);
    let (mut negatives, mut total) = (0, 0);
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        total += 1;
        if mid <= p {
            lo = mid;
        } else {
            negatives += 1;
            hi = mid;
        }
    }
    assert_eq!(lo, p);
    (negatives, total)
}

/// `dominates` straight from its definition: no worse on both counts and
/// not identical.
fn dominates_oracle(a: FrustrationMeasure, b: FrustrationMeasure) -> bool {
    a.negatives <= b.negatives && a.total <= b.total && a != b
}

/// P(Bin(k, q) / k >= t), summed exactly in log space.
fn block_pass_probability(q: f64, t: f64, k: u32) -> f64 {
    let ln_choose = |j: u32| -> f64 {
        (1..=j)
            .map(|i| ((k - j + i) as f64).ln() - (i as f64).ln())
            .sum()
    };
    (0..=k)
        .filter(|&j| j as f64 / k as f64 >= t)
        .map(|j| {
            let ln = ln_choose(j) + j as f64 * q.ln() + (k - j) as f64 * (1.0 - q).ln();
            ln.exp()
        })
        .sum()
}

/// Exact distribution of the found level: walk every branch of the search
/// with each probe passing independently with its block probability.
fn found_distribution(kind: StrategyKind, pass: &[f64]) -> Vec<f64> {
    fn walk(state: SearchSession, weight: f64, pass: &[f64], dist: &mut [f64]) {
        if let Some(p) = state.result() {
            dist[p] += weight;
            return;
        }
        let mut state = state;
        let level = state.next_probe().unwrap().get();
        let pi = pass[level - 1];
        for (outcome, w) in [(Outcome::Pass, pi), (Outcome::Fail, 1.0 - pi)] {
            if w == 0.0 {
                continue;
            }
            let mut next = state.clone();
            next.observe(outcome).unwrap();
            walk(next, weight * w, pass, dist);
        }
    }
    let mut dist = vec![0.0; pass.len() + 1];
    walk(
        SearchSession::start(kind, pass.len()).unwrap(),
        1.0,
        pass,
        &mut dist,
    );
    dist
}

// ---------------------------------------------------------------------------
// Criteria

fn exhaustive_correctness() -> Verdict {
    let start = Instant::now();
    let mut runs = 0usize;
    for kind in ALL {
        for n in 1..=512 {
            for p in 0..=n {
                let got = run_deterministic(kind, n, p).unwrap().found_p;
                if got != p {
                    return verdict(false, format!("{kind} n={n} p={p} found {got}"));
                }
                runs += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    verdict(
        elapsed < CORRECTNESS_BUDGET,
        format!(
            "{runs} runs correct in {:.1}s (budget {}s)",
            elapsed.as_secs_f64(),
            CORRECTNESS_BUDGET.as_secs()
        ),
    )
}

fn sequential_law() -> Verdict {
    let n = 1024;
    for p in 0..=n {
        let r = run_deterministic(StrategyKind::Sequential, n, p).unwrap();
        let want = (usize::from(p < n), (p + 1).min(n));
        let got = (r.trace.negatives(), r.trace.len());
        if got != want {
            return verdict(false, format!("p={p}: got {got:?}, want {want:?}"));
        }
    }
    verdict(true, format!("n={n}, all {} thresholds", n + 1))
}

fn binary_bound() -> Verdict {
    let n = 1023;
    let (mut max_neg, mut max_total) = (0, 0);
    let (mut oracle_neg, mut oracle_total) = (0, 0);
    for p in 0..=n {
        let r = run_deterministic(StrategyKind::Binary, n, p).unwrap();
        let got = (r.trace.negatives(), r.trace.len());
        let want = binary_oracle(n, p);
        if got != want {
            return verdict(false, format!("p={p}: got {got:?}, oracle {want:?}"));
        }
        max_neg = max_neg.max(got.0);
        max_total = max_total.max(got.1);
        oracle_neg = oracle_neg.max(want.0);
        oracle_total = oracle_total.max(want.1);
    }
    let passed = max_total == BINARY_1023_MAX_TOTAL
        && max_neg <= 10
        && max_neg == BINARY_1023_MAX_NEGATIVES
        && oracle_neg == BINARY_1023_MAX_NEGATIVES
        && oracle_total == BINARY_1023_MAX_TOTAL;
    verdict(
        passed,
        format!("n={n}: max total {max_total}, max negatives {max_neg} (pinned {BINARY_1023_MAX_NEGATIVES})"),
    )
}

fn fun_popcount_law() -> Verdict {
    let mut cases = 0usize;
    let mut negatives_bad = None;
    let mut total_violations = 0usize;
    let mut first_total = None;
    let mut worst_excess = (0usize, 0usize, 0usize);
    for e in 4..=12 {
        let n = 1usize << e;
        for p in 0..n {
            let r = run_deterministic(StrategyKind::Fun, n, p).unwrap();
            cases += 1;
            let want = p.count_ones() as usize + usize::from(p % 2 == 0);
            if r.trace.negatives() != want && negatives_bad.is_none() {
                negatives_bad = Some(format!(
                    "n={n} p={p}: negatives {} want {want} [{}]",
                    r.trace.negatives(),
                    r.trace
                ));
            }
            let bound = 2 * floor_log2(p.max(1)) as usize + 4;
            let total = r.trace.len();
            if total > bound {
                total_violations += 1;
                if first_total.is_none() {
                    first_total = Some(format!(
                        "n={n} p={p}: total {total} > {bound} [{}]",
                        r.trace
                    ));
                }
                if total - bound > worst_excess.0 {
                    worst_excess = (total - bound, n, p);
                }
            }
        }
    }
    let mut detail = match &negatives_bad {
        None => format!("negatives law exact on {cases} cases"),
        Some(bad) => format!("negatives law broken: {bad}"),
    };
    match &first_total {
        None => detail.push_str("; total bound holds"),
        Some(first) => detail.push_str(&format!(
            "; total bound violated in {total_violations}/{cases} cases, first {first}, worst +{} at n={} p={}",
            worst_excess.0, worst_excess.1, worst_excess.2
        )),
    }
    verdict(negatives_bad.is_none() && first_total.is_none(), detail)
}

fn separation() -> Verdict {
    let negatives = |kind, n, p| run_deterministic(kind, n, p).unwrap().trace.negatives();
    for k in 2..=11u32 {
        let (p, n) = ((1usize << k) - 1, 1usize << (k + 1));
        let (fun, fru) = (
            negatives(StrategyKind::Fun, n, p),
            negatives(StrategyKind::Frustrating, n, p),
        );
        if fun != k as usize || fru != 1 {
            return verdict(
                false,
                format!("k={k} p={p}: fun {fun} (want {k}), frustrating {fru} (want 1)"),
            );
        }
        let (p, n) = (1usize << k, 1usize << (k + 2));
        let (fun, fru) = (
            negatives(StrategyKind::Fun, n, p),
            negatives(StrategyKind::Frustrating, n, p),
        );
        if fun != 2 || fru < k as usize {
            return verdict(
                false,
                format!("k={k} p={p}: fun {fun} (want 2), frustrating {fru} (want >= {k})"),
            );
        }
    }
    let fun = optimality_ratio(StrategyKind::Fun, 4096).unwrap();
    let fru = optimality_ratio(StrategyKind::Frustrating, 4096).unwrap();
    verdict(
        fun.negatives >= 11.0 && fru.negatives >= 10.0,
        format!(
            "k=2..11 separations hold; ratio at n=4096: fun {} (p={}), frustrating {} (p={})",
            fun.negatives, fun.negatives_argmax, fru.negatives, fru.negatives_argmax
        ),
    )
}

fn partial_order() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(ORDER_SEED);
    let mut random = || {
        let total = rng.random_range(0..12usize);
        fm(rng.random_range(0..=total), total)
    };
    for _ in 0..ORDER_TRIPLES {
        let (a, b, c) = (random(), random(), random());
        for (x, y) in [(a, b), (b, c), (a, c), (b, a)] {
            if dominates(x, y) != dominates_oracle(x, y) {
                return verdict(
                    false,
                    format!("dominates({x}, {y}) disagrees with definition"),
                );
            }
            if fun_relation(x, y) == FunRelation::MoreFun && !dominates(x, y) {
                return verdict(
                    false,
                    format!("{x} more fun than {y} but does not dominate"),
                );
            }
        }
        if dominates(a, a) {
            return verdict(false, format!("not irreflexive at {a}"));
        }
        if dominates(a, b) && dominates(b, a) {
            return verdict(false, format!("not asymmetric at {a}, {b}"));
        }
        if dominates(a, b) && dominates(b, c) && !dominates(a, c) {
            return verdict(false, format!("not transitive at {a}, {b}, {c}"));
        }
    }
    // (a, b, relation of a to b): fewer of both is more fun; more of one with
    // the other equal is less fun; anything else is not comparable.
    let table = [
        (fm(1, 5), fm(2, 6), FunRelation::MoreFun),
        (fm(0, 3), fm(1, 4), FunRelation::MoreFun),
        (fm(2, 5), fm(1, 5), FunRelation::LessFun),
        (fm(1, 6), fm(1, 5), FunRelation::LessFun),
        (fm(2, 6), fm(1, 5), FunRelation::NonComparable),
        (fm(1, 5), fm(1, 6), FunRelation::NonComparable),
        (fm(2, 5), fm(1, 6), FunRelation::NonComparable),
        (fm(0, 0), fm(0, 0), FunRelation::NonComparable),
    ];
    for (a, b, want) in table {
        let got = fun_relation(a, b);
        if got != want {
            return verdict(
                false,
                format!("relation({a}, {b}) = {got:?}, want {want:?}"),
            );
        }
    }
    verdict(
        true,
        format!("{ORDER_TRIPLES} triples, {} table rows", table.len()),
    )
}

fn stochastic_recovery() -> Verdict {
    let pass: Vec<f64> = MC_Q
        .iter()
        .map(|&q| block_pass_probability(q, MC_T, MC_K))
        .collect();
    let profile = AbilityProfile::stochastic(MC_Q.to_vec(), MC_T, MC_K).unwrap();
    let mut parts = Vec::new();
    let mut passed = true;
    for kind in ALL {
        let exact = found_distribution(kind, &pass);
        let mc = monte_carlo(kind, &profile, MC_RUNS, MC_SEED).unwrap();
        let worst = exact
            .iter()
            .zip(&mc.found_counts)
            .map(|(&p, &c)| (c as f64 - p * MC_RUNS as f64).abs())
            .fold(0.0, f64::max);
        let modal = mc.modal_found();
        let ok = worst <= MC_BUCKET_TOLERANCE && modal == 2;
        passed &= ok;
        parts.push(format!(
            "{kind} counts {:?} vs expected [{}] (max gap {worst:.1}, mode {modal})",
            mc.found_counts,
            exact
                .iter()
                .map(|p| format!("{:.1}", p * MC_RUNS as f64))
                .collect::<Vec<_>>()
                .join(", ")
        ));
    }
    verdict(passed, parts.join("; "))
}

fn protocol_and_replay() -> Verdict {
    let runtime = tokio::runtime::Runtime::new().unwrap();
    runtime.block_on(async {
        let dir = tempfile::tempdir().unwrap();
        let log = dir.path().join("events.jsonl");
        let store = Arc::new(catsearch_service::open_store(Some(&log), 0).unwrap());
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
        let base = format!("http://{}", listener.local_addr().unwrap());
        let (stop, stopped) = tokio::sync::oneshot::channel::<()>();
        let server = tokio::spawn(catsearch_service::serve_on(listener, store.clone(), None, async {
            let _ = stopped.await;
        }));

        let client = reqwest::Client::new();
        let created = client
            .post(format!("{base}/sessions"))
            .json(&serde_json::json!({"strategy": "fun", "n": 16, "mode": "live"}))
            .send()
            .await
            .unwrap();
        assert_eq!(created.status().as_u16(), 201);
        let id = created.json::<serde_json::Value>().await.unwrap()["id"]
            .as_str()
            .unwrap()
            .to_string();

        let mut probes = Vec::new();
        for outcome in ["pass", "pass", "pass", "fail", "pass", "fail"] {
            let next: serde_json::Value = client
                .get(format!("{base}/sessions/{id}/next"))
                .send()
                .await
                .unwrap()
                .json()
                .await
                .unwrap();
            probes.push(next["probe"].as_u64().unwrap());
            let r = client
                .post(format!("{base}/sessions/{id}/answer"))
                .json(&serde_json::json!({ "outcome": outcome }))
                .send()
                .await
                .unwrap();
            assert_eq!(r.status().as_u16(), 200);
        }
        let done: serde_json::Value = client
            .get(format!("{base}/sessions/{id}/next"))
            .send()
            .await
            .unwrap()
            .json()
            .await
            .unwrap();
        let view: serde_json::Value = client
            .get(format!("{base}/sessions/{id}"))
            .send()
            .await
            .unwrap()
            .json()
            .await
            .unwrap();
        let _ = stop.send(());
        server.await.unwrap().unwrap();

        let result = done["result"].as_u64();
        let phi = (done["frustration"]["negatives"].as_u64(), done["frustration"]["total"].as_u64());

        let replayed = catsearch_service::replay(&log).unwrap();
        let live = store.record(&id).unwrap();
        let replayed_bytes = serde_json::to_vec(&replayed[0]).unwrap();
        let live_bytes = serde_json::to_vec(&live).unwrap();
        let served_state: SearchSession = serde_json::from_value(view["state"].clone()).unwrap();
        let state_bytes = |s: &SearchSession| serde_json::to_vec(s).unwrap();

        let identical = replayed.len() == 1
            && replayed_bytes == live_bytes
            && state_bytes(&replayed[0].state) == state_bytes(&served_state);
        verdict(
            result == Some(5) && phi == (Some(2), Some(6)) && identical,
            format!(
                "probes {probes:?}, result {result:?}, frustration {phi:?}, replayed record {} ({} bytes)",
                if identical { "byte-identical" } else { "DIFFERS" },
                replayed_bytes.len()
            ),
        )
    })
}

fn determinism() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let n = 256;
    let paths: Vec<_> = ["a.csv", "b.csv", "par.csv"]
        .iter()
        .map(|f| dir.path().join(f))
        .collect();
    write_sweep_csv(&sweep_many(&ALL, n).unwrap(), &paths[0]).unwrap();
    write_sweep_csv(&sweep_many(&ALL, n).unwrap(), &paths[1]).unwrap();
    write_sweep_csv(&sweep_parallel(&ALL, n).unwrap(), &paths[2]).unwrap();
    let bytes: Vec<Vec<u8>> = paths.iter().map(|p| std::fs::read(p).unwrap()).collect();

    let profile = AbilityProfile::stochastic(MC_Q.to_vec(), MC_T, MC_K).unwrap();
    let seeded = |seed| monte_carlo(StrategyKind::Fun, &profile, MC_RUNS, seed).unwrap();
    let mc_same = seeded(7) == seeded(7);

    verdict(
        bytes[0] == bytes[1] && bytes[0] == bytes[2] && mc_same,
        format!(
            "sweep CSVs {} bytes, serial/serial {}, serial/parallel {}, seeded Monte Carlo repeatable {}",
            bytes[0].len(),
            bytes[0] == bytes[1],
            bytes[0] == bytes[2],
            mc_same
        ),
    )
}

fn main() {
    type Criterion = (&'static str, fn() -> Verdict);
    let criteria: [Criterion; 9] = [
        ("exhaustive correctness", exhaustive_correctness),
        ("sequential law", sequential_law),
        ("binary bound", binary_bound),
        ("fun popcount law and total bound", fun_popcount_law),
        ("non-instance-optimality separation", separation),
        ("partial-order properties", partial_order),
        ("stochastic recovery", stochastic_recovery),
        ("protocol equivalence and replay", protocol_and_replay),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let v = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            verdict(false, format!("panicked: {msg}"))
        });
        if !v.passed {
            failed += 1;
        }
        println!(
            "{} criterion {}: {name} [{:.1}s] {}",
            if v.passed { "PASS" } else { "FAIL" },
            i + 1,
            start.elapsed().as_secs_f64(),
            v.detail
        );
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
