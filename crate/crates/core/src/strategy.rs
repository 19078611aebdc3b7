//! The five threshold search strategies, written as resumable state machines.
//!
//! A [`SearchSession`] never calls the subject itself. The driver asks it for
//! the next level with [`SearchSession::next_probe`], obtains an answer from
//! wherever answers come from (a profile, a terminal, an HTTP client) and
//! feeds it back with [`SearchSession::observe`]. The whole state, trace
//! included, serializes to JSON so a session can be parked and resumed.
//!
//! Bracket convention: `lo` is the largest level known to pass (0 is the
//! virtual always-pass level) and `hi` the smallest level known to fail
//! (`n + 1` is the virtual always-fail level). The search is over once
//! `hi - lo == 1`, and the answer is `lo`.
//!
//! Every probe is a fresh question, even when a gallop revisits a level that
//! was already asked. A live subject can therefore contradict an earlier
//! answer. Such answers are recorded as given, but their effect on the bracket
//! is clamped: a pass at or above `hi` moves `lo` to `hi - 1`, a fail at or
//! below `lo` moves `hi` to `lo + 1`. Deterministic subjects never trigger
//! either clamp.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{CatError, Result};
use crate::subject::{AbilityProfile, DifficultyLevel, Outcome, ProbeRecord, StreamKey};

/// Version tag written into serialized sessions.
pub const STATE_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrategyKind {
    Sequential,
    Binary,
    Doubling,
    Fun,
    Frustrating,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 5] = [
        StrategyKind::Sequential,
        StrategyKind::Binary,
        StrategyKind::Doubling,
        StrategyKind::Fun,
        StrategyKind::Frustrating,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::Sequential => "sequential",
            StrategyKind::Binary => "binary",
            StrategyKind::Doubling => "doubling",
            StrategyKind::Fun => "fun",
            StrategyKind::Frustrating => "frustrating",
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StrategyKind {
    type Err = CatError;

    fn from_str(s: &str) -> Result<Self> {
        StrategyKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| CatError::InvalidArgument(format!("unknown strategy {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    ReadyToProbe,
    AwaitingOutcome,
    Done,
}

/// Ordered log of answered probes.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RunTrace(Vec<ProbeRecord>);

impl RunTrace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn records(&self) -> &[ProbeRecord] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn negatives(&self) -> usize {
        self.0.iter().filter(|r| !r.outcome.is_pass()).count()
    }

    pub fn positives(&self) -> usize {
        self.0.iter().filter(|r| r.outcome.is_pass()).count()
    }

    fn push(&mut self, level: DifficultyLevel, outcome: Outcome) {
        let seq = self.0.len() + 1;
        self.0.push(ProbeRecord {
            seq,
            level,
            outcome,
        });
    }
}

impl fmt::Display for RunTrace {
    /// Compact form, e.g. `1P 2P 4P 8F 5P 6F`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, r) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            let mark = if r.outcome.is_pass() { 'P' } else { 'F' };
            write!(f, "{}{}", r.level, mark)?;
        }
        Ok(())
    }
}

impl FromIterator<ProbeRecord> for RunTrace {
    fn from_iter<I: IntoIterator<Item = ProbeRecord>>(iter: I) -> Self {
        Self(iter.into_iter().collect())
    }
}

/// What the session does next.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Phase {
    /// Probe `lo + 1`.
    Scan,
    /// Probe the midpoint of the bracket.
    Bisect,
    /// Probe `origin + 2^exponent`, clamped to `n` and `hi`, until a fail.
    GallopUp { origin: usize, exponent: u32 },
    /// Probe `origin - 2^exponent`, clamped to `lo`, until a pass.
    GallopDown {
        origin: usize,
        exponent: u32,
        lowest_fail: Option<usize>,
    },
}

/// Resumable state of one strategy run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchSession {
    v: u32,
    kind: StrategyKind,
    n: usize,
    lo: usize,
    hi: usize,
    phase: Phase,
    phases_completed: usize,
    status: Status,
    pending: Option<DifficultyLevel>,
    trace: RunTrace,
}

impl SearchSession {
    pub fn start(kind: StrategyKind, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(CatError::EmptyDomain);
        }
        let phase = match kind {
            StrategyKind::Sequential => Phase::Scan,
            StrategyKind::Binary => Phase::Bisect,
            StrategyKind::Doubling | StrategyKind::Fun | StrategyKind::Frustrating => {
                Phase::GallopUp {
                    origin: 0,
                    exponent: 0,
                }
            }
        };
        Ok(Self {
            v: STATE_VERSION,
            kind,
            n,
            lo: 0,
            hi: n + 1,
            phase,
            phases_completed: 0,
            status: Status::ReadyToProbe,
            pending: None,
            trace: RunTrace::new(),
        })
    }

    pub fn kind(&self) -> StrategyKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn status(&self) -> Status {
        self.status
    }

    /// Current bracket `(lo, hi)`.
    pub fn bracket(&self) -> (usize, usize) {
        (self.lo, self.hi)
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    /// Number of phases that have ended so far.
    pub fn phases_completed(&self) -> usize {
        self.phases_completed
    }

    pub fn pending(&self) -> Option<DifficultyLevel> {
        self.pending
    }

    pub fn trace(&self) -> &RunTrace {
        &self.trace
    }

    pub fn is_done(&self) -> bool {
        self.status == Status::Done
    }

    /// The found threshold once the session is done.
    pub fn result(&self) -> Option<usize> {
        self.is_done().then_some(self.lo)
    }

    /// Issue the next probe. The level is recorded once its outcome arrives.
    pub fn next_probe(&mut self) -> Result<DifficultyLevel> {
        if self.status != Status::ReadyToProbe {
            return Err(CatError::InvalidState {
                op: "next_probe",
                status: self.status,
            });
        }
        let level = DifficultyLevel::new_unchecked(self.level_for(self.phase));
        self.pending = Some(level);
        self.status = Status::AwaitingOutcome;
        Ok(level)
    }

    /// Record the outcome of the pending probe and advance.
    pub fn observe(&mut self, outcome: Outcome) -> Result<Status> {
        let level = match (self.status, self.pending) {
            (Status::AwaitingOutcome, Some(level)) => level,
            _ => {
                return Err(CatError::InvalidState {
                    op: "observe",
                    status: self.status,
                })
            }
        };
        self.pending = None;
        self.trace.push(level, outcome);
        self.status = Status::ReadyToProbe;

        let x = level.get();
        match self.phase {
            Phase::Scan | Phase::Bisect => {
                self.narrow(x, outcome);
                if self.hi - self.lo == 1 {
                    self.finish();
                }
            }
            Phase::GallopUp { origin, exponent } => {
                if outcome.is_pass() {
                    self.raise_lo(x);
                    if x == self.n && self.hi == self.n + 1 {
                        self.finish();
                    } else {
                        let next = Phase::GallopUp {
                            origin,
                            exponent: exponent + 1,
                        };
                        if self.level_for(next) == x {
                            // only a pass on an already-failed level gets here
                            self.end_phase();
                        } else {
                            self.phase = next;
                        }
                    }
                } else {
                    self.lower_hi(x);
                    self.end_phase();
                }
            }
            Phase::GallopDown {
                origin,
                exponent,
                lowest_fail,
            } => {
                if outcome.is_pass() {
                    self.raise_lo(x);
                    if let Some(f) = lowest_fail {
                        self.lower_hi(f);
                    }
                    self.end_phase();
                } else {
                    let fail = lowest_fail.map_or(x, |f| f.min(x));
                    let next = Phase::GallopDown {
                        origin,
                        exponent: exponent + 1,
                        lowest_fail: Some(fail),
                    };
                    if self.level_for(next) == x {
                        self.lower_hi(fail);
                        self.end_phase();
                    } else {
                        self.phase = next;
                    }
                }
            }
        }
        Ok(self.status)
    }

    /// Serialize the full state to a JSON blob.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("session state is always serializable")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let session: Self = serde_json::from_str(text)?;
        if session.v != STATE_VERSION {
            return Err(CatError::UnsupportedVersion(session.v));
        }
        let consistent = session.n >= 1
            && session.lo < session.hi
            && session.hi <= session.n + 1
            && (session.status == Status::AwaitingOutcome) == session.pending.is_some()
            && (session.status != Status::Done || session.hi - session.lo == 1);
        if !consistent {
            return Err(CatError::InvalidArgument(
                "session state violates bracket invariants".into(),
            ));
        }
        Ok(session)
    }

    fn level_for(&self, phase: Phase) -> usize {
        match phase {
            Phase::Scan => self.lo + 1,
            Phase::Bisect => (self.lo + self.hi) / 2,
            Phase::GallopUp { origin, exponent } => origin
                .saturating_add(pow2(exponent))
                .min(self.n)
                .min(self.hi),
            Phase::GallopDown {
                origin, exponent, ..
            } => origin.saturating_sub(pow2(exponent)).max(self.lo).max(1),
        }
    }

    fn narrow(&mut self, x: usize, outcome: Outcome) {
        if outcome.is_pass() {
            self.raise_lo(x);
        } else {
            self.lower_hi(x);
        }
    }

    fn raise_lo(&mut self, x: usize) {
        self.lo = self.lo.max(x.min(self.hi - 1));
    }

    fn lower_hi(&mut self, x: usize) {
        self.hi = self.hi.min(x.max(self.lo + 1));
    }

    fn end_phase(&mut self) {
        self.phases_completed += 1;
        if self.hi - self.lo == 1 {
            self.finish();
            return;
        }
        self.phase = match self.kind {
            StrategyKind::Fun => Phase::GallopUp {
                origin: self.lo,
                exponent: 0,
            },
            StrategyKind::Frustrating => Phase::GallopDown {
                origin: self.hi,
                exponent: 0,
                lowest_fail: None,
            },
            StrategyKind::Doubling => Phase::Bisect,
            // scan and bisect never end a phase early
            StrategyKind::Sequential => Phase::Scan,
            StrategyKind::Binary => Phase::Bisect,
        };
    }

    fn finish(&mut self) {
        self.status = Status::Done;
        self.pending = None;
    }
}

fn pow2(exponent: u32) -> usize {
    1usize.checked_shl(exponent).unwrap_or(usize::MAX)
}

/// Outcome of a completed run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchResult {
    pub found_p: usize,
    pub trace: RunTrace,
}

/// Drive a fresh session against `profile` until it is done.
///
/// Stochastic answers come from the streams `(seed, session, seq)`.
pub fn run_to_completion(
    kind: StrategyKind,
    n: usize,
    profile: &AbilityProfile,
    seed: u64,
    session: &str,
) -> Result<SearchResult> {
    match profile.domain_size() {
        None => return Err(CatError::ExternalProfile),
        Some(profile_n) if profile_n != n => {
            return Err(CatError::ProfileMismatch { profile_n, n });
        }
        Some(_) => {}
    }
    let mut search = SearchSession::start(kind, n)?;
    while !search.is_done() {
        let level = search.next_probe()?;
        let key = StreamKey {
            seed,
            session,
            seq: search.trace().len() + 1,
        };
        search.observe(profile.answer(level, &key)?)?;
    }
    Ok(SearchResult {
        found_p: search.lo,
        trace: search.trace,
    })
}

/// Something that can search a deterministic subject.
///
/// The harness verifies properties through this trait so that deliberately
/// broken implementations can be checked to fail them.
pub trait SearchDriver: Sync {
    fn run(&self, kind: StrategyKind, n: usize, threshold: usize) -> Result<SearchResult>;
}

/// The production driver backed by [`SearchSession`].
#[derive(Debug, Clone, Copy, Default)]
pub struct StateMachineDriver;

impl SearchDriver for StateMachineDriver {
    fn run(&self, kind: StrategyKind, n: usize, threshold: usize) -> Result<SearchResult> {
        run_deterministic(kind, n, threshold)
    }
}

/// Shorthand for a run against a deterministic subject.
pub fn run_deterministic(kind: StrategyKind, n: usize, threshold: usize) -> Result<SearchResult> {
    let profile = AbilityProfile::deterministic(threshold, n)?;
    run_to_completion(kind, n, &profile, 0, "")
}
