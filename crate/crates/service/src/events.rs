//! Session records and their append-only JSONL event log.
//!
//! Every state change of a session is written as one event line before the
//! change is acknowledged. Each event carries the serialized search state
//! reached after it, so [`replay`] can re-run the transitions from the
//! events alone and check it lands on exactly the stored state.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use catsearch_core::analysis::measure;
use catsearch_core::{
    AbilityProfile, DifficultyLevel, FrustrationMeasure, Outcome, SearchSession, StrategyKind,
    StreamKey,
};
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{ReplayError, ServiceError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SessionMode {
    /// Answers come from the client.
    Live,
    /// The service answers from a fixed threshold.
    Deterministic,
    /// The service answers from a difficulty-matrix column.
    Stochastic,
}

impl std::str::FromStr for SessionMode {
    type Err = ServiceError;

    fn from_str(s: &str) -> Result<Self, ServiceError> {
        match s {
            "live" => Ok(SessionMode::Live),
            "deterministic" => Ok(SessionMode::Deterministic),
            "stochastic" => Ok(SessionMode::Stochastic),
            other => Err(ServiceError::BadRequest(format!(
                "mode must be live, deterministic or stochastic, got {other:?}"
            ))),
        }
    }
}

/// A persisted session: identity, configuration and search state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub id: String,
    pub strategy: StrategyKind,
    pub n: usize,
    pub mode: SessionMode,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub profile: Option<AbilityProfile>,
    pub seed: u64,
    pub state: SearchSession,
    pub created_at: DateTime<Utc>,
    pub updated_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", content = "payload", rename_all = "snake_case")]
pub enum EventBody {
    Created {
        strategy: StrategyKind,
        n: usize,
        mode: SessionMode,
        #[serde(skip_serializing_if = "Option::is_none", default)]
        profile: Option<AbilityProfile>,
        seed: u64,
        state: SearchSession,
    },
    ProbeIssued {
        seq: usize,
        level: DifficultyLevel,
        state: SearchSession,
    },
    AnswerRecorded {
        seq: usize,
        level: DifficultyLevel,
        outcome: Outcome,
        state: SearchSession,
    },
    Finished {
        result: usize,
        negatives: usize,
        total: usize,
        state: SearchSession,
    },
}

impl EventBody {
    pub fn name(&self) -> &'static str {
        match self {
            EventBody::Created { .. } => "created",
            EventBody::ProbeIssued { .. } => "probe_issued",
            EventBody::AnswerRecorded { .. } => "answer_recorded",
            EventBody::Finished { .. } => "finished",
        }
    }

    fn state(&self) -> &SearchSession {
        match self {
            EventBody::Created { state, .. }
            | EventBody::ProbeIssued { state, .. }
            | EventBody::AnswerRecorded { state, .. }
            | EventBody::Finished { state, .. } => state,
        }
    }
}

/// One line of the event log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionEvent {
    pub ts: DateTime<Utc>,
    pub session_id: String,
    #[serde(flatten)]
    pub body: EventBody,
}

impl SessionRecord {
    /// New session plus its `created` event.
    pub fn create(
        id: String,
        strategy: StrategyKind,
        n: usize,
        mode: SessionMode,
        profile: Option<AbilityProfile>,
        seed: u64,
        ts: DateTime<Utc>,
    ) -> Result<(Self, SessionEvent), ServiceError> {
        let state = SearchSession::start(strategy, n)
            .map_err(|e| ServiceError::BadRequest(e.to_string()))?;
        match (mode, &profile) {
            (SessionMode::Live, None) => {}
            (SessionMode::Live, Some(_)) => {
                return Err(ServiceError::BadRequest(
                    "live sessions take no profile".into(),
                ))
            }
            (_, None) => {
                return Err(ServiceError::BadRequest(format!(
                    "{mode:?} sessions need a profile"
                )))
            }
            (SessionMode::Deterministic, Some(AbilityProfile::Deterministic(_)))
            | (SessionMode::Stochastic, Some(AbilityProfile::Stochastic(_))) => {}
            (_, Some(_)) => {
                return Err(ServiceError::BadRequest(format!(
                    "profile shape does not match mode {mode:?}"
                )))
            }
        }
        if let Some(p) = &profile {
            p.validate()
                .map_err(|e| ServiceError::BadRequest(e.to_string()))?;
            if p.domain_size() != Some(n) {
                return Err(ServiceError::BadRequest(format!(
                    "profile covers {:?} levels but n = {n}",
                    p.domain_size()
                )));
            }
        }
        let record = SessionRecord {
            id: id.clone(),
            strategy,
            n,
            mode,
            profile: profile.clone(),
            seed,
            state: state.clone(),
            created_at: ts,
            updated_at: ts,
        };
        let event = SessionEvent {
            ts,
            session_id: id,
            body: EventBody::Created {
                strategy,
                n,
                mode,
                profile,
                seed,
                state,
            },
        };
        Ok((record, event))
    }

    pub fn frustration(&self) -> FrustrationMeasure {
        measure(self.state.trace())
    }

    /// Issue the next probe. Returns the `probe_issued` event.
    pub fn issue(&mut self, ts: DateTime<Utc>) -> Result<SessionEvent, ServiceError> {
        let level = self
            .state
            .next_probe()
            .map_err(|e| ServiceError::Conflict(e.to_string()))?;
        self.updated_at = ts;
        Ok(self.event(
            ts,
            EventBody::ProbeIssued {
                seq: self.state.trace().len() + 1,
                level,
                state: self.state.clone(),
            },
        ))
    }

    /// Record the outcome of the pending probe. Returns `answer_recorded`,
    /// followed by `finished` when the search ends.
    pub fn answer(
        &mut self,
        outcome: Outcome,
        ts: DateTime<Utc>,
    ) -> Result<Vec<SessionEvent>, ServiceError> {
        let level = self
            .state
            .pending()
            .ok_or_else(|| ServiceError::Conflict("no probe is pending".into()))?;
        self.state
            .observe(outcome)
            .map_err(|e| ServiceError::Conflict(e.to_string()))?;
        self.updated_at = ts;
        let mut events = vec![self.event(
            ts,
            EventBody::AnswerRecorded {
                seq: self.state.trace().len(),
                level,
                outcome,
                state: self.state.clone(),
            },
        )];
        if let Some(result) = self.state.result() {
            let m = self.frustration();
            events.push(self.event(
                ts,
                EventBody::Finished {
                    result,
                    negatives: m.negatives,
                    total: m.total,
                    state: self.state.clone(),
                },
            ));
        }
        Ok(events)
    }

    /// Answer the pending probe from the session's own profile.
    pub fn auto_outcome(&self) -> Result<Outcome, ServiceError> {
        let profile = self.profile.as_ref().ok_or_else(|| {
            ServiceError::Conflict("live sessions are answered by the client".into())
        })?;
        let level = self
            .state
            .pending()
            .ok_or_else(|| ServiceError::Conflict("no probe is pending".into()))?;
        let key = StreamKey {
            seed: self.seed,
            session: &self.id,
            seq: self.state.trace().len() + 1,
        };
        profile
            .answer(level, &key)
            .map_err(|e| ServiceError::BadRequest(e.to_string()))
    }

    fn event(&self, ts: DateTime<Utc>, body: EventBody) -> SessionEvent {
        SessionEvent {
            ts,
            session_id: self.id.clone(),
            body,
        }
    }

    /// Re-run the transition named by `event` and check it reproduces the
    /// recorded payload.
    fn apply(&mut self, event: &SessionEvent) -> Result<(), String> {
        match &event.body {
            EventBody::Created { .. } => return Err("session created twice".into()),
            EventBody::ProbeIssued { seq, level, .. } => {
                let got = self.issue(event.ts).map_err(|e| e.to_string())?;
                match &got.body {
                    EventBody::ProbeIssued {
                        seq: s, level: l, ..
                    } if s == seq && l == level => {}
                    _ => return Err(format!("replayed probe differs from logged level {level}")),
                }
            }
            EventBody::AnswerRecorded { level, outcome, .. } => {
                if self.state.pending() != Some(*level) {
                    return Err(format!(
                        "answer for level {level} but pending is {:?}",
                        self.state.pending()
                    ));
                }
                self.answer(*outcome, event.ts).map_err(|e| e.to_string())?;
            }
            EventBody::Finished {
                result,
                negatives,
                total,
                ..
            } => {
                let m = self.frustration();
                if self.state.result() != Some(*result)
                    || m.negatives != *negatives
                    || m.total != *total
                {
                    return Err("finished event disagrees with replayed state".into());
                }
                self.updated_at = event.ts;
            }
        }
        if &self.state != event.body.state() {
            return Err(format!(
                "replayed state differs from logged state after {}",
                event.body.name()
            ));
        }
        Ok(())
    }
}

/// Append-only JSONL writer. Without a path, events are dropped.
#[derive(Debug)]
pub struct EventLog {
    path: Option<PathBuf>,
    file: Option<File>,
}

impl EventLog {
    pub fn in_memory() -> Self {
        Self {
            path: None,
            file: None,
        }
    }

    pub fn open(path: &Path) -> Result<Self, ServiceError> {
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|source| ServiceError::Storage {
                path: path.to_path_buf(),
                source,
            })?;
        Ok(Self {
            path: Some(path.to_path_buf()),
            file: Some(file),
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    /// Write the events and sync them to disk before returning.
    pub fn append(&mut self, events: &[SessionEvent]) -> Result<(), ServiceError> {
        let (Some(file), Some(path)) = (self.file.as_mut(), self.path.as_ref()) else {
            return Ok(());
        };
        let mut buf = Vec::new();
        for event in events {
            serde_json::to_writer(&mut buf, event).expect("events serialize");
            buf.push(b'\n');
        }
        let storage = |source| ServiceError::Storage {
            path: path.clone(),
            source,
        };
        file.write_all(&buf).map_err(storage)?;
        file.flush().map_err(storage)?;
        file.sync_data().map_err(storage)
    }
}

/// Rebuild every session from the log at `path`, in creation order.
///
/// A final line without its newline is a torn write and is ignored, leaving
/// that session at its last complete event. Any other unreadable or
/// inconsistent line is an error naming its line number.
pub fn replay(path: &Path) -> Result<Vec<SessionRecord>, ReplayError> {
    let text = std::fs::read_to_string(path).map_err(|source| ReplayError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    replay_str(&text)
}

pub fn replay_str(text: &str) -> Result<Vec<SessionRecord>, ReplayError> {
    let mut records: Vec<SessionRecord> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let lines: Vec<&str> = text.split_inclusive('\n').collect();
    for (i, raw) in lines.iter().enumerate() {
        let line_no = i + 1;
        let complete = raw.ends_with('\n');
        let line = raw.trim_end_matches(['\n', '\r']);
        if line.trim().is_empty() {
            continue;
        }
        let corrupt = |reason: String| ReplayError::Corrupt {
            line: line_no,
            reason,
        };
        let event: SessionEvent = match serde_json::from_str(line) {
            Ok(e) => e,
            Err(_) if !complete && i + 1 == lines.len() => break,
            Err(e) => return Err(corrupt(e.to_string())),
        };
        match &event.body {
            EventBody::Created {
                strategy,
                n,
                mode,
                profile,
                seed,
                state,
            } => {
                if index.contains_key(&event.session_id) {
                    return Err(corrupt(format!("duplicate session {}", event.session_id)));
                }
                let (record, _) = SessionRecord::create(
                    event.session_id.clone(),
                    *strategy,
                    *n,
                    *mode,
                    profile.clone(),
                    *seed,
                    event.ts,
                )
                .map_err(|e| corrupt(e.to_string()))?;
                if &record.state != state {
                    return Err(corrupt("created state differs from a fresh session".into()));
                }
                index.insert(record.id.clone(), records.len());
                records.push(record);
            }
            _ => {
                let &slot = index
                    .get(&event.session_id)
                    .ok_or_else(|| corrupt(format!("unknown session {}", event.session_id)))?;
                records[slot].apply(&event).map_err(corrupt)?;
            }
        }
    }
    Ok(records)
}
