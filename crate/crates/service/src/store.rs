use std::collections::HashMap;
use std::sync::{Arc, Mutex, MutexGuard};

use catsearch_core::{
    AbilityProfile, DifficultyLevel, FrustrationMeasure, Outcome, ProbeRecord, SearchSession,
    Status, StrategyKind,
};
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::ServiceError;
use crate::events::{EventLog, SessionMode, SessionRecord};

/// Body of `POST /sessions`. Fields stay loosely typed so bad values map to
/// 400 responses with a useful message.
#[derive(Debug, Clone, Default, Deserialize)]
pub struct CreateRequest {
    pub strategy: String,
    pub n: i64,
    #[serde(default)]
    pub mode: Option<String>,
    #[serde(default)]
    pub profile: Option<serde_json::Value>,
}

/// Reply of `GET /sessions/{id}/next`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NextResponse {
    Probe {
        done: bool,
        probe: DifficultyLevel,
        /// Set when the service answered the probe itself.
        #[serde(skip_serializing_if = "Option::is_none", default)]
        outcome: Option<Outcome>,
    },
    Done {
        done: bool,
        result: usize,
        frustration: FrustrationMeasure,
    },
}

/// Everything a client needs to render a session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub id: String,
    pub strategy: StrategyKind,
    pub n: usize,
    pub mode: SessionMode,
    pub status: Status,
    pub pending: Option<DifficultyLevel>,
    pub done: bool,
    pub result: Option<usize>,
    pub frustration: FrustrationMeasure,
    pub history: Vec<ProbeRecord>,
    pub state: SearchSession,
    pub created_at: DateTime<Utc>,
    pub updated_at: DateTime<Utc>,
}

impl From<&SessionRecord> for SessionView {
    fn from(r: &SessionRecord) -> Self {
        SessionView {
            id: r.id.clone(),
            strategy: r.strategy,
            n: r.n,
            mode: r.mode,
            status: r.state.status(),
            pending: r.state.pending(),
            done: r.state.is_done(),
            result: r.state.result(),
            frustration: r.frustration(),
            history: r.state.trace().records().to_vec(),
            state: r.state.clone(),
            created_at: r.created_at,
            updated_at: r.updated_at,
        }
    }
}

type Shared<T> = Arc<Mutex<T>>;

/// All sessions plus the log they persist to.
///
/// Each session has its own lock, held for the whole of a `next` or `answer`
/// call including the log write, so calls on one session never interleave.
/// Sessions do not block each other except for the short append itself.
#[derive(Debug)]
pub struct SessionStore {
    sessions: Mutex<HashMap<String, Shared<SessionRecord>>>,
    log: Mutex<EventLog>,
    seed: u64,
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    // a panic mid-update never leaves a half-written record: updates are
    // staged on a copy and committed after the log write
    m.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
}

impl SessionStore {
    pub fn new(log: EventLog, seed: u64) -> Self {
        Self {
            sessions: Mutex::new(HashMap::new()),
            log: Mutex::new(log),
            seed,
        }
    }

    /// Store holding previously replayed sessions.
    pub fn with_sessions(log: EventLog, seed: u64, records: Vec<SessionRecord>) -> Self {
        let store = Self::new(log, seed);
        {
            let mut map = lock(&store.sessions);
            for r in records {
                map.insert(r.id.clone(), Arc::new(Mutex::new(r)));
            }
        }
        store
    }

    pub fn len(&self) -> usize {
        lock(&self.sessions).len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn session(&self, id: &str) -> Result<Shared<SessionRecord>, ServiceError> {
        lock(&self.sessions)
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::NotFound(id.to_string()))
    }

    pub fn create(&self, req: CreateRequest) -> Result<SessionView, ServiceError> {
        let strategy: StrategyKind = req
            .strategy
            .parse()
            .map_err(|e: catsearch_core::CatError| ServiceError::BadRequest(e.to_string()))?;
        if req.n < 1 {
            return Err(ServiceError::BadRequest(format!(
                "n must be at least 1, got {}",
                req.n
            )));
        }
        let n =
            usize::try_from(req.n).map_err(|_| ServiceError::BadRequest("n too large".into()))?;
        let mode: SessionMode = req.mode.as_deref().unwrap_or("live").parse()?;
        let profile = req
            .profile
            .map(|v| {
                serde_json::from_value::<AbilityProfile>(v)
                    .map_err(|e| ServiceError::BadRequest(format!("bad profile: {e}")))
            })
            .transpose()?;

        let id = uuid::Uuid::new_v4().simple().to_string();
        let (record, event) = SessionRecord::create(
            id.clone(),
            strategy,
            n,
            mode,
            profile,
            self.seed,
            Utc::now(),
        )?;
        lock(&self.log).append(&[event])?;
        let view = SessionView::from(&record);
        lock(&self.sessions).insert(id, Arc::new(Mutex::new(record)));
        Ok(view)
    }

    /// Pending probe, issuing one if needed. Idempotent while a probe is
    /// pending. In deterministic and stochastic modes each call issues and
    /// answers one probe.
    pub fn next(&self, id: &str) -> Result<NextResponse, ServiceError> {
        let shared = self.session(id)?;
        let mut record = lock(&shared);

        if let Some(result) = record.state.result() {
            return Ok(NextResponse::Done {
                done: true,
                result,
                frustration: record.frustration(),
            });
        }
        if let Some(level) = record.state.pending() {
            return Ok(NextResponse::Probe {
                done: false,
                probe: level,
                outcome: None,
            });
        }

        let mut staged = record.clone();
        let now = Utc::now();
        let mut events = vec![staged.issue(now)?];
        let level = staged.state.pending().expect("probe was just issued");
        let mut outcome = None;
        if staged.mode != SessionMode::Live {
            let o = staged.auto_outcome()?;
            events.extend(staged.answer(o, now)?);
            outcome = Some(o);
        }
        lock(&self.log).append(&events)?;
        *record = staged;
        Ok(NextResponse::Probe {
            done: false,
            probe: level,
            outcome,
        })
    }

    pub fn answer(&self, id: &str, outcome: &str) -> Result<SessionView, ServiceError> {
        let outcome: Outcome = outcome
            .parse()
            .map_err(|e: catsearch_core::CatError| ServiceError::BadRequest(e.to_string()))?;
        let shared = self.session(id)?;
        let mut record = lock(&shared);
        if record.mode != SessionMode::Live {
            return Err(ServiceError::Conflict(
                "this session answers its own probes".into(),
            ));
        }
        if record.state.pending().is_none() {
            let why = if record.state.is_done() {
                "session is finished"
            } else {
                "no probe is pending; call next first"
            };
            return Err(ServiceError::Conflict(why.into()));
        }
        let mut staged = record.clone();
        let events = staged.answer(outcome, Utc::now())?;
        lock(&self.log).append(&events)?;
        *record = staged;
        Ok(SessionView::from(&*record))
    }

    pub fn get(&self, id: &str) -> Result<SessionView, ServiceError> {
        let shared = self.session(id)?;
        let record = lock(&shared);
        Ok(SessionView::from(&*record))
    }

    /// Snapshot of a session's full record.
    pub fn record(&self, id: &str) -> Result<SessionRecord, ServiceError> {
        let shared = self.session(id)?;
        let record = lock(&shared);
        Ok(record.clone())
    }
}
