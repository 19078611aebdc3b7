//! HTTP service for live adaptive difficulty sessions.
//!
//! An experimenter creates a session, asks for the level to present, and
//! reports whether the subject passed. Sessions persist to an append-only
//! JSONL event log and are rebuilt from it on restart.
//!
//! ```text
//! POST /sessions               {"strategy","n","mode","profile"?} -> 201 session view
//! GET  /sessions/{id}/next     -> {"done":false,"probe":L} | {"done":true,"result","frustration"}
//! POST /sessions/{id}/answer   {"outcome":"pass"|"fail"} -> session view
//! GET  /sessions/{id}          -> session view with history and running frustration
//! ```

pub mod error;
pub mod events;
pub mod http;
pub mod store;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

pub use error::{ReplayError, ServiceError};
pub use events::{replay, replay_str, EventLog, SessionEvent, SessionMode, SessionRecord};
pub use http::router;
pub use store::{CreateRequest, NextResponse, SessionStore, SessionView};

#[derive(Debug, Clone)]
pub struct ServeConfig {
    pub addr: SocketAddr,
    pub log_path: Option<PathBuf>,
    pub static_dir: Option<PathBuf>,
    pub seed: u64,
}

/// Open (and replay) the event log and build the store.
pub fn open_store(
    log_path: Option<&std::path::Path>,
    seed: u64,
) -> Result<SessionStore, ServiceError> {
    let Some(path) = log_path else {
        return Ok(SessionStore::new(EventLog::in_memory(), seed));
    };
    let records = if path.exists() {
        replay(path)?
    } else {
        Vec::new()
    };
    Ok(SessionStore::with_sessions(
        EventLog::open(path)?,
        seed,
        records,
    ))
}

/// Bind the listener and serve until the process is interrupted.
pub async fn serve(config: ServeConfig) -> Result<(), ServiceError> {
    let store = Arc::new(open_store(config.log_path.as_deref(), config.seed)?);
    let bind_error = |source| ServiceError::Storage {
        path: PathBuf::from(config.addr.to_string()),
        source,
    };
    let listener = tokio::net::TcpListener::bind(config.addr)
        .await
        .map_err(bind_error)?;
    eprintln!(
        "listening on http://{} ({} sessions restored)",
        listener.local_addr().unwrap_or(config.addr),
        store.len()
    );
    serve_on(listener, store, config.static_dir, async {
        let _ = tokio::signal::ctrl_c().await;
    })
    .await
    .map_err(bind_error)
}

/// Serve on an already bound listener until `shutdown` resolves.
pub async fn serve_on(
    listener: tokio::net::TcpListener,
    store: Arc<SessionStore>,
    static_dir: Option<PathBuf>,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(store, static_dir))
        .with_graceful_shutdown(shutdown)
        .await
}
