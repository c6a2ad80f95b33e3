//! HTTP front end for live play sessions.
//!
//! Routes:
//!
//! | method | path | body |
//! |---|---|---|
//! | POST | `/sessions` | `{condition, mode, seed?, options?}` |
//! | POST | `/sessions/{id}/players/{p}/attempts` | `{items: [id, …]}` |
//! | POST | `/sessions/{id}/players/{p}/inspect` | `{target}` |
//! | POST | `/sessions/{id}/players/{p}/inspect-item` | `{target, item}` |
//! | GET | `/sessions/{id}/players/{p}/view` | |
//! | GET | `/sessions/{id}/log` | JSON lines |
//! | GET | `/sessions/{id}/events?from=n` | server-sent events |
//!
//! The event stream sends every log entry from index `from` as an
//! `attempt`, `social_copy`, `inspect`, … event whose id is its log index,
//! interleaved with `tick` events carrying the scoreboard and clock, and
//! finishes with `end` once the session has expired.

use std::convert::Infallible;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures_util::stream::{self, Stream, StreamExt};
use serde::{Deserialize, Serialize};
use totem_core::event::write_jsonl;
use totem_core::session::{Condition, PlayMode, ScoreEntry, SessionError, SessionManager, SessionOptions};
use totem_core::task::ItemId;

/// Source of "now" in milliseconds; swapped for a manual clock in tests.
pub trait Clock: Send + Sync {
    fn now_ms(&self) -> u64;
}

pub struct SystemClock(Instant);

impl Default for SystemClock {
    fn default() -> Self {
        Self(Instant::now())
    }
}

impl Clock for SystemClock {
    fn now_ms(&self) -> u64 {
        self.0.elapsed().as_millis() as u64
    }
}

#[derive(Default)]
pub struct ManualClock(AtomicU64);

impl ManualClock {
    pub fn set(&self, ms: u64) {
        self.0.store(ms, Ordering::SeqCst);
    }
}

impl Clock for ManualClock {
    fn now_ms(&self) -> u64 {
        self.0.load(Ordering::SeqCst)
    }
}

#[derive(Clone)]
pub struct AppState {
    pub manager: Arc<SessionManager>,
    pub clock: Arc<dyn Clock>,
    /// How often the event stream polls its session.
    pub poll: Duration,
}

impl AppState {
    pub fn new(manager: SessionManager, clock: Arc<dyn Clock>) -> Self {
        Self { manager: Arc::new(manager), clock, poll: Duration::from_millis(250) }
    }
}

pub struct ApiError(SessionError);

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        Self(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, code) = match &self.0 {
            SessionError::UnknownSession(_) => (StatusCode::NOT_FOUND, "unknown_session"),
            SessionError::UnknownPlayer(_) => (StatusCode::NOT_FOUND, "unknown_player"),
            SessionError::Expired => (StatusCode::CONFLICT, "expired"),
            SessionError::CapacityExceeded(_) => (StatusCode::SERVICE_UNAVAILABLE, "capacity_exceeded"),
            SessionError::NotHuman(_) => (StatusCode::FORBIDDEN, "not_human"),
            SessionError::IndividualMode => (StatusCode::CONFLICT, "individual_mode"),
            SessionError::Unowned(_) => (StatusCode::UNPROCESSABLE_ENTITY, "unowned_item"),
            SessionError::BadSize(_) => (StatusCode::UNPROCESSABLE_ENTITY, "bad_size"),
            SessionError::SelfInspection => (StatusCode::UNPROCESSABLE_ENTITY, "self_inspection"),
            SessionError::TargetLacksItem { .. } => (StatusCode::UNPROCESSABLE_ENTITY, "target_lacks_item"),
            SessionError::InvalidOptions(_) => (StatusCode::BAD_REQUEST, "invalid_options"),
        };
        (status, Json(serde_json::json!({ "error": code, "message": self.0.to_string() }))).into_response()
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateRequest {
    pub condition: Condition,
    pub mode: PlayMode,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub options: SessionOptions,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttemptRequest {
    pub items: Vec<ItemId>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InspectRequest {
    pub target: u64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InspectItemRequest {
    pub target: u64,
    pub item: ItemId,
}

#[derive(Debug, Deserialize)]
pub struct EventsQuery {
    #[serde(default)]
    pub from: usize,
}

#[derive(Debug, Serialize)]
struct Tick {
    remaining_ms: u64,
    started: bool,
    expired: bool,
    scoreboard: Vec<ScoreEntry>,
    log_len: usize,
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/players/{p}/attempts", post(submit_attempt))
        .route("/sessions/{id}/players/{p}/inspect", post(inspect))
        .route("/sessions/{id}/players/{p}/inspect-item", post(inspect_item))
        .route("/sessions/{id}/players/{p}/view", get(view))
        .route("/sessions/{id}/log", get(log))
        .route("/sessions/{id}/events", get(events))
        .with_state(state)
}

async fn create_session(State(st): State<AppState>, Json(req): Json<CreateRequest>) -> Result<impl IntoResponse, ApiError> {
    let now = st.clock.now_ms();
    let (id, view) = st.manager.create(req.condition, req.mode, req.seed, req.options, now)?;
    Ok((StatusCode::CREATED, Json(serde_json::json!({ "session": id, "view": view }))))
}

async fn submit_attempt(
    State(st): State<AppState>,
    Path((id, p)): Path<(String, u64)>,
    Json(req): Json<AttemptRequest>,
) -> Result<impl IntoResponse, ApiError> {
    let session = st.manager.get(&id)?;
    let mut s = session.lock().expect("session lock");
    Ok(Json(s.submit_attempt(p, &req.items, st.clock.now_ms())?))
}

async fn inspect(
    State(st): State<AppState>,
    Path((id, p)): Path<(String, u64)>,
    Json(req): Json<InspectRequest>,
) -> Result<impl IntoResponse, ApiError> {
    let session = st.manager.get(&id)?;
    let mut s = session.lock().expect("session lock");
    let items = s.inspect_player(p, req.target, st.clock.now_ms())?;
    Ok(Json(serde_json::json!({ "target": req.target, "items": items })))
}

async fn inspect_item(
    State(st): State<AppState>,
    Path((id, p)): Path<(String, u64)>,
    Json(req): Json<InspectItemRequest>,
) -> Result<impl IntoResponse, ApiError> {
    let session = st.manager.get(&id)?;
    let mut s = session.lock().expect("session lock");
    let ingredients = s.inspect_item_recipe(p, req.target, req.item, st.clock.now_ms())?;
    Ok(Json(serde_json::json!({ "target": req.target, "item": req.item, "ingredients": ingredients })))
}

async fn view(State(st): State<AppState>, Path((id, p)): Path<(String, u64)>) -> Result<impl IntoResponse, ApiError> {
    let session = st.manager.get(&id)?;
    let mut s = session.lock().expect("session lock");
    let now = st.clock.now_ms();
    s.advance_bots(now);
    Ok(Json(s.view(p, now)?))
}

async fn log(State(st): State<AppState>, Path(id): Path<String>) -> Result<impl IntoResponse, ApiError> {
    let session = st.manager.get(&id)?;
    let mut s = session.lock().expect("session lock");
    s.advance_bots(st.clock.now_ms());
    let mut body = Vec::new();
    write_jsonl(&mut body, s.log()).expect("writing to memory");
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], body))
}

struct Cursor {
    st: AppState,
    id: String,
    next: usize,
    first: bool,
    done: bool,
}

/// Polls the session once: new log entries, a tick, and `end` on expiry.
fn poll_session(c: &mut Cursor) -> Vec<Event> {
    let Ok(session) = c.st.manager.get(&c.id) else {
        c.done = true;
        return vec![Event::default().event("end").data("{}")];
    };
    let mut s = session.lock().expect("session lock");
    let now = c.st.clock.now_ms();
    s.advance_bots(now);
    let mut out = Vec::new();
    for (i, e) in s.log().iter().enumerate().skip(c.next) {
        let kind = serde_json::to_value(e.kind).expect("kind serializes");
        out.push(
            Event::default()
                .id(i.to_string())
                .event(kind.as_str().unwrap_or("event"))
                .data(serde_json::to_string(e).expect("event serializes")),
        );
    }
    c.next = c.next.max(s.log().len());
    let view = s.view(0, now).expect("player 0 always exists");
    let tick = Tick {
        remaining_ms: view.remaining_ms,
        started: view.started,
        expired: view.expired,
        scoreboard: view.scoreboard,
        log_len: view.log_len,
    };
    out.push(Event::default().event("tick").data(serde_json::to_string(&tick).expect("tick serializes")));
    if view.expired {
        out.push(Event::default().event("end").data("{}"));
        c.done = true;
    }
    out
}

async fn events(
    State(st): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<EventsQuery>,
) -> Result<Sse<impl Stream<Item = Result<Event, Infallible>>>, ApiError> {
    st.manager.get(&id)?;
    let poll = st.poll;
    let cursor = Cursor { st, id, next: q.from, first: true, done: false };
    let batches = stream::unfold(cursor, move |mut c| async move {
        if c.done {
            return None;
        }
        if !c.first {
            tokio::time::sleep(poll).await;
        }
        c.first = false;
        let batch = poll_session(&mut c);
        Some((batch, c))
    });
    let flat = batches.flat_map(|b| stream::iter(b.into_iter().map(Ok)));
    Ok(Sse::new(flat).keep_alive(KeepAlive::default()))
}

/// Binds `addr` and serves until the process is stopped.
pub async fn serve(addr: &str, state: AppState) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(state)).await
}
