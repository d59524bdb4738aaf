//! HTTP and WebSocket routes.
//!
//! | route | reply |
//! |---|---|
//! | `POST /session` | `201 {"id": n}` |
//! | `GET /session/{id}` | session snapshot |
//! | `DELETE /session/{id}` | `204`; open streams close |
//! | `GET /session/{id}/map` | map document |
//! | `POST /session/{id}/goal` `{"h": i, "v": j}` | plan summary |
//! | `GET /session/{id}/stream` | WebSocket of state events |
//!
//! Errors are `{"error": {"code": "...", "message": "..."}}`.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::ws::{CloseFrame, Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use omninav::mapping::OccupancyGridMap;
use omninav::GridCell;
use serde::Deserialize;
use serde_json::json;
use tokio::sync::watch;
use tokio::time::{interval_at, Instant};

use crate::config::Settings;
use crate::session::{EventKind, GoalError, SessionCore, SessionHandle, StateEvent, Timing};

#[derive(Debug, Clone, PartialEq)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
        }
    }

    fn unknown_session(id: &str) -> Self {
        ApiError::new(StatusCode::NOT_FOUND, "unknown_session", format!("no session {id:?}"))
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({ "error": { "code": self.code, "message": self.message } });
        (self.status, Json(body)).into_response()
    }
}

impl From<GoalError> for ApiError {
    fn from(e: GoalError) -> Self {
        let status = match e {
            GoalError::OutsideMap(_) | GoalError::Unreachable(_) | GoalError::Plan(_) => StatusCode::UNPROCESSABLE_ENTITY,
            GoalError::NotLocalized { .. } => StatusCode::CONFLICT,
            GoalError::Closed => StatusCode::GONE,
        };
        ApiError::new(status, e.code(), e.to_string())
    }
}

pub struct AppState {
    settings: Settings,
    map: OccupancyGridMap,
    start: GridCell,
    sessions: Mutex<HashMap<u64, Arc<SessionHandle>>>,
    next_id: AtomicU64,
}

impl AppState {
    pub fn new(settings: Settings, map: OccupancyGridMap, start: GridCell) -> Arc<Self> {
        Arc::new(AppState {
            settings,
            map,
            start,
            sessions: Mutex::new(HashMap::new()),
            next_id: AtomicU64::new(1),
        })
    }

    fn session(&self, id: &str) -> Result<Arc<SessionHandle>, ApiError> {
        let key: u64 = id.parse().map_err(|_| ApiError::unknown_session(id))?;
        self.sessions
            .lock()
            .expect("session table lock")
            .get(&key)
            .cloned()
            .ok_or_else(|| ApiError::unknown_session(id))
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/session", post(create_session))
        .route("/session/{id}", get(session_snapshot).delete(delete_session))
        .route("/session/{id}/map", get(session_map))
        .route("/session/{id}/goal", post(set_goal))
        .route("/session/{id}/stream", get(stream))
        .with_state(state)
}

async fn create_session(State(app): State<Arc<AppState>>) -> impl IntoResponse {
    let id = app.next_id.fetch_add(1, Ordering::Relaxed);
    let run = &app.settings.run;
    let core = SessionCore::new(id, app.map.clone(), app.start, run.episode.clone(), run.scale);
    let timing = Timing {
        tick_period: app.settings.service.tick_period(),
        ticks_per_wakeup: app.settings.service.ticks_per_wakeup,
    };
    let handle = Arc::new(SessionHandle::spawn(core, timing));
    app.sessions.lock().expect("session table lock").insert(id, handle);
    tracing::info!(id, "session created");
    (StatusCode::CREATED, Json(json!({ "id": id })))
}

async fn session_snapshot(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let snap = app
        .session(&id)?
        .snapshot()
        .await
        .ok_or_else(|| ApiError::unknown_session(&id))?;
    Ok(Json(snap).into_response())
}

async fn delete_session(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> Result<StatusCode, ApiError> {
    let key: u64 = id.parse().map_err(|_| ApiError::unknown_session(&id))?;
    let handle = app
        .sessions
        .lock()
        .expect("session table lock")
        .remove(&key)
        .ok_or_else(|| ApiError::unknown_session(&id))?;
    // Requests still holding the handle finish first; the loop stops with
    // the last reference.
    if let Ok(handle) = Arc::try_unwrap(handle) {
        handle.close().await;
    }
    Ok(StatusCode::NO_CONTENT)
}

async fn session_map(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let json = app.session(&id)?.map_json();
    Ok(([(header::CONTENT_TYPE, "application/json")], json.as_str().to_owned()).into_response())
}

#[derive(Debug, Deserialize)]
struct GoalRequest {
    h: i64,
    v: i64,
}

async fn set_goal(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Response, ApiError> {
    let session = app.session(&id)?;
    let malformed = |msg: String| ApiError::new(StatusCode::BAD_REQUEST, "malformed_request", msg);
    let value: serde_json::Value = serde_json::from_slice(&body).map_err(|e| malformed(e.to_string()))?;
    if !value.is_object() {
        return Err(malformed("expected an object {\"h\": int, \"v\": int}".into()));
    }
    let req: GoalRequest = serde_json::from_value(value).map_err(|e| malformed(e.to_string()))?;
    let summary = session.set_goal(GridCell::new(req.h, req.v)).await?;
    Ok(Json(summary).into_response())
}

async fn stream(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    ws: WebSocketUpgrade,
) -> Result<Response, ApiError> {
    let events = app.session(&id)?.subscribe();
    let heartbeat = app.settings.service.heartbeat();
    Ok(ws.on_upgrade(move |socket| pump(socket, events, heartbeat)))
}

async fn send_event(socket: &mut WebSocket, event: &StateEvent) -> bool {
    let text = serde_json::to_string(event).expect("events serialize");
    socket.send(Message::Text(text.into())).await.is_ok()
}

/// Forwards the latest state on every change. A slow client only ever sees
/// the newest snapshot, so the control loop never waits on it.
async fn pump(mut socket: WebSocket, mut events: watch::Receiver<StateEvent>, heartbeat: Duration) {
    let first = events.borrow_and_update().clone();
    if !send_event(&mut socket, &first).await {
        return;
    }
    let mut beat = interval_at(Instant::now() + heartbeat, heartbeat);
    loop {
        tokio::select! {
            changed = events.changed() => {
                if changed.is_err() {
                    let frame = CloseFrame { code: 1000, reason: "session closed".into() };
                    let _ = socket.send(Message::Close(Some(frame))).await;
                    return;
                }
                let event = events.borrow_and_update().clone();
                if !send_event(&mut socket, &event).await {
                    return;
                }
                beat.reset();
            }
            _ = beat.tick() => {
                let mut event = events.borrow().clone();
                event.kind = EventKind::Heartbeat;
                if !send_event(&mut socket, &event).await {
                    return;
                }
            }
            msg = socket.recv() => match msg {
                None | Some(Err(_)) | Some(Ok(Message::Close(_))) => return,
                Some(Ok(_)) => {}
            },
        }
    }
}
