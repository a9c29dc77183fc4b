//! HTTP routes and the per-session WebSocket channel.
//!
//! ```text
//! POST   /sessions                 -> 201 {id, greeting}
//! POST   /sessions/{id}/utterance  {text} -> TurnRecord
//! GET    /sessions/{id}/state      -> state snapshot
//! DELETE /sessions/{id}            -> 204
//! GET    /sessions/{id}/ws         -> {type, payload} frames
//! ```

use std::sync::Arc;

use axum::extract::ws::rejection::WebSocketUpgradeRejection;
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{delete, get, post};
use axum::{Json, Router};
use flowbot_core::engine::{Engine, TurnRecord};
use flowbot_core::error::EngineError;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

/// Engine error as an HTTP response with an `{error}` body.
#[derive(Debug)]
pub struct ApiError(pub EngineError);

impl ApiError {
    pub fn status(&self) -> StatusCode {
        match &self.0 {
            EngineError::UnknownSession(_) => StatusCode::NOT_FOUND,
            EngineError::Busy(_) => StatusCode::CONFLICT,
            EngineError::SessionDone => StatusCode::GONE,
            EngineError::Stage { .. } | EngineError::Config(_) | EngineError::Io(_) => {
                StatusCode::INTERNAL_SERVER_ERROR
            }
        }
    }
}

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> Self {
        ApiError(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = self.status();
        if status.is_server_error() {
            tracing::error!(error = %self.0, "request failed");
        }
        (status, Json(json!({ "error": self.0.to_string() }))).into_response()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameKind {
    Utterance,
    Reply,
    State,
    Error,
}

/// One WebSocket message. The client sends `utterance` frames whose payload
/// is `{"text": ...}` or a bare string; the server answers each with a
/// `reply` carrying the turn record and a `state` carrying the snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    #[serde(rename = "type")]
    pub kind: FrameKind,
    #[serde(default)]
    pub payload: Value,
}

impl Frame {
    pub fn new(kind: FrameKind, payload: impl Serialize) -> Self {
        Frame {
            kind,
            payload: serde_json::to_value(payload).unwrap_or(Value::Null),
        }
    }

    fn error(status: StatusCode, message: impl Into<String>) -> Self {
        Frame::new(
            FrameKind::Error,
            json!({ "status": status.as_u16(), "message": message.into() }),
        )
    }

    /// Text of an utterance frame.
    pub fn text(&self) -> Option<&str> {
        match &self.payload {
            Value::String(s) => Some(s),
            Value::Object(o) => o.get("text").and_then(Value::as_str),
            Value::Null => Some(""),
            _ => None,
        }
    }
}

#[derive(Debug, Deserialize)]
struct UtteranceBody {
    #[serde(default)]
    text: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Created {
    pub id: String,
    pub greeting: TurnRecord,
}

type Shared = State<Arc<Engine>>;

pub fn router(engine: Arc<Engine>) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", delete(close_session))
        .route("/sessions/{id}/utterance", post(utterance))
        .route("/sessions/{id}/state", get(state))
        .route("/sessions/{id}/ws", get(socket))
        .with_state(engine)
}

/// Runs blocking engine work (the external NLU call may block) off the
/// async workers.
async fn blocking<T: Send + 'static>(
    engine: &Arc<Engine>,
    f: impl FnOnce(&Engine) -> Result<T, EngineError> + Send + 'static,
) -> Result<T, EngineError> {
    let engine = engine.clone();
    tokio::task::spawn_blocking(move || f(&engine))
        .await
        .unwrap_or_else(|e| Err(EngineError::Config(format!("turn task failed: {e}"))))
}

async fn create_session(State(engine): Shared) -> Result<(StatusCode, Json<Created>), ApiError> {
    let created = blocking(&engine, |engine| {
        let id = engine.open_session()?;
        let greeting = engine.run_turn(&id, "")?;
        Ok(Created { id, greeting })
    })
    .await?;
    tracing::info!(session = %created.id, "session opened");
    Ok((StatusCode::CREATED, Json(created)))
}

async fn utterance(
    State(engine): Shared,
    Path(id): Path<String>,
    Json(body): Json<UtteranceBody>,
) -> Result<Json<TurnRecord>, ApiError> {
    let record = blocking(&engine, move |engine| engine.run_turn(&id, &body.text)).await?;
    Ok(Json(record))
}

async fn state(State(engine): Shared, Path(id): Path<String>) -> Result<Json<Value>, ApiError> {
    Ok(Json(engine.get_state(&id)?))
}

async fn close_session(State(engine): Shared, Path(id): Path<String>) -> Result<StatusCode, ApiError> {
    let turns = blocking(&engine, {
        let id = id.clone();
        move |engine| engine.close_session(&id)
    })
    .await?;
    tracing::info!(session = %id, turns = turns.len(), "session closed");
    Ok(StatusCode::NO_CONTENT)
}

async fn socket(
    State(engine): Shared,
    Path(id): Path<String>,
    ws: Result<WebSocketUpgrade, WebSocketUpgradeRejection>,
) -> Response {
    if let Err(e) = engine.get_state(&id) {
        return ApiError(e).into_response();
    }
    match ws {
        Ok(ws) => ws.on_upgrade(move |socket| serve_socket(engine, id, socket)),
        Err(rejection) => rejection.into_response(),
    }
}

async fn send(socket: &mut WebSocket, frame: &Frame) -> bool {
    let text = serde_json::to_string(frame).expect("frames serialize");
    socket.send(Message::Text(text.into())).await.is_ok()
}

/// On connect the client gets every turn so far as `reply` frames and then
/// the current `state`, so a reconnecting client can rebuild its view.
async fn serve_socket(engine: Arc<Engine>, id: String, mut socket: WebSocket) {
    let Ok(transcript) = engine.transcript(&id) else { return };
    for record in &transcript {
        if !send(&mut socket, &Frame::new(FrameKind::Reply, record)).await {
            return;
        }
    }
    if let Ok(snapshot) = engine.get_state(&id) {
        if !send(&mut socket, &Frame::new(FrameKind::State, snapshot)).await {
            return;
        }
    }

    while let Some(Ok(message)) = socket.recv().await {
        let text = match message {
            Message::Text(text) => text,
            Message::Close(_) => break,
            _ => continue,
        };
        let frames = match serde_json::from_str::<Frame>(&text) {
            Ok(frame) if frame.kind == FrameKind::Utterance => match frame.text() {
                Some(utterance) => turn(&engine, &id, utterance.to_string()).await,
                None => vec![Frame::error(StatusCode::BAD_REQUEST, "utterance payload must be text")],
            },
            Ok(frame) => vec![Frame::error(
                StatusCode::BAD_REQUEST,
                format!("clients send utterance frames, not {:?}", frame.kind),
            )],
            Err(e) => vec![Frame::error(StatusCode::BAD_REQUEST, e.to_string())],
        };
        for frame in &frames {
            if !send(&mut socket, frame).await {
                return;
            }
        }
    }
}

async fn turn(engine: &Arc<Engine>, id: &str, utterance: String) -> Vec<Frame> {
    let owned = id.to_string();
    match blocking(engine, move |engine| engine.run_turn(&owned, &utterance)).await {
        Ok(record) => {
            let mut frames = vec![Frame::new(FrameKind::Reply, &record)];
            if let Ok(snapshot) = engine.get_state(id) {
                frames.push(Frame::new(FrameKind::State, snapshot));
            }
            frames
        }
        Err(e) => {
            let e = ApiError(e);
            vec![Frame::error(e.status(), e.0.to_string())]
        }
    }
}
