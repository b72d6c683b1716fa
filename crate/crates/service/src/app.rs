//! HTTP and WebSocket endpoints over the session state machine.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use axum::body::Bytes;
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use bmsi_core::session::{interaction_blocks, step, Decoder, Event, Metrics, SearchContext, SessionLog, SessionState};
use bmsi_core::serp::SatisfactionFeedback;
use bmsi_core::stimulus::{keyboard_layout, luminance, tag_for_target, target_index};
use bmsi_core::synth::{synth_satisfaction_eeg, synth_ssvep, SynthSpec};
use bmsi_core::{EegWindow, Error, SystemConfig};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::sync::{Mutex, RwLock};
use tracing::{debug, warn};

use crate::wire::*;

struct Session {
    state: SessionState,
    log: Option<SessionLog>,
}

/// Shared service state. Sessions are independent; each is serialized by
/// its own lock.
pub struct AppState {
    pub decoder: Arc<Decoder>,
    pub ctx: Arc<SearchContext>,
    pub metrics: Metrics,
    pub log_dir: Option<PathBuf>,
    sessions: RwLock<HashMap<String, Arc<Mutex<Session>>>>,
}

impl AppState {
    pub fn new(decoder: Decoder, ctx: SearchContext, log_dir: Option<PathBuf>) -> Self {
        Self {
            decoder: Arc::new(decoder),
            ctx: Arc::new(ctx),
            metrics: Metrics::default(),
            log_dir,
            sessions: RwLock::new(HashMap::new()),
        }
    }

    fn config(&self) -> &SystemConfig {
        &self.ctx.config
    }

    async fn session(&self, id: &str) -> Result<Arc<Mutex<Session>>, ApiError> {
        self.sessions
            .read()
            .await
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("unknown session {id}")))
    }
}

pub type Shared = Arc<AppState>;

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub message: String,
}

impl ApiError {
    pub fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, message)
    }
}

impl From<Error> for ApiError {
    fn from(err: Error) -> Self {
        let status = match err {
            Error::NotFound(_) => StatusCode::NOT_FOUND,
            Error::PhaseMismatch { .. } => StatusCode::CONFLICT,
            Error::Io(_) => StatusCode::INTERNAL_SERVER_ERROR,
            _ => StatusCode::BAD_REQUEST,
        };
        Self::new(status, err.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

pub fn router(state: Shared) -> Router {
    Router::new()
        .route("/layout", get(layout))
        .route("/layout/luminance", get(luminance_table))
        .route("/synth", post(synth))
        .route("/session", post(create_session))
        .route("/session/{id}", get(get_session))
        .route("/session/{id}/eeg", post(post_eeg))
        .route("/session/{id}/feedback", post(post_feedback))
        .route("/session/{id}/stream", get(stream))
        .route("/metrics", get(metrics))
        .with_state(state)
}

async fn layout(State(app): State<Shared>) -> Result<Json<Layout>, ApiError> {
    let config = app.config();
    let keys = keyboard_layout(&config.stimulus())?
        .into_iter()
        .map(|(key, tag)| LayoutKey {
            key: key.label,
            k: key.k,
            row: key.row,
            col: key.col,
            f: tag.f,
            phi: tag.phi,
        })
        .collect();
    let blocks = interaction_blocks(config)?
        .into_iter()
        .map(|b| LayoutBlock {
            k: b.k,
            action: b.action,
            f: b.tag.f,
            phi: b.tag.phi,
        })
        .collect();
    Ok(Json(Layout {
        refresh_rate: config.refresh_rate,
        keys,
        blocks,
    }))
}

#[derive(Debug, Deserialize)]
struct LuminanceQuery {
    frames: Option<u64>,
}

async fn luminance_table(State(app): State<Shared>, Query(q): Query<LuminanceQuery>) -> Result<Json<LuminanceTable>, ApiError> {
    let config = app.config();
    let frames = q.frames.unwrap_or(config.refresh_rate.round() as u64);
    if frames > 100_000 {
        return Err(ApiError::bad_request("at most 100000 frames"));
    }
    let keys = keyboard_layout(&config.stimulus())?
        .into_iter()
        .map(|(key, tag)| {
            let values = (0..frames)
                .map(|i| luminance(&tag, i, config.refresh_rate))
                .collect::<bmsi_core::Result<Vec<_>>>()?;
            Ok(LuminanceRow { k: key.k, values })
        })
        .collect::<bmsi_core::Result<Vec<_>>>()?;
    Ok(Json(LuminanceTable {
        refresh_rate: config.refresh_rate,
        frames,
        keys,
    }))
}

async fn synth(State(app): State<Shared>, Json(req): Json<SynthRequest>) -> Result<Json<EegMessage>, ApiError> {
    let config = app.config().clone();
    let window = tokio::task::spawn_blocking(move || synth_window(&config, req))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))??;
    Ok(Json(EegMessage::from_window(window)))
}

fn synth_window(config: &SystemConfig, req: SynthRequest) -> Result<EegWindow, ApiError> {
    let check_duration = |d: f64| {
        if d > 0.0 && d <= 10.0 {
            Ok(d)
        } else {
            Err(ApiError::bad_request("duration_s must lie in (0, 10]"))
        }
    };
    match req {
        SynthRequest::Ssvep {
            k,
            key,
            duration_s,
            snr_db,
            seed,
        } => {
            let k = match (k, key) {
                (Some(k), _) => k,
                (None, Some(key)) => target_index(key),
                (None, None) => return Err(ApiError::bad_request("give a target index `k` or a `key`")),
            };
            let duration = check_duration(duration_s.unwrap_or(config.window_s))?;
            let tag = tag_for_target(k, &config.stimulus())?;
            let spec = SynthSpec::new(Some(k), duration, config.sampling_rate, 9, config.n_harmonics)
                .with_snr(snr_db.unwrap_or(f64::INFINITY))
                .with_seed(seed);
            Ok(synth_ssvep(&spec, &tag)?)
        }
        SynthRequest::Satisfaction {
            satisfied,
            duration_s,
            seed,
        } => {
            let duration = check_duration(duration_s.unwrap_or(1.0))?;
            Ok(synth_satisfaction_eeg(satisfied, duration, config.sampling_rate, seed)?)
        }
    }
}

async fn create_session(State(app): State<Shared>) -> Result<(StatusCode, Json<CreatedSession>), ApiError> {
    let id = uuid::Uuid::new_v4().simple().to_string();
    let log = match &app.log_dir {
        Some(dir) => Some(SessionLog::create(dir.join(format!("{id}.jsonl")), &id)?),
        None => None,
    };
    let state = SessionState::default();
    let view = SessionView::new(&id, &state, app.config());
    app.sessions
        .write()
        .await
        .insert(id.clone(), Arc::new(Mutex::new(Session { state, log })));
    debug!(session = %id, "session created");
    Ok((StatusCode::CREATED, Json(CreatedSession { session_id: id, state: view })))
}

async fn get_session(State(app): State<Shared>, Path(id): Path<String>) -> Result<Json<SessionView>, ApiError> {
    let session = app.session(&id).await?;
    let session = session.lock().await;
    Ok(Json(SessionView::new(&id, &session.state, app.config())))
}

/// Applies an event and appends whatever it logged.
fn commit(session: &mut Session, next: SessionState) -> Result<(), ApiError> {
    let before = session.state.event_log.len();
    if let Some(log) = session.log.as_mut() {
        log.append_new(&next, before)?;
    }
    session.state = next;
    Ok(())
}

/// Decodes one window against a session and applies the result.
pub async fn process_window(app: &Shared, id: &str, window: EegWindow, intended_k: Option<usize>) -> Result<DecodeResponse, ApiError> {
    let session = app.session(id).await?;
    let mut session = session.lock().await;
    let phase = session.state.phase;
    let decoder = app.decoder.clone();
    let decoded = tokio::task::spawn_blocking(move || decoder.decode(phase, &window))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    let config = app.config();
    let decoded = match decoded {
        Ok(d) => d,
        Err(Error::NoDecision { confidence, threshold }) => {
            app.metrics.record_no_decision();
            return Ok(DecodeResponse::NoDecision {
                confidence,
                threshold,
                retry_window_s: config.retry_window_s,
                state: SessionView::new(id, &session.state, config),
            });
        }
        Err(e) => {
            app.metrics.record_error();
            return Err(e.into());
        }
    };
    app.metrics.record_decode(decoded.elapsed_ms, config.violation_ms);
    if decoded.elapsed_ms > config.violation_ms {
        warn!(session = %id, elapsed_ms = decoded.elapsed_ms, "decode exceeded latency budget");
    }
    if let (Some(want), Some(got)) = (intended_k, decoded.best_k) {
        app.metrics.record_labeled(want == got);
    }
    match step(&session.state, &app.ctx, decoded.event.clone(), now_ms()) {
        Ok((next, actions)) => {
            commit(&mut session, next)?;
            Ok(DecodeResponse::Accepted {
                decoded,
                actions,
                state: SessionView::new(id, &session.state, config),
            })
        }
        Err(e) => Ok(DecodeResponse::Rejected {
            decoded,
            reason: e.to_string(),
            state: SessionView::new(id, &session.state, config),
        }),
    }
}

fn parse_window(headers: &HeaderMap, body: &[u8], path_id: &str) -> Result<(EegWindow, Option<usize>), ApiError> {
    let content_type = headers
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .unwrap_or("application/json");
    if content_type.starts_with("application/octet-stream") {
        return Ok((EegWindow::from_binary(body)?, None));
    }
    let msg: EegMessage =
        serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("malformed EEG message: {e}")))?;
    message_window(msg, path_id)
}

fn message_window(msg: EegMessage, path_id: &str) -> Result<(EegWindow, Option<usize>), ApiError> {
    if let Some(sid) = &msg.session_id {
        if sid != path_id {
            return Err(ApiError::bad_request(format!("message is for session {sid}, not {path_id}")));
        }
    }
    let intended = msg.intended_k;
    Ok((msg.into_window()?, intended))
}

async fn post_eeg(
    State(app): State<Shared>,
    Path(id): Path<String>,
    headers: HeaderMap,
    body: Bytes,
) -> Result<Json<DecodeResponse>, ApiError> {
    let (window, intended) = parse_window(&headers, &body, &id)?;
    Ok(Json(process_window(&app, &id, window, intended).await?))
}

async fn post_feedback(
    State(app): State<Shared>,
    Path(id): Path<String>,
    Json(req): Json<FeedbackRequest>,
) -> Result<Json<StepResponse>, ApiError> {
    let session = app.session(&id).await?;
    let mut session = session.lock().await;
    let event = Event::Feedback(SatisfactionFeedback::manual(req.verdict));
    let (next, actions) = step(&session.state, &app.ctx, event, now_ms())?;
    commit(&mut session, next)?;
    Ok(Json(StepResponse {
        actions,
        state: SessionView::new(&id, &session.state, app.config()),
    }))
}

#[derive(Debug, Serialize)]
struct MetricsView {
    #[serde(flatten)]
    counters: bmsi_core::session::MetricsSnapshot,
    active_sessions: usize,
}

async fn metrics(State(app): State<Shared>) -> Json<MetricsView> {
    Json(MetricsView {
        counters: app.metrics.snapshot(),
        active_sessions: app.sessions.read().await.len(),
    })
}

async fn stream(State(app): State<Shared>, Path(id): Path<String>, ws: WebSocketUpgrade) -> Result<Response, ApiError> {
    app.session(&id).await?;
    Ok(ws.on_upgrade(move |socket| run_stream(app, id, socket)))
}

/// Each incoming message is one window (JSON text or the binary encoding);
/// each reply is the same JSON the HTTP endpoint returns.
async fn run_stream(app: Shared, id: String, mut socket: WebSocket) {
    while let Some(Ok(msg)) = socket.recv().await {
        let parsed = match msg {
            Message::Text(text) => serde_json::from_str::<EegMessage>(text.as_str())
                .map_err(|e| ApiError::bad_request(format!("malformed EEG message: {e}")))
                .and_then(|m| message_window(m, &id)),
            Message::Binary(bytes) => EegWindow::from_binary(&bytes).map(|w| (w, None)).map_err(ApiError::from),
            Message::Close(_) => break,
            _ => continue,
        };
        let reply = match parsed {
            Ok((window, intended)) => process_window(&app, &id, window, intended).await,
            Err(e) => Err(e),
        };
        let text = match reply {
            Ok(r) => serde_json::to_string(&r).expect("response serializes"),
            Err(e) => json!({ "status": "error", "code": e.status.as_u16(), "error": e.message }).to_string(),
        };
        if socket.send(Message::Text(text.into())).await.is_err() {
            break;
        }
    }
    debug!(session = %id, "stream closed");
}
