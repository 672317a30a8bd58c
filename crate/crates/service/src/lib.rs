//! HTTP service for live reduction sessions: start a reduction, stream its
//! progress next to the predicted final pattern count, then accept or
//! cancel it.

pub mod api;
mod session;

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use axum::body::{Body, Bytes};
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::stream;
use tower_http::services::ServeDir;
use trimcast_core::encoder::{check_limits, EncoderConfig};
use trimcast_core::models::{MlpModel, QuadraticModel};
use trimcast_core::trimsolver::{solve_initial, SolverConfig};
use trimcast_core::{validate, Error as CoreError, ReduceConfig};

use crate::api::{CreateSession, Created, ErrorBody};
use crate::session::{Refusal, Session};

pub const DEFAULT_MAX_SESSIONS: usize = 32;
pub const DEFAULT_TTL: Duration = Duration::from_secs(3600);

#[derive(Clone, Debug)]
pub struct ServiceConfig {
    /// Reducer settings for every session; a request may override the budget.
    pub reduce: ReduceConfig,
    /// Cap on sessions that are still running.
    pub max_sessions: usize,
    /// How long a finished session stays queryable.
    pub ttl: Duration,
    /// Directory served at `/` (the built UI), if any.
    pub static_dir: Option<PathBuf>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            reduce: ReduceConfig::default(),
            max_sessions: DEFAULT_MAX_SESSIONS,
            ttl: DEFAULT_TTL,
            static_dir: None,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct Predictors {
    pub mlp: Option<MlpModel>,
    pub quadratic: Option<QuadraticModel>,
}

struct Shared {
    config: ServiceConfig,
    predictors: Predictors,
    sessions: Mutex<HashMap<String, Arc<Session>>>,
    next_id: AtomicU64,
}

#[derive(Clone)]
pub struct AppState(Arc<Shared>);

impl AppState {
    pub fn new(config: ServiceConfig, predictors: Predictors) -> Self {
        AppState(Arc::new(Shared {
            config,
            predictors,
            sessions: Mutex::new(HashMap::new()),
            next_id: AtomicU64::new(1),
        }))
    }

    fn session(&self, id: &str) -> Result<Arc<Session>, ApiError> {
        self.purge();
        self.0
            .sessions
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("no session {id:?}")))
    }

    /// Drops terminal sessions older than the TTL.
    fn purge(&self) {
        let ttl = self.0.config.ttl;
        let now = Instant::now();
        self.0
            .sessions
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .retain(|_, s| s.terminal_at().is_none_or(|t| now.duration_since(t) < ttl));
    }
}

pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError {
            status,
            message: message.into(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(ErrorBody { error: self.message })).into_response()
    }
}

pub fn router(state: AppState) -> Router {
    let static_dir = state.0.config.static_dir.clone();
    let api = Router::new()
        .route("/healthz", get(|| async { "ok" }))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(snapshot))
        .route("/sessions/{id}/events", get(events))
        .route("/sessions/{id}/cancel", post(cancel))
        .route("/sessions/{id}/accept", post(accept))
        .with_state(state);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

pub async fn serve(addr: SocketAddr, state: AppState) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state)).await
}

async fn create_session(State(app): State<AppState>, body: Bytes) -> Result<(StatusCode, Json<Created>), ApiError> {
    let req: CreateSession = serde_json::from_slice(&body)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, format!("malformed request: {e}")))?;
    let bad = |m: String| ApiError::new(StatusCode::BAD_REQUEST, m);

    let (instance, solution) = match (req.record, req.instance) {
        (Some(rec), None) => (rec.instance, Some(rec.initial)),
        (None, Some(inst)) => (inst, req.solution),
        (Some(_), Some(_)) => return Err(bad("give either `record` or `instance`, not both".into())),
        (None, None) => return Err(bad("missing `instance` or `record`".into())),
    };
    instance.check().map_err(|e| bad(e.to_string()))?;
    let initial = match solution {
        Some(s) => s,
        None => solve_initial(&instance, &SolverConfig::default()).map_err(|e| bad(e.to_string()))?,
    };
    let v = validate(&initial, &instance);
    if !v.is_valid() {
        return Err(bad(format!("invalid solution: {}", v.diagnostics.join("; "))));
    }

    let predictors = &app.0.predictors;
    let encoder = predictors.mlp.as_ref().map_or_else(EncoderConfig::default, |m| m.encoder);
    check_limits(&initial, encoder.rows, encoder.slots).map_err(|e| match e {
        CoreError::SolutionTooLarge { .. } | CoreError::PatternTooWide { .. } => {
            ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.to_string())
        }
        other => bad(other.to_string()),
    })?;
    let initial_count = initial.pattern_count();
    let ml_prediction = match &predictors.mlp {
        Some(m) => Some(
            m.predict_solution(&initial, instance.master_width)
                .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()))?,
        ),
        None => None,
    };
    let naive_prediction = predictors.quadratic.as_ref().map(|q| q.predict(initial_count as f64));

    let mut reduce = app.0.config.reduce.clone();
    if let Some(b) = req.budget {
        reduce.budget = b;
    }
    reduce.check().map_err(|e| bad(e.to_string()))?;

    app.purge();
    let session = {
        let mut sessions = app.0.sessions.lock().unwrap_or_else(|e| e.into_inner());
        let running = sessions.values().filter(|s| s.is_running()).count();
        if running >= app.0.config.max_sessions {
            return Err(ApiError::new(
                StatusCode::SERVICE_UNAVAILABLE,
                format!("{running} sessions already running"),
            ));
        }
        let id = format!("s{:06}", app.0.next_id.fetch_add(1, Ordering::Relaxed));
        let s = Session::new(id.clone(), instance, initial, reduce, ml_prediction, naive_prediction);
        sessions.insert(id, Arc::clone(&s));
        s
    };
    session.start();
    log::info!("session {} started ({} patterns)", session.id, initial_count);
    Ok((
        StatusCode::CREATED,
        Json(Created {
            id: session.id.clone(),
            initial_count,
            ml_prediction,
            naive_prediction,
        }),
    ))
}

async fn snapshot(State(app): State<AppState>, Path(id): Path<String>) -> Result<Json<api::Snapshot>, ApiError> {
    Ok(Json(app.session(&id)?.snapshot()))
}

/// Newline-delimited JSON, one event per line, ending after the terminal
/// event.
async fn events(State(app): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let session = app.session(&id)?;
    let rx = session.subscribe();
    let lines = stream::unfold(Some((session, rx, 0usize)), |state| async move {
        let (session, mut rx, cursor) = state?;
        loop {
            rx.borrow_and_update();
            let (events, done) = session.events_since(cursor);
            if !events.is_empty() {
                let mut chunk = Vec::new();
                for e in &events {
                    serde_json::to_writer(&mut chunk, e).expect("events serialize");
                    chunk.push(b'\n');
                }
                let next = if done { None } else { Some((session, rx, cursor + events.len())) };
                return Some((Ok::<_, std::convert::Infallible>(Bytes::from(chunk)), next));
            }
            if rx.changed().await.is_err() {
                return None;
            }
        }
    });
    Ok(Response::builder()
        .header(header::CONTENT_TYPE, "application/x-ndjson")
        .header(header::CACHE_CONTROL, "no-cache")
        .body(Body::from_stream(lines))
        .expect("static response parts"))
}

async fn cancel(State(app): State<AppState>, Path(id): Path<String>) -> Result<Json<api::Outcome>, ApiError> {
    app.session(&id)?.cancel().map(Json).map_err(conflict)
}

async fn accept(State(app): State<AppState>, Path(id): Path<String>) -> Result<Json<api::Outcome>, ApiError> {
    app.session(&id)?.accept().map(Json).map_err(conflict)
}

fn conflict(r: Refusal) -> ApiError {
    let Refusal::AlreadyTerminal(state) = r;
    let state = serde_json::to_value(state).unwrap_or_default();
    ApiError::new(StatusCode::CONFLICT, format!("session already {}", state.as_str().unwrap_or("ended")))
}
