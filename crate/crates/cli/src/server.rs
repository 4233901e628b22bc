//! JSON/HTTP service over [`Session`](crate::session::Session).
//!
//! Sessions live in memory in an LRU of bounded size. Requests for one
//! session are serialized by a per-session lock; different sessions run
//! concurrently.

use std::num::NonZeroUsize;
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use lru::LruCache;
use serde::{Deserialize, Serialize};
use serde_json::json;
use stabsim_core::optics::{build_named, extract_kraus, success_probability, FockState};

use crate::session::{ExportFormat, Mode, Op, OpResponse, Session, SessionError, Status};

pub const DEFAULT_PORT: u16 = 8787;
pub const DEFAULT_CAPACITY: usize = 128;

type Shared = Arc<tokio::sync::Mutex<Session>>;

pub struct AppState {
    sessions: Mutex<LruCache<String, Shared>>,
    default_seed: u64,
}

impl AppState {
    pub fn new(capacity: usize, default_seed: u64) -> Arc<AppState> {
        let cap = NonZeroUsize::new(capacity.max(1)).expect("capacity is positive");
        Arc::new(AppState {
            sessions: Mutex::new(LruCache::new(cap)),
            default_seed,
        })
    }

    fn get(&self, id: &str) -> Result<Shared, ApiError> {
        self.sessions
            .lock()
            .expect("session map lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::NotFound(id.to_string()))
    }
}

#[derive(Debug)]
pub enum ApiError {
    NotFound(String),
    BadRequest(String),
    /// Engine or session error, reported with the current snapshot.
    Session(SessionError, Box<OpResponse>),
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        match self {
            ApiError::NotFound(id) => (
                StatusCode::NOT_FOUND,
                Json(json!({"status": "error", "message": format!("unknown session `{id}`")})),
            )
                .into_response(),
            ApiError::BadRequest(m) => {
                (StatusCode::BAD_REQUEST, Json(json!({"status": "error", "message": m}))).into_response()
            }
            ApiError::Session(e, r) => {
                let code = match e {
                    SessionError::Pending(_) | SessionError::NoPending => StatusCode::CONFLICT,
                    _ => StatusCode::BAD_REQUEST,
                };
                (code, Json(*r)).into_response()
            }
        }
    }
}

fn session_error(s: &Session, e: SessionError) -> ApiError {
    let r = s.respond(Status::Error, None, Some(e.to_string()), None);
    ApiError::Session(e, Box::new(r))
}

fn parse<T: for<'de> Deserialize<'de>>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::BadRequest(format!("request body: {e}")))
}

#[derive(Deserialize, Default)]
struct NewSession {
    seed: Option<u64>,
}

#[derive(Serialize)]
struct Created {
    id: String,
    snapshot: crate::session::Snapshot,
}

async fn create(State(app): State<Arc<AppState>>, body: Bytes) -> Result<Json<Created>, ApiError> {
    let req: NewSession = if body.is_empty() {
        NewSession::default()
    } else {
        parse(&body)?
    };
    let s = Session::new(req.seed.unwrap_or(app.default_seed));
    let snapshot = s.snapshot();
    let id = uuid::Uuid::new_v4().to_string();
    app.sessions
        .lock()
        .expect("session map lock")
        .put(id.clone(), Arc::new(tokio::sync::Mutex::new(s)));
    Ok(Json(Created { id, snapshot }))
}

async fn snapshot(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let s = app.get(&id)?;
    let s = s.lock().await;
    Ok(Json(s.snapshot()).into_response())
}

async fn op(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<OpResponse>, ApiError> {
    let s = app.get(&id)?;
    let op: Op = parse(&body)?;
    let mut s = s.lock().await;
    match s.submit(op, Mode::Interactive) {
        Ok(r) => Ok(Json(r)),
        Err(e) => Err(session_error(&s, e)),
    }
}

#[derive(Deserialize)]
struct Choice {
    index: usize,
}

async fn choice(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<OpResponse>, ApiError> {
    let s = app.get(&id)?;
    let c: Choice = parse(&body)?;
    let mut s = s.lock().await;
    match s.choose(c.index, Mode::Interactive) {
        Ok(r) => Ok(Json(r)),
        Err(e) => Err(session_error(&s, e)),
    }
}

async fn undo(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<OpResponse>, ApiError> {
    let s = app.get(&id)?;
    let mut s = s.lock().await;
    match s.undo() {
        Ok(r) => Ok(Json(r)),
        Err(e) => Err(session_error(&s, e)),
    }
}

#[derive(Deserialize)]
struct ExportQuery {
    format: Option<String>,
}

async fn export(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(q): Query<ExportQuery>,
) -> Result<Response, ApiError> {
    let s = app.get(&id)?;
    let format = match q.format.as_deref().unwrap_or("json") {
        "json" => ExportFormat::Json,
        "dot" => ExportFormat::Dot,
        "tableau" => ExportFormat::Tableau,
        other => return Err(ApiError::BadRequest(format!("unknown export format `{other}`"))),
    };
    let s = s.lock().await;
    let text = s.export(format).map_err(|e| session_error(&s, e))?;
    let mime = match format {
        ExportFormat::Json => "application/json",
        ExportFormat::Dot => "text/vnd.graphviz",
        ExportFormat::Tableau => "text/plain; charset=utf-8",
    };
    Ok(([(header::CONTENT_TYPE, mime)], text).into_response())
}

#[derive(Deserialize)]
struct KrausRequest {
    builder: String,
}

async fn lo_kraus(body: Bytes) -> Result<Response, ApiError> {
    let req: KrausRequest = parse(&body)?;
    let bad = |e: stabsim_core::Error| ApiError::BadRequest(e.to_string());
    let circ = build_named(&req.builder).map_err(bad)?;
    let map = extract_kraus(&circ).map_err(bad)?;
    let p = success_probability(&circ, &FockState::plus(circ.qubits)).map_err(bad)?;
    Ok(Json(json!({
        "builder": req.builder,
        "kraus": map.to_json(),
        "completeness_error": map.completeness_error(),
        "success_probability_plus": p,
    }))
    .into_response())
}

pub fn router(app: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/session", post(create))
        .route("/api/session/{id}", get(snapshot))
        .route("/api/session/{id}/op", post(op))
        .route("/api/session/{id}/choice", post(choice))
        .route("/api/session/{id}/undo", post(undo))
        .route("/api/session/{id}/export", get(export))
        .route("/api/lo/kraus", post(lo_kraus))
        .with_state(app)
}

pub async fn serve(port: u16, seed: u64) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(("127.0.0.1", port)).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(AppState::new(DEFAULT_CAPACITY, seed))).await
}
