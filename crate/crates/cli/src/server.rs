use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, RwLock};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use kkmw_core::session::{new_session_id, Acknowledgment, QueryView, Session, SessionKind, SessionSpec};
use kkmw_core::Error;
use serde::{Deserialize, Serialize};
use serde_json::json;
use tower_http::services::ServeDir;

use crate::config::Config;
use crate::CliError;

#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

struct Inner {
    dir: PathBuf,
    config: Config,
    sessions: RwLock<HashMap<String, Arc<Mutex<Session>>>>,
}

impl AppState {
    /// Opens the data directory and replays every session log in it.
    pub fn open(config: Config) -> Result<Self, CliError> {
        let dir = config.data_dir.clone();
        std::fs::create_dir_all(&dir).map_err(|e| CliError::Input(format!("{}: {e}", dir.display())))?;
        let mut sessions = HashMap::new();
        let entries = std::fs::read_dir(&dir).map_err(|e| CliError::Input(format!("{}: {e}", dir.display())))?;
        for entry in entries.flatten() {
            let path = entry.path();
            if !path.to_string_lossy().ends_with(".events.ndjson") {
                continue;
            }
            match Session::replay(&path) {
                Ok(s) => {
                    sessions.insert(s.id.clone(), Arc::new(Mutex::new(s)));
                }
                Err(e) => tracing::warn!("skipping {}: {e}", path.display()),
            }
        }
        tracing::info!("replayed {} sessions from {}", sessions.len(), dir.display());
        Ok(Self {
            inner: Arc::new(Inner {
                dir,
                config,
                sessions: RwLock::new(sessions),
            }),
        })
    }

    fn session(&self, id: &str) -> Result<Arc<Mutex<Session>>, ApiError> {
        self.inner
            .sessions
            .read()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError(StatusCode::NOT_FOUND, format!("unknown session {id}")))
    }
}

pub struct ApiError(pub StatusCode, pub String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({ "error": self.1 }))).into_response()
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::AnswerConflict(_) => StatusCode::CONFLICT,
            Error::Io(_) | Error::Format(_) => StatusCode::INTERNAL_SERVER_ERROR,
            _ => StatusCode::UNPROCESSABLE_ENTITY,
        };
        Self(code, e.to_string())
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        Self(StatusCode::UNPROCESSABLE_ENTITY, e.body_text())
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    pub kind: SessionKind,
    pub participants: Vec<String>,
    pub tolerance: Option<f64>,
    pub total_rent: Option<f64>,
    pub max_resolution: Option<u32>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Created {
    pub id: String,
}

/// Choices are 1-based piece or room numbers.
#[derive(Debug, Deserialize)]
pub struct AnswerRequest {
    pub query_id: u64,
    pub choices: Vec<usize>,
}

/// A query as the client sees it, with 1-based participant and room numbers.
#[derive(Debug, Serialize)]
struct ClientQuery {
    #[serde(flatten)]
    view: QueryView,
}

fn one_based(mut v: QueryView) -> ClientQuery {
    v.participant += 1;
    if let Some(f) = v.free_rooms.as_mut() {
        f.iter_mut().for_each(|i| *i += 1);
    }
    ClientQuery { view: v }
}

pub fn router(state: AppState) -> Router {
    let api = Router::new()
        .route("/api/v1/sessions", post(create))
        .route("/api/v1/sessions/{id}", get(status))
        .route("/api/v1/sessions/{id}/queries", get(queries))
        .route("/api/v1/sessions/{id}/answers", post(answer))
        .route("/api/v1/sessions/{id}/result", get(result));
    let api = match &state.inner.config.ui_dir {
        Some(ui) => api.fallback_service(ServeDir::new(ui)),
        None => api,
    };
    api.with_state(state)
}

async fn create(State(st): State<AppState>, body: Result<Json<CreateSession>, JsonRejection>) -> Result<Response, ApiError> {
    let Json(req) = body?;
    let cfg = &st.inner.config;
    let spec = SessionSpec {
        kind: req.kind,
        participants: req.participants,
        tolerance: req.tolerance.unwrap_or(cfg.default_tolerance),
        total_rent: req.total_rent.unwrap_or(1.0),
        max_resolution: req.max_resolution.unwrap_or(cfg.max_resolution).min(cfg.max_resolution),
    };
    let id = new_session_id();
    let dir = st.inner.dir.clone();
    let sid = id.clone();
    let session = tokio::task::spawn_blocking(move || Session::create(&dir, &sid, spec))
        .await
        .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))??;
    st.inner.sessions.write().unwrap().insert(id.clone(), Arc::new(Mutex::new(session)));
    tracing::info!(session = %id, "created");
    Ok((StatusCode::CREATED, Json(Created { id })).into_response())
}

async fn status(State(st): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let s = st.session(&id)?;
    let status = s.lock().unwrap().status();
    Ok(Json(status).into_response())
}

async fn queries(State(st): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let s = st.session(&id)?;
    let views = s.lock().unwrap().queries();
    Ok(Json(views.into_iter().map(one_based).collect::<Vec<_>>()).into_response())
}

async fn answer(
    State(st): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<AnswerRequest>, JsonRejection>,
) -> Result<Response, ApiError> {
    let Json(req) = body?;
    let s = st.session(&id)?;
    if req.choices.iter().any(|&c| c == 0) {
        return Err(ApiError(StatusCode::UNPROCESSABLE_ENTITY, "choices are numbered from 1".into()));
    }
    let choices: Vec<usize> = req.choices.iter().map(|c| c - 1).collect();
    // Answers may trigger a solver step; keep it off the async workers.
    let ack: Acknowledgment = tokio::task::spawn_blocking(move || s.lock().unwrap().answer(req.query_id, &choices))
        .await
        .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))??;
    Ok(Json(ack).into_response())
}

async fn result(State(st): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let s = st.session(&id)?;
    let guard = s.lock().unwrap();
    match guard.result()? {
        Some(r) => Ok(Json(r).into_response()),
        None => Err(ApiError(
            StatusCode::CONFLICT,
            guard.state.failure.clone().unwrap_or_else(|| "session is still running".into()),
        )),
    }
}

/// Runs the service until interrupted. The bound address is printed on
/// stdout as `listening on http://ADDR` so callers can use port 0.
pub fn serve_blocking(config: Config) -> Result<(), CliError> {
    let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::Input(e.to_string()))?;
    rt.block_on(async move {
        let port = config.port;
        let state = AppState::open(config)?;
        let listener = tokio::net::TcpListener::bind(("127.0.0.1", port))
            .await
            .map_err(|e| CliError::Input(format!("cannot bind port {port}: {e}")))?;
        let addr = listener.local_addr().map_err(|e| CliError::Input(e.to_string()))?;
        println!("listening on http://{addr}");
        tracing::info!("listening on http://{addr}");
        axum::serve(listener, router(state))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(|e| CliError::Input(e.to_string()))
    })
}
