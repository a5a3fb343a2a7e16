//! HTTP/JSON front for one adaptive menu session.
//!
//! Mutating requests are serialized behind a write lock. Their events are
//! appended to the log file, and flushed, before the in-memory state
//! changes and before the reply goes out. Reads share the last committed
//! state.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use adaptmenu_core::adaptation::{Customization, ViewMode};
use adaptmenu_core::engine::{
    ClockRequest, Command, Engine, EngineError, ErrorBody, ExpandRequest, OpenRequest, PanelRequest, PinRequest,
    SelectRequest,
};
use adaptmenu_core::heuristics::HeuristicConfig;
use adaptmenu_core::model::{parse_definition, DefinitionError, MenuId};
use adaptmenu_core::usage::{LogError, StatsParams, UsageLog};
use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use thiserror::Error;
use tokio::io::AsyncWriteExt;
use tokio::net::TcpListener;
use tokio::sync::RwLock;

#[derive(Debug, Error)]
pub enum StartupError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Definition {
        path: PathBuf,
        #[source]
        source: DefinitionError,
    },
    #[error("{path}: {source}")]
    Log {
        path: PathBuf,
        #[source]
        source: LogError,
    },
    #[error("{path}: {reason}")]
    State { path: PathBuf, reason: String },
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// Where the service keeps its files, and how it starts.
#[derive(Debug, Clone)]
pub struct ServiceFiles {
    pub definition: PathBuf,
    pub log: PathBuf,
    pub state: PathBuf,
}

fn read_optional(path: &Path) -> Result<String, StartupError> {
    match std::fs::read_to_string(path) {
        Ok(text) => Ok(text),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(String::new()),
        Err(source) => Err(StartupError::Io {
            path: path.to_owned(),
            source,
        }),
    }
}

pub struct Service {
    engine: Engine,
    log_path: PathBuf,
    state_path: PathBuf,
}

impl Service {
    /// Loads the definition, log and state files. Missing log and state
    /// files start empty. The clock starts at `at`, else at the last logged
    /// event, else at the current time.
    pub fn open(files: &ServiceFiles, config: HeuristicConfig, at: Option<i64>) -> Result<Service, StartupError> {
        let source = std::fs::read_to_string(&files.definition).map_err(|source| StartupError::Io {
            path: files.definition.clone(),
            source,
        })?;
        let def = parse_definition(&source).map_err(|source| StartupError::Definition {
            path: files.definition.clone(),
            source,
        })?;
        let log = UsageLog::parse(&read_optional(&files.log)?, StatsParams::from(&config)).map_err(|source| {
            StartupError::Log {
                path: files.log.clone(),
                source,
            }
        })?;
        let (customization, warnings) =
            Customization::parse(&read_optional(&files.state)?, &def).map_err(|e| StartupError::State {
                path: files.state.clone(),
                reason: e.to_string(),
            })?;
        for w in warnings {
            tracing::warn!("{}: {w}", files.state.display());
        }
        let clock = at.or(log.last_t()).unwrap_or_else(now);
        let engine = Engine::new(def, config, log, customization, clock)?;
        Ok(Service {
            engine,
            log_path: files.log.clone(),
            state_path: files.state.clone(),
        })
    }

    pub fn engine(&self) -> &Engine {
        &self.engine
    }

    async fn apply(&mut self, command: &Command) -> Result<Response, ApiError> {
        let plan = self.engine.plan(command)?;
        if !plan.events.is_empty() {
            let text: String = plan.events.iter().map(|e| format!("{e}\n")).collect();
            append(&self.log_path, &text).await.map_err(ApiError::Io)?;
        }
        let customization = plan.customization_changed.then(|| plan.session.customization());
        let reply = self.engine.commit(plan)?;
        if let Some(c) = customization {
            replace(&self.state_path, &c.to_text()).await.map_err(ApiError::Io)?;
        }
        Ok(Json(reply).into_response())
    }
}

fn now() -> i64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs() as i64)
}

async fn append(path: &Path, text: &str) -> std::io::Result<()> {
    let mut file = tokio::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .await?;
    file.write_all(text.as_bytes()).await?;
    file.sync_data().await
}

/// Writes through a temporary file so readers never see half a state file.
async fn replace(path: &Path, text: &str) -> std::io::Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    tokio::fs::write(&tmp, text).await?;
    tokio::fs::rename(&tmp, path).await
}

#[derive(Debug, Error)]
enum ApiError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("{0}")]
    BadRequest(String),
    #[error("i/o failure: {0}")]
    Io(std::io::Error),
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, body) = match &self {
            ApiError::Engine(e) => {
                let status = match e.code() {
                    "unknown-menu" | "unknown-node" | "unknown-panel" => StatusCode::NOT_FOUND,
                    "menu-not-open" | "clock-regression" | "out-of-order" => StatusCode::CONFLICT,
                    _ => StatusCode::BAD_REQUEST,
                };
                (status, e.body())
            }
            ApiError::BadRequest(reason) => (
                StatusCode::BAD_REQUEST,
                ErrorBody {
                    error: "bad-request".into(),
                    detail: Some(reason.clone()),
                },
            ),
            ApiError::Io(e) => {
                tracing::error!("{e}");
                (
                    StatusCode::INTERNAL_SERVER_ERROR,
                    ErrorBody {
                        error: "io".into(),
                        detail: Some(e.to_string()),
                    },
                )
            }
        };
        (status, Json(body)).into_response()
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        ApiError::BadRequest(r.body_text())
    }
}

impl From<QueryRejection> for ApiError {
    fn from(r: QueryRejection) -> Self {
        ApiError::BadRequest(r.body_text())
    }
}

type Shared = Arc<RwLock<Service>>;

#[derive(Debug, Deserialize)]
struct ViewQuery {
    menu: MenuId,
    mode: Option<ViewMode>,
}

#[derive(Debug, Deserialize)]
struct MenuQuery {
    menu: MenuId,
}

async fn menus(State(s): State<Shared>) -> Response {
    Json(s.read().await.engine.menus()).into_response()
}

async fn view(State(s): State<Shared>, q: Result<Query<ViewQuery>, QueryRejection>) -> Result<Response, ApiError> {
    let Query(q) = q?;
    Ok(Json(s.read().await.engine.view(&q.menu, q.mode)?).into_response())
}

async fn scores(State(s): State<Shared>, q: Result<Query<MenuQuery>, QueryRejection>) -> Result<Response, ApiError> {
    let Query(q) = q?;
    Ok(Json(s.read().await.engine.scores(&q.menu)?).into_response())
}

async fn session(State(s): State<Shared>) -> Response {
    Json(s.read().await.engine.summary()).into_response()
}

async fn mutate(s: &Shared, command: Command) -> Result<Response, ApiError> {
    s.write().await.apply(&command).await
}

async fn select(State(s): State<Shared>, body: Result<Json<SelectRequest>, JsonRejection>) -> Result<Response, ApiError> {
    mutate(&s, Command::Select(body?.0)).await
}

async fn expand(State(s): State<Shared>, body: Result<Json<ExpandRequest>, JsonRejection>) -> Result<Response, ApiError> {
    mutate(&s, Command::Expand(body?.0)).await
}

async fn pin(State(s): State<Shared>, body: Result<Json<PinRequest>, JsonRejection>) -> Result<Response, ApiError> {
    mutate(&s, Command::Pin(body?.0)).await
}

async fn panel(State(s): State<Shared>, body: Result<Json<PanelRequest>, JsonRejection>) -> Result<Response, ApiError> {
    mutate(&s, Command::Panel(body?.0)).await
}

async fn clock(State(s): State<Shared>, body: Result<Json<ClockRequest>, JsonRejection>) -> Result<Response, ApiError> {
    mutate(&s, Command::Clock(body?.0)).await
}

async fn open(State(s): State<Shared>, body: Result<Json<OpenRequest>, JsonRejection>) -> Result<Response, ApiError> {
    mutate(&s, Command::Open(body?.0)).await
}

async fn close(State(s): State<Shared>, body: Result<Json<OpenRequest>, JsonRejection>) -> Result<Response, ApiError> {
    mutate(&s, Command::Close(body?.0)).await
}

async fn not_found() -> Response {
    let body = ErrorBody {
        error: "not-found".into(),
        detail: Some("no such endpoint".into()),
    };
    (StatusCode::NOT_FOUND, Json(body)).into_response()
}

pub fn router(service: Service) -> Router {
    let shared: Shared = Arc::new(RwLock::new(service));
    Router::new()
        .route("/api/menus", get(menus))
        .route("/api/view", get(view))
        .route("/api/scores", get(scores))
        .route("/api/session", get(session))
        .route("/api/select", post(select))
        .route("/api/expand", post(expand))
        .route("/api/pin", post(pin))
        .route("/api/panel", post(panel))
        .route("/api/clock", post(clock))
        .route("/api/open", post(open))
        .route("/api/close", post(close))
        .fallback(not_found)
        .with_state(shared)
}

/// Serves until the listener fails or `shutdown` resolves.
pub async fn serve(
    listener: TcpListener,
    service: Service,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    if let Ok(addr) = listener.local_addr() {
        tracing::info!("listening on http://{addr}");
    }
    axum::serve(listener, router(service))
        .with_graceful_shutdown(shutdown)
        .await
}
