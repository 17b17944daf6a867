//! HTTP API over the inquiry engine, and shared configuration for the CLI.

pub mod config;

use std::num::NonZeroUsize;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use axum::extract::rejection::JsonRejection;
use axum::extract::{DefaultBodyLimit, Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use inquiry_core::codec::canonical;
use inquiry_core::detection::AttemptContext;
use inquiry_core::program::{validate_program, ExecutionPlan};
use inquiry_core::runtime::{LearnerResponse, Session};
use inquiry_core::{Engine, Error};
use lru::LruCache;
use serde::{Deserialize, Serialize};

pub use config::ServiceConfig;

/// Error body: `{"error": <kind>, "detail": <message>}`.
#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    kind: &'static str,
    detail: String,
}

impl ApiError {
    fn new(status: StatusCode, kind: &'static str, detail: impl Into<String>) -> Self {
        Self { status, kind, detail: detail.into() }
    }
}

fn kind_of(e: &Error) -> &'static str {
    match e {
        Error::UnknownWord(_) => "unknown_word",
        Error::ProviderFailure { .. } => "provider_failure",
        Error::SchemaViolation { .. } => "schema_violation",
        Error::CassetteMiss { .. } => "cassette_miss",
        Error::InvariantViolation { .. } => "invariant_violation",
        Error::NoLegalTrace(_) => "no_legal_trace",
        Error::SynthesisFailure { .. } => "synthesis_failure",
        Error::InvalidPlan(_) => "invalid_plan",
        Error::WrongNode { .. } => "wrong_node",
        Error::SessionFinished => "session_finished",
        Error::AffordanceMismatch { .. } => "affordance_mismatch",
        Error::Config(_) => "invalid_request",
        Error::Parse { .. } => "parse_error",
        _ => "internal",
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match &e {
            e if e.is_provider_failure() => StatusCode::BAD_GATEWAY,
            Error::NoLegalTrace(_)
            | Error::SynthesisFailure { .. }
            | Error::InvariantViolation { .. }
            | Error::InvalidPlan(_)
            | Error::Config(_) => StatusCode::UNPROCESSABLE_ENTITY,
            Error::WrongNode { .. } | Error::SessionFinished => StatusCode::CONFLICT,
            Error::AffordanceMismatch { .. } | Error::Parse { .. } => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        Self::new(status, kind_of(&e), e.to_string())
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        let status = match r.status() {
            StatusCode::PAYLOAD_TOO_LARGE => StatusCode::PAYLOAD_TOO_LARGE,
            _ => StatusCode::BAD_REQUEST,
        };
        Self::new(status, "malformed_request", r.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        #[derive(Serialize)]
        struct Body<'a> {
            error: &'a str,
            detail: &'a str,
        }
        let body = canonical(&Body { error: self.kind, detail: &self.detail });
        (self.status, [("content-type", "application/json")], body).into_response()
    }
}

/// Canonical JSON response.
fn json<T: Serialize>(value: &T) -> Response {
    (StatusCode::OK, [("content-type", "application/json")], canonical(value)).into_response()
}

type ApiResult = Result<Response, ApiError>;

type Shared<T> = Arc<Mutex<T>>;

pub struct AppState {
    engine: Engine,
    plans: Mutex<LruCache<String, Arc<ExecutionPlan>>>,
    /// Each session has its own lock, so steps on one session are serialized
    /// while different sessions proceed independently.
    sessions: Mutex<LruCache<String, Shared<Session>>>,
    next_session: AtomicU64,
}

impl AppState {
    pub fn new(engine: Engine, capacity: NonZeroUsize) -> Self {
        Self {
            engine,
            plans: Mutex::new(LruCache::new(capacity)),
            sessions: Mutex::new(LruCache::new(capacity)),
            next_session: AtomicU64::new(1),
        }
    }

    fn plan(&self, id: &str) -> Option<Arc<ExecutionPlan>> {
        self.plans.lock().expect("plan store").get(id).cloned()
    }

    fn session(&self, id: &str) -> Result<Shared<Session>, ApiError> {
        self.sessions
            .lock()
            .expect("session store")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "unknown_session", format!("no session {id}")))
    }
}

/// Runs blocking pipeline work off the async executor.
async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ApiError> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckRequest {
    pub document: String,
}

async fn check(State(state): State<Arc<AppState>>, body: Result<Json<CheckRequest>, JsonRejection>) -> ApiResult {
    let Json(req) = body?;
    if req.document.trim().is_empty() {
        return Err(ApiError::new(StatusCode::BAD_REQUEST, "empty_document", "document is empty"));
    }
    let report = blocking(move || Ok(state.engine.detect(&req.document)?)).await?;
    Ok(json(&report))
}

async fn inquiry(State(state): State<Arc<AppState>>, body: Result<Json<AttemptContext>, JsonRejection>) -> ApiResult {
    let Json(ctx) = body?;
    let st = state.clone();
    let plan = blocking(move || Ok(st.engine.plan(&ctx)?)).await?;
    // Never hand out a plan that does not validate.
    let violations = validate_program(&plan);
    if !violations.is_empty() {
        return Err(Error::InvalidPlan(violations).into());
    }
    state.plans.lock().expect("plan store").put(plan.plan_id.clone(), Arc::new(plan.clone()));
    Ok(json(&plan))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NewSession {
    #[serde(default)]
    pub plan_id: Option<String>,
    /// A full plan, for clients that hold one the server has not seen.
    #[serde(default)]
    pub plan: Option<ExecutionPlan>,
}

async fn new_session(State(state): State<Arc<AppState>>, body: Result<Json<NewSession>, JsonRejection>) -> ApiResult {
    let Json(req) = body?;
    let plan = match (req.plan, req.plan_id) {
        (Some(p), _) => Arc::new(p),
        (None, Some(id)) => state
            .plan(&id)
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "unknown_plan", format!("no plan {id}")))?,
        (None, None) => {
            return Err(ApiError::new(StatusCode::BAD_REQUEST, "malformed_request", "plan_id or plan is required"))
        }
    };
    let id = format!("s{}", state.next_session.fetch_add(1, Ordering::Relaxed));
    let session = Session::start(plan, id.clone())?;
    let body = json(&session.view());
    state.sessions.lock().expect("session store").put(id, Arc::new(Mutex::new(session)));
    Ok(body)
}

async fn get_session(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult {
    let s = state.session(&id)?;
    let s = s.lock().expect("session");
    Ok(json(&s.view()))
}

async fn step(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Result<Json<LearnerResponse>, JsonRejection>,
) -> ApiResult {
    let Json(resp) = body?;
    let session = state.session(&id)?;
    let provider = state.engine.provider.clone();
    blocking(move || {
        let mut s = session.lock().expect("session");
        s.step(&resp, &provider)?;
        Ok(json(&s.view()))
    })
    .await
}

async fn get_plan(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult {
    let plan = state
        .plan(&id)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "unknown_plan", format!("no plan {id}")))?;
    Ok(json(&*plan))
}

async fn health(State(state): State<Arc<AppState>>) -> Response {
    json(&serde_json::json!({ "status": "ok", "backend": state.engine.provider.backend() }))
}

pub fn router(state: Arc<AppState>, body_limit: usize) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/check", post(check))
        .route("/inquiry", post(inquiry))
        .route("/plan/{id}", get(get_plan))
        .route("/session", post(new_session))
        .route("/session/{id}", get(get_session))
        .route("/session/{id}/step", post(step))
        .layer(DefaultBodyLimit::max(body_limit))
        .with_state(state)
}
