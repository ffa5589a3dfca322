use std::sync::Arc;
use std::time::Instant;

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use sir_core::leaderboard::ActivityId;
use sir_core::{
    ActionKind, BoardKind, EngineError, EntityId, EntityKind, LeaderboardError, NewActivity,
    QueryLogEntry, ScoreFilter, ScoredResult, SuggestError, Suggestion, Timestamp, TimeWindow,
    ViewDesign,
};

use crate::request_log::{RequestLogRecord, StatsError};
use crate::state::{load_engine, AppState};

/// JSON error body: `{"error": {"code": ..., "message": ...}}`.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl ToString) -> Self {
        Self {
            status,
            code,
            message: message.to_string(),
        }
    }

    fn bad_request(message: impl ToString) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }

    fn body(&self) -> Vec<u8> {
        serde_json::to_vec(&json!({"error": {"code": self.code, "message": self.message}}))
            .expect("error bodies serialize")
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, [(header::CONTENT_TYPE, "application/json")], self.body()).into_response()
    }
}

impl From<QueryRejection> for ApiError {
    fn from(r: QueryRejection) -> Self {
        Self::bad_request(r.body_text())
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        Self::bad_request(r.body_text())
    }
}

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> Self {
        use EngineError::*;
        let (status, code) = match &e {
            UnknownUser(_) => (StatusCode::NOT_FOUND, "unknown_user"),
            UnknownEntity(_) => (StatusCode::NOT_FOUND, "unknown_entity"),
            EmptyQuery => (StatusCode::BAD_REQUEST, "empty_query"),
            InvalidLimit => (StatusCode::BAD_REQUEST, "invalid_limit"),
            UnsupportedKind(_) => (StatusCode::BAD_REQUEST, "unsupported_kind"),
            OutOfRangeInput { .. } | InvalidWeights { .. } => (StatusCode::BAD_REQUEST, "bad_request"),
            Distance(_) | Text(_) => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
        };
        Self::new(status, code, e)
    }
}

impl From<SuggestError> for ApiError {
    fn from(e: SuggestError) -> Self {
        use SuggestError::*;
        let (status, code) = match &e {
            UnknownUser(_) => (StatusCode::NOT_FOUND, "unknown_user"),
            UnknownEntity(_) => (StatusCode::NOT_FOUND, "unknown_entity"),
            EmptyQuery => (StatusCode::BAD_REQUEST, "empty_query"),
            NonMonotonic { .. } => (StatusCode::CONFLICT, "non_monotonic"),
            Corrupt { .. } | Io(_) => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
        };
        Self::new(status, code, e)
    }
}

impl From<LeaderboardError> for ApiError {
    fn from(e: LeaderboardError) -> Self {
        use LeaderboardError::*;
        let (status, code) = match &e {
            UnknownEntity(_) => (StatusCode::NOT_FOUND, "unknown_entity"),
            UnknownUser(_) => (StatusCode::NOT_FOUND, "unknown_user"),
            UnknownActivity(_) => (StatusCode::NOT_FOUND, "unknown_activity"),
            UnknownAction(_) | BadFilter { .. } => (StatusCode::BAD_REQUEST, "bad_request"),
            NotOwner { .. } => (StatusCode::FORBIDDEN, "not_owner"),
            AlreadyDeleted(_) | DeleteOfDelete(_) => (StatusCode::CONFLICT, "already_deleted"),
            InvalidTarget(_) => (StatusCode::BAD_REQUEST, "invalid_target"),
            Corrupt { .. } | Io(_) => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
        };
        Self::new(status, code, e)
    }
}

impl From<StatsError> for ApiError {
    fn from(e: StatsError) -> Self {
        match e {
            StatsError::NoData { .. } => Self::new(StatusCode::NOT_FOUND, "no_data", e),
            StatsError::Io(_) => Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e),
        }
    }
}

type Shared = State<Arc<AppState>>;

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/qs", get(suggestions))
        .route("/qs/log", post(log_query))
        .route("/qac", get(autocomplete))
        .route("/search", get(search))
        .route("/activity", post(record_activity))
        .route("/activity/delete", post(delete_activity))
        .route("/leaderboard", get(leaderboard))
        .route("/stats", get(stats))
        .route("/reload", post(reload))
        .with_state(state)
}

/// Serializes inside the timed region and records one request-log entry.
fn finish<T: Serialize>(
    state: &AppState,
    endpoint: &str,
    user: Option<String>,
    started: Instant,
    result: Result<T, ApiError>,
) -> Response {
    let (status, body) = match result {
        Ok(value) => (StatusCode::OK, serde_json::to_vec(&value).expect("responses serialize")),
        Err(err) => (err.status, err.body()),
    };
    let latency = started.elapsed().as_secs_f64();
    state.requests().push(RequestLogRecord {
        endpoint: endpoint.to_string(),
        user,
        latency,
        ts: state.now(),
        status: status.as_u16(),
    });
    (status, [(header::CONTENT_TYPE, "application/json")], body).into_response()
}

#[derive(Debug, Serialize)]
struct Health {
    status: &'static str,
    version: &'static str,
    entities: usize,
    relationships: usize,
    landmarks: usize,
    graph_revision: u64,
    logged_queries: usize,
    activities: usize,
}

async fn health(State(state): Shared) -> Json<Health> {
    let engine = state.engine();
    Json(Health {
        status: "ok",
        version: env!("CARGO_PKG_VERSION"),
        entities: engine.snapshot().len(),
        relationships: engine.snapshot().edge_count(),
        landmarks: engine.distances().landmark_count(),
        graph_revision: engine.snapshot().revision(),
        logged_queries: state.queries().len(),
        activities: state.ledger().len(),
    })
}

#[derive(Debug, Deserialize)]
struct QsParams {
    user: String,
    now: Option<Timestamp>,
}

#[derive(Debug, Serialize)]
struct QsResponse {
    user: EntityId,
    now: Timestamp,
    suggestions: Vec<Suggestion>,
}

async fn suggestions(State(state): Shared, params: Result<Query<QsParams>, QueryRejection>) -> Response {
    let started = Instant::now();
    let user = params.as_ref().ok().map(|p| p.user.clone());
    let result = (|| {
        let Query(p) = params?;
        let now = p.now.unwrap_or_else(|| state.now());
        let user = EntityId::from(p.user);
        let engine = state.engine();
        let suggestions = state.queries().suggest(engine.snapshot(), &user, now)?;
        Ok::<_, ApiError>(QsResponse { user, now, suggestions })
    })();
    finish(&state, "/qs", user, started, result)
}

#[derive(Debug, Deserialize)]
struct LogBody {
    user: String,
    q: String,
    clicked: Option<String>,
    ts: Option<Timestamp>,
}

async fn log_query(State(state): Shared, body: Result<Json<LogBody>, JsonRejection>) -> Response {
    let started = Instant::now();
    let user = body.as_ref().ok().map(|b| b.user.clone());
    let result = (|| {
        let Json(b) = body?;
        let engine = state.engine();
        let mut log = state.queries();
        let ts = b.ts.unwrap_or_else(|| clamp_now(&state, log.last_timestamp()));
        let mut entry = QueryLogEntry::new(b.user, b.q, ts);
        if let Some(clicked) = b.clicked {
            entry = entry.clicked(clicked);
        }
        let logged = log.log_query(engine.snapshot(), entry)?;
        Ok::<_, ApiError>(logged.clone())
    })();
    finish(&state, "/qs/log", user, started, result)
}

/// Wall-clock time, never earlier than `last` so appends stay ordered.
fn clamp_now(state: &AppState, last: Option<Timestamp>) -> Timestamp {
    let now = state.now();
    last.map_or(now, |l| now.max(l))
}

#[derive(Debug, Deserialize)]
struct QacParams {
    user: String,
    q: String,
    limit: Option<usize>,
}

#[derive(Debug, Serialize)]
struct ResultsResponse {
    user: EntityId,
    q: String,
    results: Vec<ScoredResult>,
}

async fn autocomplete(State(state): Shared, params: Result<Query<QacParams>, QueryRejection>) -> Response {
    let started = Instant::now();
    let user = params.as_ref().ok().map(|p| p.user.clone());
    let result = (|| {
        let Query(p) = params?;
        let user = EntityId::from(p.user);
        let limit = p.limit.unwrap_or(state.config.qac_limit);
        let results = state.engine().autocomplete(&user, &p.q, limit)?;
        Ok::<_, ApiError>(ResultsResponse { user, q: p.q, results })
    })();
    finish(&state, "/qac", user, started, result)
}

#[derive(Debug, Deserialize)]
struct SearchParams {
    user: String,
    q: String,
    limit: Option<usize>,
    /// Comma-separated kinds.
    kinds: Option<String>,
    /// `false` keeps the query out of the suggestion log.
    log: Option<bool>,
}

fn parse_kinds(text: &str) -> Result<Vec<EntityKind>, ApiError> {
    text.split(',')
        .map(str::trim)
        .filter(|k| !k.is_empty())
        .map(|k| k.parse().map_err(|_| ApiError::bad_request(format!("unknown kind `{k}`"))))
        .collect()
}

async fn search(State(state): Shared, params: Result<Query<SearchParams>, QueryRejection>) -> Response {
    let started = Instant::now();
    let user = params.as_ref().ok().map(|p| p.user.clone());
    let result = (|| {
        let Query(p) = params?;
        let user = EntityId::from(p.user);
        let limit = p.limit.unwrap_or(state.config.search_limit);
        let kinds = p.kinds.as_deref().map(parse_kinds).transpose()?;
        let engine = state.engine();
        let results = engine.search(&user, &p.q, limit, kinds.as_deref())?;
        if p.log != Some(false) {
            let mut log = state.queries();
            let ts = clamp_now(&state, log.last_timestamp());
            log.log_query(engine.snapshot(), QueryLogEntry::new(user.clone(), p.q.clone(), ts))?;
        }
        Ok::<_, ApiError>(ResultsResponse { user, q: p.q, results })
    })();
    finish(&state, "/search", user, started, result)
}

#[derive(Debug, Deserialize)]
struct ActivityBody {
    actor: String,
    action: String,
    location: String,
    object: String,
    ts: Option<Timestamp>,
    target: Option<ActivityId>,
}

async fn record_activity(State(state): Shared, body: Result<Json<ActivityBody>, JsonRejection>) -> Response {
    let started = Instant::now();
    let user = body.as_ref().ok().map(|b| b.actor.clone());
    let result = (|| {
        let Json(b) = body?;
        let action: ActionKind = b.action.parse()?;
        let ts = b.ts.unwrap_or_else(|| state.now());
        let mut new = NewActivity::new(b.actor, action, b.location, b.object, ts);
        if let Some(target) = b.target {
            new = new.upvoting(target);
        }
        let engine = state.engine();
        let record = state.ledger().record_activity(engine.snapshot(), new)?.clone();
        Ok::<_, ApiError>(record)
    })();
    finish(&state, "/activity", user, started, result)
}

#[derive(Debug, Deserialize)]
struct DeleteBody {
    actor: String,
    id: ActivityId,
    ts: Option<Timestamp>,
}

async fn delete_activity(State(state): Shared, body: Result<Json<DeleteBody>, JsonRejection>) -> Response {
    let started = Instant::now();
    let user = body.as_ref().ok().map(|b| b.actor.clone());
    let result = (|| {
        let Json(b) = body?;
        let ts = b.ts.unwrap_or_else(|| state.now());
        let record = state.ledger().record_delete(&EntityId::from(b.actor), b.id, ts)?.clone();
        Ok::<_, ApiError>(record)
    })();
    finish(&state, "/activity/delete", user, started, result)
}

#[derive(Debug, Deserialize)]
struct LeaderboardParams {
    user: String,
    context: Option<String>,
    window: Option<String>,
    kind: Option<String>,
    design: Option<String>,
    now: Option<Timestamp>,
}

async fn leaderboard(State(state): Shared, params: Result<Query<LeaderboardParams>, QueryRejection>) -> Response {
    let started = Instant::now();
    let user = params.as_ref().ok().map(|p| p.user.clone());
    let result = (|| {
        let Query(p) = params?;
        let engine = state.engine();
        let graph = engine.snapshot();
        let context = p.context.filter(|c| !c.is_empty()).map(EntityId::from);
        let context_kind = match &context {
            Some(id) => Some(graph.get(id).ok_or_else(|| LeaderboardError::UnknownEntity(id.clone()))?.kind),
            None => None,
        };
        let window = p.window.as_deref().map(str::parse).transpose()?.unwrap_or(TimeWindow::AllTime);
        let kind = p.kind.as_deref().map(str::parse).transpose()?.unwrap_or(BoardKind::TopContributor);
        let design = match p.design.as_deref() {
            Some(d) => d.parse()?,
            None => context_kind.map_or(ViewDesign::HybridAbsolute, ViewDesign::default_for),
        };
        let filter = ScoreFilter::new(context, window, kind, p.now.unwrap_or_else(|| state.now()));
        let view = state.ledger().build_view(graph, &filter, &EntityId::from(p.user), design)?;
        Ok::<_, ApiError>(view)
    })();
    finish(&state, "/leaderboard", user, started, result)
}

#[derive(Debug, Deserialize)]
struct StatsParams {
    endpoint: String,
    after: Option<Timestamp>,
    until: Option<Timestamp>,
}

async fn stats(State(state): Shared, params: Result<Query<StatsParams>, QueryRejection>) -> Result<Response, ApiError> {
    let Query(p) = params?;
    let window = match (p.after, p.until) {
        (None, None) => None,
        (after, until) => Some((after.unwrap_or(Timestamp::MIN), until.unwrap_or(Timestamp::MAX))),
    };
    let summary = state.requests().latency_summary(&p.endpoint, window)?;
    Ok(Json(json!({"endpoint": p.endpoint, "summary": summary})).into_response())
}

/// Re-reads the graph file and swaps the engine in one step.
async fn reload(State(state): Shared) -> Result<Json<serde_json::Value>, ApiError> {
    let config = state.config().clone();
    let engine = tokio::task::spawn_blocking(move || load_engine(&config))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e))?
        .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "data_load", e))?;
    let counts = json!({"entities": engine.snapshot().len(), "relationships": engine.snapshot().edge_count()});
    state.replace_engine(engine);
    Ok(Json(counts))
}
