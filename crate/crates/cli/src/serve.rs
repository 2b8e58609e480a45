//! HTTP service: recommend-and-explain, choice logging and static UI.

use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use axum::extract::rejection::JsonRejection;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tower_http::services::ServeDir;

use kgreason_core::embed::{recommend_top_n, EmbeddingModel};
use kgreason_core::reasons::{AgainstOptions, ObjectiveSpec, TrimBound};
use kgreason_core::{EntityId, Error, KnowledgeGraph, PathType, RelationId, Scheme};

use crate::choices::{ChoiceError, ChoiceEvent, ChoiceLog, Phase};
use crate::present::{explain_list, ExplainedRecommendation};

/// Everything a request may read. Only the choice log is mutable.
pub struct ServiceState {
    pub graph: KnowledgeGraph,
    pub path_types: Vec<PathType>,
    pub model: EmbeddingModel,
    pub objective: Option<ObjectiveSpec>,
    pub relation: RelationId,
    pub candidates: Vec<EntityId>,
    pub anchors: Vec<EntityId>,
    pub defaults: RequestDefaults,
    pub choices: Mutex<ChoiceLog>,
    pub ui_dir: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug)]
pub struct RequestDefaults {
    pub n: usize,
    pub scheme: Scheme,
    pub k: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecommendRequest {
    pub anchor: String,
    pub n: Option<usize>,
    pub scheme: Option<String>,
    pub k: Option<usize>,
    #[serde(default)]
    pub verbose: bool,
}

#[derive(Debug, Serialize)]
pub struct RecommendResponse {
    pub anchor: String,
    pub scheme: String,
    pub n: usize,
    pub k: usize,
    pub items: Vec<ExplainedRecommendation>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChoiceRequest {
    pub session_id: String,
    pub phase: Phase,
    pub chosen_item: String,
    /// Server time when omitted.
    pub timestamp: Option<DateTime<Utc>>,
}

/// Error payload: `{"error": {"code": ..., "message": ...}}`.
#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
        }
    }

    fn invalid(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "invalid_argument", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({ "error": { "code": self.code, "message": self.message } });
        (self.status, Json(body)).into_response()
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        match e {
            Error::UnsupportedScheme(_) => {
                ApiError::new(StatusCode::BAD_REQUEST, "unsupported_scheme", e.to_string())
            }
            Error::Domain(_) | Error::Parse { .. } => ApiError::invalid(e.to_string()),
            Error::Io(_) => {
                ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string())
            }
        }
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError::invalid(e.body_text())
    }
}

impl From<ChoiceError> for ApiError {
    fn from(e: ChoiceError) -> Self {
        match e {
            ChoiceError::Empty => ApiError::invalid(e.to_string()),
            ChoiceError::Duplicate(_) | ChoiceError::OutOfOrder(_) => {
                ApiError::new(StatusCode::CONFLICT, "conflict", e.to_string())
            }
            ChoiceError::Corrupt { .. } | ChoiceError::Io(_) => {
                ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string())
            }
        }
    }
}

pub fn router(state: Arc<ServiceState>) -> Router {
    let api = Router::new()
        .route("/recommend", post(recommend))
        .route("/choice", post(choice))
        .route("/stats", get(stats))
        .route("/items", get(items))
        .route("/health", get(health));
    let api = match &state.ui_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.route("/", get(placeholder)),
    };
    api.with_state(state)
}

/// Pure function of the loaded state and the request.
pub fn recommend_payload(
    state: &ServiceState,
    req: &RecommendRequest,
) -> Result<RecommendResponse, ApiError> {
    let g = &state.graph;
    let user = g.entity_id(&req.anchor).ok_or_else(|| {
        ApiError::new(
            StatusCode::NOT_FOUND,
            "unknown_anchor",
            format!("unknown anchor {:?}", req.anchor),
        )
    })?;
    let scheme: Scheme = match &req.scheme {
        Some(s) => s.parse()?,
        None => state.defaults.scheme,
    };
    let n = req.n.unwrap_or(state.defaults.n);
    let k = req.k.unwrap_or(state.defaults.k);
    let opts = AgainstOptions {
        bound: TrimBound::at_most(k)?,
        objective: state.objective.as_ref(),
    };
    let candidates: Vec<EntityId> = state
        .candidates
        .iter()
        .copied()
        .filter(|&c| c != user)
        .collect();
    let list = recommend_top_n(&state.model, user, state.relation, &candidates, n)?;
    let items = explain_list(g, &state.path_types, &list, scheme, opts, req.verbose)?;
    Ok(RecommendResponse {
        anchor: req.anchor.clone(),
        scheme: scheme.name().to_owned(),
        n,
        k,
        items,
    })
}

async fn recommend(
    State(state): State<Arc<ServiceState>>,
    body: Result<Json<RecommendRequest>, JsonRejection>,
) -> Result<Json<RecommendResponse>, ApiError> {
    let Json(req) = body?;
    recommend_payload(&state, &req).map(Json)
}

async fn choice(
    State(state): State<Arc<ServiceState>>,
    body: Result<Json<ChoiceRequest>, JsonRejection>,
) -> Result<impl IntoResponse, ApiError> {
    let Json(req) = body?;
    if state.graph.entity_id(&req.chosen_item).is_none() {
        return Err(ApiError::invalid(format!(
            "unknown item {:?}",
            req.chosen_item
        )));
    }
    let event = ChoiceEvent {
        session_id: req.session_id,
        phase: req.phase,
        chosen_item: req.chosen_item,
        timestamp: req.timestamp.unwrap_or_else(Utc::now),
    };
    let mut log = state.choices.lock().unwrap_or_else(|p| p.into_inner());
    log.record(&event)?;
    Ok((StatusCode::CREATED, Json(json!({ "recorded": event }))))
}

async fn stats(State(state): State<Arc<ServiceState>>) -> impl IntoResponse {
    let log = state.choices.lock().unwrap_or_else(|p| p.into_inner());
    Json(log.stats())
}

async fn items(State(state): State<Arc<ServiceState>>) -> impl IntoResponse {
    let g = &state.graph;
    let labels = |ids: &[EntityId]| ids.iter().map(|&e| g.entity_label(e)).collect::<Vec<_>>();
    Json(json!({
        "items": labels(&state.candidates),
        "anchors": labels(&state.anchors),
    }))
}

async fn health(State(state): State<Arc<ServiceState>>) -> impl IntoResponse {
    let s = state.graph.summary();
    Json(json!({
        "status": "ok",
        "entities": s.entities,
        "relations": s.relations,
        "triples": s.triples,
        "scheme": state.defaults.scheme.name(),
        "n": state.defaults.n,
        "k": state.defaults.k,
    }))
}

async fn placeholder() -> Html<&'static str> {
    Html(
        "<!doctype html><title>kgreason</title><h1>kgreason</h1>\
         <p>No UI directory configured. API: POST /recommend, POST /choice, \
         GET /stats, GET /items, GET /health.</p>",
    )
}

pub async fn run(state: ServiceState, host: &str, port: u16) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind((host, port)).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(Arc::new(state))).await
}
