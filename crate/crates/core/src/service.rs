//! JSON-over-HTTP facade for a loaded model.
//!
//! Every error response uses the envelope `{code, message, details}`.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tower_http::services::ServeDir;

use crate::bn::Evidence;
use crate::builder::{shipped_model, BuiltModel, CptOrigin};
use crate::error::{Error, Result};
use crate::eval::prediction;
use crate::explain::report_for_evidence;
use crate::knowledge::KnowledgeModel;

pub const DEFAULT_PORT: u16 = 8080;

/// Immutable model pair served to requests.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub built: BuiltModel,
    pub knowledge: KnowledgeModel,
}

#[derive(Debug, Default)]
pub struct AppState {
    snapshot: RwLock<Option<Arc<Snapshot>>>,
}

impl AppState {
    pub fn new(snapshot: Option<Snapshot>) -> Self {
        Self { snapshot: RwLock::new(snapshot.map(Arc::new)) }
    }

    /// Replaces the served model; in-flight requests keep the old one.
    pub fn swap(&self, snapshot: Snapshot) {
        *self.snapshot.write().expect("snapshot lock") = Some(Arc::new(snapshot));
    }

    pub fn current(&self) -> Option<Arc<Snapshot>> {
        self.snapshot.read().expect("snapshot lock").clone()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: u16,
    pub code: String,
    pub message: String,
    pub details: Value,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>, details: Value) -> Self {
        Self { status: status.as_u16(), code: code.into(), message: message.into(), details }
    }

    fn no_model() -> Self {
        Self::new(StatusCode::SERVICE_UNAVAILABLE, "no_model", "no model is loaded", Value::Null)
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let message = e.to_string();
        match e {
            Error::InvalidState { variable, state, valid } => Self::new(
                StatusCode::BAD_REQUEST,
                "invalid_state",
                message,
                json!({ "variable": variable, "state": state, "valid_states": valid }),
            ),
            Error::UnknownVariable(name) => {
                Self::new(StatusCode::BAD_REQUEST, "unknown_variable", message, json!({ "variable": name }))
            }
            Error::ZeroProbabilityEvidence => {
                Self::new(StatusCode::UNPROCESSABLE_ENTITY, "zero_probability_evidence", message, Value::Null)
            }
            _ => Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message, Value::Null),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self)).into_response()
    }
}

type ApiResult<T> = std::result::Result<Json<T>, ApiError>;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct EvidenceRequest {
    #[serde(default)]
    pub evidence: Evidence,
    #[serde(default)]
    pub patient: Option<String>,
}

fn parse_request(body: &Bytes) -> std::result::Result<EvidenceRequest, ApiError> {
    if body.iter().all(u8::is_ascii_whitespace) {
        return Ok(EvidenceRequest::default());
    }
    serde_json::from_slice(body).map_err(|e| {
        ApiError::new(StatusCode::BAD_REQUEST, "bad_request", format!("malformed request body: {e}"), Value::Null)
    })
}

fn loaded(state: &AppState) -> std::result::Result<Arc<Snapshot>, ApiError> {
    state.current().ok_or_else(ApiError::no_model)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeInfo {
    pub name: String,
    pub states: Vec<String>,
    pub parents: Vec<String>,
    /// `factor`, `synthesis` or `target`.
    pub kind: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelInfo {
    pub target: String,
    pub target_present: String,
    pub mode: String,
    pub seed: u64,
    pub knowledge_version: u32,
    pub n_train: usize,
    pub nodes: Vec<NodeInfo>,
    pub edges: Vec<(String, String)>,
    pub origins: BTreeMap<String, CptOrigin>,
    pub warnings: Vec<String>,
}

pub fn model_info(built: &BuiltModel) -> ModelInfo {
    let synthesis = built.synthesis_nodes();
    let nodes = built
        .net
        .variables
        .iter()
        .map(|v| {
            let kind = if v.name == built.target() {
                "target"
            } else if synthesis.contains(&v.name.as_str()) {
                "synthesis"
            } else {
                "factor"
            };
            NodeInfo {
                name: v.name.clone(),
                states: v.states.clone(),
                parents: built.net.parents(&v.name).into_iter().map(str::to_string).collect(),
                kind: kind.into(),
            }
        })
        .collect();
    let p = &built.provenance;
    ModelInfo {
        target: p.target.clone(),
        target_present: p.target_present.clone(),
        mode: p.mode.to_string(),
        seed: p.seed,
        knowledge_version: p.knowledge_version,
        n_train: p.n_train,
        nodes,
        edges: built.net.edges.clone(),
        origins: p.nodes.iter().map(|n| (n.node.clone(), n.origin)).collect(),
        warnings: p.warnings.clone(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorInfo {
    pub name: String,
    pub category: String,
    pub weight: f64,
    pub states: Vec<String>,
    /// Evidence items recorded per state.
    pub evidence_counts: BTreeMap<String, usize>,
}

pub fn factor_info(knowledge: &KnowledgeModel) -> Vec<FactorInfo> {
    knowledge
        .categories
        .iter()
        .flat_map(|c| {
            c.factors.iter().map(move |f| FactorInfo {
                name: f.name.clone(),
                category: c.name.as_str().to_string(),
                weight: f.weight,
                states: f.states.clone(),
                evidence_counts: f
                    .states
                    .iter()
                    .map(|s| (s.clone(), f.relationship(s).map_or(0, |r| r.evidence.len())))
                    .collect(),
            })
        })
        .collect()
}

async fn healthz(State(state): State<Arc<AppState>>) -> Json<Value> {
    Json(json!({ "status": "ok", "model_loaded": state.current().is_some() }))
}

async fn get_model(State(state): State<Arc<AppState>>) -> ApiResult<ModelInfo> {
    Ok(Json(model_info(&loaded(&state)?.built)))
}

async fn get_factors(State(state): State<Arc<AppState>>) -> ApiResult<Vec<FactorInfo>> {
    Ok(Json(factor_info(&loaded(&state)?.knowledge)))
}

async fn post_predict(State(state): State<Arc<AppState>>, body: Bytes) -> ApiResult<crate::eval::Prediction> {
    let snapshot = loaded(&state)?;
    let request = parse_request(&body)?;
    Ok(Json(prediction(&snapshot.built, &request.evidence)?))
}

async fn post_explain(State(state): State<Arc<AppState>>, body: Bytes) -> ApiResult<crate::explain::RiskReport> {
    let snapshot = loaded(&state)?;
    let request = parse_request(&body)?;
    Ok(Json(report_for_evidence(
        &snapshot.built,
        &snapshot.knowledge,
        request.patient.as_deref(),
        &request.evidence,
    )?))
}

/// API routes, plus static files from `static_dir` for any other path.
pub fn router(state: Arc<AppState>, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/healthz", get(healthz))
        .route("/api/model", get(get_model))
        .route("/api/factors", get(get_factors))
        .route("/api/predict", post(post_predict))
        .route("/api/explain", post(post_explain))
        .with_state(state);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServeConfig {
    pub port: u16,
    /// Built model JSON; the shipped model is used when absent.
    pub model_path: Option<PathBuf>,
    pub knowledge_path: Option<PathBuf>,
    pub static_dir: Option<PathBuf>,
}

impl ServeConfig {
    /// Reads `PORT`, `MODEL_PATH`, `KNOWLEDGE_PATH` and `STATIC_DIR`.
    pub fn from_env() -> Result<Self> {
        let var = |k: &str| std::env::var(k).ok().filter(|v| !v.is_empty());
        let port = match var("PORT") {
            Some(p) => p.parse().map_err(|_| Error::Config(format!("PORT must be a port number, got `{p}`")))?,
            None => DEFAULT_PORT,
        };
        Ok(Self {
            port,
            model_path: var("MODEL_PATH").map(PathBuf::from),
            knowledge_path: var("KNOWLEDGE_PATH").map(PathBuf::from),
            static_dir: var("STATIC_DIR").map(PathBuf::from),
        })
    }

    pub fn snapshot(&self) -> Result<Snapshot> {
        let knowledge = match &self.knowledge_path {
            Some(p) => KnowledgeModel::load(p)?,
            None => KnowledgeModel::atrial_fibrillation(),
        };
        let built = match &self.model_path {
            Some(p) => BuiltModel::load(p)?,
            None => shipped_model()?,
        };
        Ok(Snapshot { built, knowledge })
    }
}

pub async fn serve(config: ServeConfig) -> Result<()> {
    let state = Arc::new(AppState::new(Some(config.snapshot()?)));
    let app = router(state, config.static_dir.clone());
    let addr = SocketAddr::from(([0, 0, 0, 0], config.port));
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!("listening on {addr}");
    axum::serve(listener, app).await?;
    Ok(())
}
