//! JSON-over-HTTP surface of the alert engine.
//!
//! | method | path                  | success |
//! |--------|-----------------------|---------|
//! | POST   | `/sessions`           | 202 `{session_id, alert?}` |
//! | GET    | `/alerts?state=`      | 200 `[Alert]`, oldest first |
//! | GET    | `/alerts/{id}`        | 200 `Alert` |
//! | POST   | `/alerts/{id}/verdict`| 200 `Alert` |
//! | GET    | `/metrics`            | 200 `Metrics` |
//!
//! Failures carry `{error, detail}`. Request bodies are parsed strictly:
//! unknown fields are a 400 naming the offending path.

pub mod config;

use std::path::PathBuf;
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::rejection::QueryRejection;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{DateTime, Utc};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use classwatch_core::alert::{commit, Alert, AlertState, AlertStore, Judgment, Pipeline, PipelineError, ReviewVerdict, Stage, StoreError};
use classwatch_core::detector::{Detector, PinyinTable};
use classwatch_core::linguistic::{SegmentationLexicon, SubjectLexicon};
use classwatch_core::quality::LogisticModel;
use classwatch_core::session::{IngestError, Manifest};
use classwatch_core::word_bank::BannedWordBank;

pub use config::{ApiConfig, ConfigError};

#[derive(Debug, Error)]
pub enum StartupError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("loading {name}: {message}")]
    Resource { name: &'static str, message: String },
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("server io: {0}")]
    Io(#[from] std::io::Error),
}

/// Shared by all handlers; the store is the single writer.
pub struct AppState {
    pipeline: Pipeline,
    store: RwLock<AlertStore>,
    session_root: PathBuf,
}

impl AppState {
    pub fn new(pipeline: Pipeline, store: AlertStore, session_root: PathBuf) -> Self {
        AppState {
            pipeline,
            store: RwLock::new(store),
            session_root,
        }
    }

    /// Loads every resource and replays the event log.
    pub fn from_config(config: &ApiConfig) -> Result<Self, StartupError> {
        let pipeline = load_pipeline(config)?;
        let store = AlertStore::open(&config.event_log)?;
        log::info!(
            "replayed {} events from {}",
            store.state().event_count(),
            config.event_log.display()
        );
        Ok(Self::new(pipeline, store, config.session_root.clone()))
    }

    pub fn store(&self) -> std::sync::RwLockReadGuard<'_, AlertStore> {
        self.store.read().unwrap_or_else(|p| p.into_inner())
    }

    fn store_mut(&self) -> std::sync::RwLockWriteGuard<'_, AlertStore> {
        self.store.write().unwrap_or_else(|p| p.into_inner())
    }
}

/// Validates `config` and loads the bank, lexicons and model it names.
pub fn load_pipeline(config: &ApiConfig) -> Result<Pipeline, StartupError> {
    config.validate()?;
    fn res<T, E: std::fmt::Display>(name: &'static str, r: Result<T, E>) -> Result<T, StartupError> {
        r.map_err(|e| StartupError::Resource {
            name,
            message: e.to_string(),
        })
    }
    let bank = res("bank", BannedWordBank::load(&config.bank))?;
    let table = res("pinyin", PinyinTable::load(&config.pinyin))?;
    let segmentation = res("segmentation", SegmentationLexicon::load(&config.segmentation))?;
    let subjects = res("subjects", SubjectLexicon::load(&config.subjects))?;
    let model = res("model", LogisticModel::<f64>::load(&config.model))?;
    Ok(Pipeline {
        detector: Detector::new(&bank, table, segmentation.clone(), config.max_gap),
        segmentation,
        subjects,
        model,
        rule: config.rule,
        prosodic: config.prosodic,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub detail: String,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: ErrorBody,
}

impl ApiError {
    fn new(status: StatusCode, error: &str, detail: impl Into<String>) -> Self {
        ApiError {
            status,
            body: ErrorBody {
                error: error.to_string(),
                detail: detail.into(),
            },
        }
    }

    fn validation(detail: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "validation", detail)
    }

    fn pipeline(e: PipelineError) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, "pipeline", e.to_string())
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::NotFound(_) => Self::new(StatusCode::NOT_FOUND, "not_found", e.to_string()),
            StoreError::Conflict(_) => Self::new(StatusCode::CONFLICT, "conflict", e.to_string()),
            other => Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", other.to_string()),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

/// Strict JSON parsing with the failing field path in the error.
fn parse_body<T: DeserializeOwned>(body: &[u8]) -> Result<T, ApiError> {
    let de = &mut serde_json::Deserializer::from_slice(body);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        ApiError::validation(format!("{path}: {}", e.into_inner()))
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionAccepted {
    pub session_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alert: Option<Alert>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlertsQuery {
    pub state: Option<AlertState>,
}

/// Verdict body; the alert id comes from the path and may be repeated here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerdictRequest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alert_id: Option<String>,
    pub reviewer_id: String,
    pub judgment: Judgment,
    #[serde(default)]
    pub note: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reviewed_at: Option<DateTime<Utc>>,
}

async fn post_session(State(state): State<Arc<AppState>>, body: Bytes) -> Result<(StatusCode, Json<SessionAccepted>), ApiError> {
    let manifest: Manifest = parse_body(&body)?;
    let worker = state.clone();
    let outcome = tokio::task::spawn_blocking(move || {
        let record = manifest.resolve(&worker.session_root).map_err(|e| match e {
            IngestError::Validation(_) | IngestError::Manifest(_) => ApiError::validation(e.to_string()),
            other => ApiError::pipeline(PipelineError {
                stage: Stage::Ingest,
                message: other.to_string(),
            }),
        })?;
        let artifact = worker.pipeline.analyze(&record).map_err(ApiError::pipeline)?;
        let mut store = worker.store_mut();
        commit(&mut store, &record, artifact).map_err(ApiError::pipeline)
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))??;
    log::info!(
        "session {} processed; alert: {}",
        outcome.session_id,
        outcome.alert.as_ref().map_or("none", |a| a.alert_id.as_str())
    );
    Ok((
        StatusCode::ACCEPTED,
        Json(SessionAccepted {
            session_id: outcome.session_id,
            alert: outcome.alert,
        }),
    ))
}

async fn list_alerts(
    State(state): State<Arc<AppState>>,
    query: Result<Query<AlertsQuery>, QueryRejection>,
) -> Result<Json<Vec<Alert>>, ApiError> {
    let Query(query) = query.map_err(|e| ApiError::validation(e.body_text()))?;
    let store = state.store();
    Ok(Json(store.state().alerts(query.state).into_iter().cloned().collect()))
}

async fn get_alert(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<Alert>, ApiError> {
    let store = state.store();
    store
        .state()
        .alert(&id)
        .cloned()
        .map(Json)
        .ok_or_else(|| StoreError::NotFound(id).into())
}

async fn post_verdict(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<Alert>, ApiError> {
    let req: VerdictRequest = parse_body(&body)?;
    if req.alert_id.as_deref().is_some_and(|a| a != id) {
        return Err(ApiError::validation(format!("alert_id: body names a different alert than /alerts/{id}")));
    }
    if req.reviewer_id.trim().is_empty() {
        return Err(ApiError::validation("reviewer_id: must not be empty"));
    }
    let mut store = state.store_mut();
    let verdict = ReviewVerdict {
        alert_id: id,
        reviewer_id: req.reviewer_id,
        judgment: req.judgment,
        note: req.note,
        reviewed_at: req.reviewed_at.unwrap_or_else(|| store.now()),
    };
    Ok(Json(store.record_verdict(verdict)?))
}

async fn metrics(State(state): State<Arc<AppState>>) -> Json<classwatch_core::alert::Metrics> {
    Json(state.store().metrics())
}

async fn not_found() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such route")
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/sessions", post(post_session))
        .route("/alerts", get(list_alerts))
        .route("/alerts/{id}", get(get_alert))
        .route("/alerts/{id}/verdict", post(post_verdict))
        .route("/metrics", get(metrics))
        .fallback(not_found)
        .with_state(state)
}

/// Loads resources from `config` and serves until Ctrl-C.
pub async fn serve(config: ApiConfig) -> Result<(), StartupError> {
    let state = Arc::new(AppState::from_config(&config)?);
    let listener = tokio::net::TcpListener::bind(config.addr()).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
