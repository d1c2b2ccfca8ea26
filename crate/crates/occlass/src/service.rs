//! Final-model training and the HTTP prediction service.
//!
//! Endpoints, all JSON:
//!
//! | method | path               | body                                   |
//! |--------|--------------------|----------------------------------------|
//! | GET    | `/api/v1/health`   | `{status, model_version}`              |
//! | GET    | `/api/v1/schema`   | the served feature schema              |
//! | POST   | `/api/v1/predict`  | `{selected_features: [id]}` → result   |
//!
//! Errors are `{code, message, detail}` with a 4xx status.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use occlass_core::dataset::{Dataset, Label};
use occlass_core::models::{
    fit_dataset, tune, Family, ModelError, ModelSpec, Samples, TrainedModel,
};
use occlass_core::schema::{canonical_schema, load_schema, FeatureSchema, SchemaError};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;
use tower_http::cors::CorsLayer;
use tower_http::services::ServeDir;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("{0}: {1}")]
    Io(String, String),
    #[error("model file {0}: {1}")]
    Model(String, ModelError),
    #[error("schema file {0}: {1}")]
    Schema(String, SchemaError),
    #[error("model was trained for schema {model:?} but the served schema is {schema:?}")]
    VersionMismatch { model: String, schema: String },
    #[error("model expects {model} features but the schema defines {schema}")]
    FeatureCount { model: usize, schema: usize },
    #[error("training: {0}")]
    Training(ModelError),
}

/// Tunes `family` with 3-fold CV on the whole dataset, then fits on every
/// record.
pub fn train_final(
    dataset: &Dataset,
    family: Family,
    seed: u64,
) -> Result<TrainedModel, ServiceError> {
    if dataset.is_empty() {
        return Err(ServiceError::Training(ModelError::Empty));
    }
    let samples = Samples::from_dataset(dataset);
    let hp =
        tune(&ModelSpec::default_for(family), &samples, seed).map_err(ServiceError::Training)?;
    fit_dataset(family, &hp, dataset, seed).map_err(ServiceError::Training)
}

/// `<family>-<first 12 hex digits of the SHA-256 of the model file>`.
pub fn model_version(family: Family, model_file: &[u8]) -> String {
    let digest = Sha256::digest(model_file);
    let hex: String = digest.iter().take(6).map(|b| format!("{b:02x}")).collect();
    format!("{family}-{hex}")
}

/// Read-only state shared by all handlers.
#[derive(Debug, Clone)]
pub struct AppState {
    pub model: Arc<TrainedModel>,
    pub schema: Arc<FeatureSchema>,
    pub model_version: String,
}

impl AppState {
    /// Checks that the model was trained against `schema`.
    pub fn new(
        model: TrainedModel,
        schema: FeatureSchema,
        model_version: String,
    ) -> Result<Self, ServiceError> {
        if model.schema_version != schema.version {
            return Err(ServiceError::VersionMismatch {
                model: model.schema_version.clone(),
                schema: schema.version.clone(),
            });
        }
        if model.n_features != schema.feature_count() {
            return Err(ServiceError::FeatureCount {
                model: model.n_features,
                schema: schema.feature_count(),
            });
        }
        Ok(Self {
            model: Arc::new(model),
            schema: Arc::new(schema),
            model_version,
        })
    }

    /// Loads a model file and an optional schema file (canonical schema when
    /// absent).
    pub fn load(model_path: &Path, schema_path: Option<&Path>) -> Result<Self, ServiceError> {
        let bytes = read(model_path)?;
        let text = String::from_utf8_lossy(&bytes);
        let model = TrainedModel::from_json(&text)
            .map_err(|e| ServiceError::Model(model_path.display().to_string(), e))?;
        let schema = match schema_path {
            None => canonical_schema(),
            Some(p) => {
                let text = String::from_utf8_lossy(&read(p)?).into_owned();
                load_schema(&text).map_err(|e| ServiceError::Schema(p.display().to_string(), e))?
            }
        };
        let version = model_version(model.family, &bytes);
        Self::new(model, schema, version)
    }

    /// The in-process prediction the service returns for a selection.
    pub fn predict(&self, selected: &[String]) -> Result<PredictionResponse, ApiError> {
        let x = self
            .schema
            .encode(selected.iter().map(String::as_str))
            .map_err(|e| match e {
                SchemaError::UnknownFeature(id) => ApiError::unknown_feature(&id),
                other => ApiError::bad_request(other.to_string()),
            })?;
        let score = self
            .model
            .predict_score(&x)
            .map_err(|e| ApiError::bad_request(e.to_string()))?;
        let label = self
            .model
            .predict(&x)
            .map_err(|e| ApiError::bad_request(e.to_string()))?;
        Ok(PredictionResponse {
            label: ApiLabel::from(label),
            score,
            model_family: self.model.family,
            model_version: self.model_version.clone(),
        })
    }
}

fn read(path: &Path) -> Result<Vec<u8>, ServiceError> {
    std::fs::read(path).map_err(|e| ServiceError::Io(path.display().to_string(), e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictionRequest {
    pub selected_features: Vec<String>,
}

/// Label names on the wire.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ApiLabel {
    Incident,
    SeriousIncident,
}

impl From<Label> for ApiLabel {
    fn from(l: Label) -> Self {
        match l {
            Label::Incident => ApiLabel::Incident,
            Label::SeriousIncident => ApiLabel::SeriousIncident,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionResponse {
    pub label: ApiLabel,
    /// Model score in [0, 1]; SeriousIncident iff score > 0.5.
    pub score: f64,
    pub model_family: Family,
    pub model_version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: u16,
    pub code: String,
    pub message: String,
    pub detail: Value,
}

impl ApiError {
    pub fn unknown_feature(id: &str) -> Self {
        Self {
            status: 422,
            code: "unknown_feature".into(),
            message: format!("unknown feature id {id:?}"),
            detail: json!({ "feature_id": id }),
        }
    }

    pub fn bad_request(message: String) -> Self {
        Self {
            status: 400,
            code: "bad_request".into(),
            message,
            detail: Value::Null,
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::BAD_REQUEST);
        (status, Json(self)).into_response()
    }
}

async fn health(State(s): State<AppState>) -> Json<Value> {
    Json(json!({ "status": "ok", "model_version": s.model_version }))
}

async fn schema(State(s): State<AppState>) -> Json<FeatureSchema> {
    Json((*s.schema).clone())
}

async fn predict(
    State(s): State<AppState>,
    body: Bytes,
) -> Result<Json<PredictionResponse>, ApiError> {
    let req: PredictionRequest = serde_json::from_slice(&body)
        .map_err(|e| ApiError::bad_request(format!("invalid request body: {e}")))?;
    s.predict(&req.selected_features).map(Json)
}

/// The API routes; static UI files from `ui_dir` are served at `/` when given.
pub fn router(state: AppState, ui_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/v1/health", get(health))
        .route("/api/v1/schema", get(schema))
        .route("/api/v1/predict", post(predict))
        .with_state(state);
    let app = match ui_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    };
    app.layer(CorsLayer::permissive())
}

/// Binds `addr` and serves until Ctrl-C. `on_bound` receives the actual
/// address (useful with port 0).
pub async fn serve(
    state: AppState,
    addr: SocketAddr,
    ui_dir: Option<PathBuf>,
    on_bound: impl FnOnce(SocketAddr),
) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    on_bound(listener.local_addr()?);
    axum::serve(listener, router(state, ui_dir))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_version_is_stable_and_short() {
        let v = model_version(Family::Rfc, b"{}");
        // SHA-256 of "{}" starts 44136fa355b3.
        assert_eq!(v, "rfc-44136fa355b3");
    }

    #[test]
    fn api_labels_use_type_names() {
        assert_eq!(
            serde_json::to_string(&ApiLabel::SeriousIncident).unwrap(),
            "\"SeriousIncident\""
        );
        assert_eq!(ApiLabel::from(Label::Incident), ApiLabel::Incident);
    }
}
