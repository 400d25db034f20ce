//! Local JSON API over one loaded model and the latest analysis report.

use std::num::NonZeroUsize;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use headscope::corpus::sample::sha256_hex;
use headscope::metrics::Report;
use headscope::model::{forward_attention, neuron_detail, AttentionTensor, NeuronDetail, WeightBundle};
use headscope::tokenizer::BpeVocab;
use headscope::{Error, ErrorKind};
use lru::LruCache;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

pub const API_SCHEMA_VERSION: u32 = 1;

/// Tokenized input and its attention, shared between requests.
#[derive(Debug)]
pub struct Attended {
    pub ids: Vec<u32>,
    pub pieces: Vec<String>,
    pub attention: AttentionTensor,
}

pub struct ApiSession {
    pub bundle: WeightBundle,
    pub vocab: BpeVocab,
    /// Where `analyze` writes `report.json`.
    pub report_dir: PathBuf,
    pub max_pieces: usize,
    cache: Mutex<LruCache<String, Arc<Attended>>>,
}

impl ApiSession {
    pub fn new(bundle: WeightBundle, vocab: BpeVocab, report_dir: PathBuf, max_pieces: usize, cache_entries: usize) -> Self {
        let cap = NonZeroUsize::new(cache_entries).unwrap_or(NonZeroUsize::MIN);
        Self {
            bundle,
            vocab,
            report_dir,
            max_pieces,
            cache: Mutex::new(LruCache::new(cap)),
        }
    }

    pub fn cached_entries(&self) -> usize {
        self.cache.lock().expect("cache lock").len()
    }

    fn limit(&self) -> usize {
        self.max_pieces.min(self.bundle.config.n_ctx)
    }

    fn encode(&self, text: &str) -> Result<(Vec<u32>, Vec<String>), ApiError> {
        if text.is_empty() {
            return Err(ApiError::field(StatusCode::BAD_REQUEST, "text", "must not be empty"));
        }
        let seq = self.vocab.encode(text);
        if seq.len() > self.limit() {
            return Err(ApiError::new(
                StatusCode::PAYLOAD_TOO_LARGE,
                "too_long",
                format!("input has {} pieces; the limit is {}", seq.len(), self.limit()),
            )
            .with_field("text"));
        }
        Ok((seq.ids, seq.pieces))
    }

    /// Attention for `text`, from the cache when possible.
    pub fn attend(&self, text: &str) -> Result<Arc<Attended>, ApiError> {
        let (ids, pieces) = self.encode(text)?;
        let key = sha256_hex(text.as_bytes());
        if let Some(hit) = self.cache.lock().expect("cache lock").get(&key) {
            return Ok(hit.clone());
        }
        let attention = forward_attention(&self.bundle, &ids)?;
        let entry = Arc::new(Attended { ids, pieces, attention });
        self.cache.lock().expect("cache lock").put(key, entry.clone());
        Ok(entry)
    }

    pub fn neuron(&self, req: &NeuronRequest) -> Result<(Vec<String>, NeuronDetail), ApiError> {
        let (ids, pieces) = self.encode(&req.text)?;
        let detail = neuron_detail(&self.bundle, &ids, req.layer, req.head, req.position)?;
        Ok((pieces, detail))
    }

    fn report(&self) -> Result<Report, ApiError> {
        let path = self.report_dir.join("report.json");
        if !path.is_file() {
            return Err(ApiError::new(
                StatusCode::NOT_FOUND,
                "no_report",
                format!("no analysis report at {}; run `headscope analyze` first", path.display()),
            ));
        }
        Ok(Report::read(path)?)
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    kind: &'static str,
    message: String,
    field: Option<String>,
}

impl ApiError {
    fn new(status: StatusCode, kind: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            kind,
            message: message.into(),
            field: None,
        }
    }

    fn field(status: StatusCode, field: &str, message: impl Into<String>) -> Self {
        Self::new(status, "invalid_field", message).with_field(field)
    }

    fn with_field(mut self, field: &str) -> Self {
        self.field = Some(field.to_string());
        self
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        match &e {
            Error::Range { what, .. } => ApiError::field(StatusCode::BAD_REQUEST, what, e.to_string()),
            Error::Length { .. } => ApiError::new(StatusCode::PAYLOAD_TOO_LARGE, "too_long", e.to_string()).with_field("text"),
            _ => match e.kind() {
                ErrorKind::Request => ApiError::new(StatusCode::BAD_REQUEST, "bad_request", e.to_string()),
                _ => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()),
            },
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut error = json!({"status": self.status.as_u16(), "kind": self.kind, "message": self.message});
        if let Some(f) = self.field {
            error["field"] = Value::String(f);
        }
        (self.status, Json(json!({"schema_version": API_SCHEMA_VERSION, "error": error}))).into_response()
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttendRequest {
    pub text: String,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NeuronRequest {
    pub text: String,
    pub layer: usize,
    pub head: usize,
    pub position: usize,
}

#[derive(Debug, Serialize)]
pub struct AttendResponse<'a> {
    pub schema_version: u32,
    pub pieces: &'a [String],
    pub ids: &'a [u32],
    /// Dense `[layer][head][i][j]`; entries above the diagonal are 0.
    pub attention: Vec<Vec<Vec<&'a [f32]>>>,
}

/// Parses a JSON body, naming the offending field on failure.
fn parse<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| {
        let msg = e.to_string();
        let mut err = ApiError::new(StatusCode::BAD_REQUEST, "malformed_body", msg.clone());
        // serde reports the field in backticks: "missing field `text`", "unknown field `foo`".
        if let Some(field) = msg.split('`').nth(1) {
            err = err.with_field(field);
        }
        err
    })
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ApiError> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
}

async fn attend(State(s): State<Arc<ApiSession>>, body: Bytes) -> Result<Response, ApiError> {
    let req: AttendRequest = parse(&body)?;
    let a = blocking(move || s.attend(&req.text)).await?;
    let t = &a.attention;
    let n = t.seq_len();
    let attention = (0..t.n_layers())
        .map(|l| (0..t.n_heads()).map(|h| t.head(l, h).chunks(n).collect()).collect())
        .collect();
    let resp = AttendResponse {
        schema_version: API_SCHEMA_VERSION,
        pieces: &a.pieces,
        ids: &a.ids,
        attention,
    };
    Ok(Json(resp).into_response())
}

async fn neuron(State(s): State<Arc<ApiSession>>, body: Bytes) -> Result<Response, ApiError> {
    let req: NeuronRequest = parse(&body)?;
    let (pieces, detail) = blocking(move || s.neuron(&req)).await?;
    let mut v = serde_json::to_value(detail).map_err(|e| ApiError::from(Error::from(e)))?;
    v["schema_version"] = json!(API_SCHEMA_VERSION);
    v["pieces"] = json!(pieces);
    Ok(Json(v).into_response())
}

async fn aggregate(State(s): State<Arc<ApiSession>>, Path(metric): Path<String>) -> Result<Response, ApiError> {
    let report = blocking(move || s.report()).await?;
    let grids = report.grids();
    let Some(g) = grids.get(metric.as_str()) else {
        let known: Vec<&str> = grids.keys().copied().collect();
        return Err(ApiError::new(
            StatusCode::NOT_FOUND,
            "unknown_metric",
            format!("unknown metric `{metric}`; known metrics: {}", known.join(", ")),
        ));
    };
    let mut v = serde_json::to_value(g).map_err(|e| ApiError::from(Error::from(e)))?;
    v["schema_version"] = json!(API_SCHEMA_VERSION);
    Ok(Json(v).into_response())
}

async fn meta(State(s): State<Arc<ApiSession>>) -> Result<Response, ApiError> {
    let model = s.bundle.config;
    let limit = s.limit();
    let run = blocking(move || match s.report() {
        Ok(r) => Ok(Some(json!({
            "manifest_hash": r.manifest_hash,
            "policy": r.policy,
            "corpus": r.corpus,
            "metrics": r.grids().keys().collect::<Vec<_>>(),
        }))),
        Err(e) if e.status == StatusCode::NOT_FOUND => Ok(None),
        Err(e) => Err(e),
    })
    .await?;
    Ok(Json(json!({
        "schema_version": API_SCHEMA_VERSION,
        "model": model,
        "max_pieces": limit,
        "run": run,
    }))
    .into_response())
}

pub fn router(session: Arc<ApiSession>) -> Router {
    Router::new()
        .route("/api/attend", post(attend))
        .route("/api/neuron", post(neuron))
        .route("/api/aggregate/{metric}", get(aggregate))
        .route("/api/meta", get(meta))
        .with_state(session)
}
