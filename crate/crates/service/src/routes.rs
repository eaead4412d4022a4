use axum::body::Bytes;
use axum::extract::multipart::MultipartError;
use axum::extract::{Multipart, Path, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::Json;
use fairaudit_core::plots::{plot_summary, PlotError};
use fairaudit_core::store::validate_model_id;
use fairaudit_core::{StoreError, Transcripts};
use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};
use uuid::Uuid;

use crate::jobs::{EnqueueError, JobState};
use crate::AppState;

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.code, "message": self.message }))).into_response()
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::NotFound(_) => Self::new(StatusCode::NOT_FOUND, "not_found", e.to_string()),
            StoreError::InvalidModelId(_) => Self::new(StatusCode::BAD_REQUEST, "invalid_model_id", e.to_string()),
            StoreError::IoFailure { .. } | StoreError::Corrupt { .. } => {
                Self::new(StatusCode::INTERNAL_SERVER_ERROR, "store_failure", e.to_string())
            }
        }
    }
}

impl From<MultipartError> for ApiError {
    fn from(e: MultipartError) -> Self {
        let status = e.status();
        let code = if status == StatusCode::PAYLOAD_TOO_LARGE {
            "payload_too_large"
        } else {
            "malformed_multipart"
        };
        Self::new(status, code, e.body_text())
    }
}

#[derive(Debug, Serialize)]
pub struct SubmitResponse {
    pub job_id: Uuid,
    pub model_id: String,
    pub state: JobState,
}

const TRANSCRIPT_FIELDS: [&str; 3] = ["transcripts", "transcript", "file"];

pub async fn submit(State(state): State<AppState>, mut form: Multipart) -> Result<Response, ApiError> {
    let mut model_id: Option<String> = None;
    let mut csv: Option<Bytes> = None;
    while let Some(field) = form.next_field().await? {
        match field.name() {
            Some("model_id") => model_id = Some(field.text().await?.trim().to_string()),
            Some(name) if TRANSCRIPT_FIELDS.contains(&name) => csv = Some(field.bytes().await?),
            _ => {}
        }
    }
    let model_id =
        model_id.ok_or_else(|| ApiError::new(StatusCode::BAD_REQUEST, "missing_field", "form field model_id is required"))?;
    validate_model_id(&model_id)?;
    let csv = csv.ok_or_else(|| {
        ApiError::new(
            StatusCode::BAD_REQUEST,
            "missing_field",
            "form field transcripts (a CSV file) is required",
        )
    })?;
    let transcripts = Transcripts::from_reader(csv.as_ref())
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "malformed_csv", e.to_string()))?;
    if state.corpus.is_none() {
        return Err(ApiError::new(
            StatusCode::SERVICE_UNAVAILABLE,
            "corpus_not_loaded",
            "the service has no reference corpus loaded",
        ));
    }

    let job = state.queue.enqueue(model_id, transcripts).map_err(|e| match e {
        EnqueueError::Full => ApiError::new(StatusCode::TOO_MANY_REQUESTS, "queue_full", "the audit queue is full, retry later"),
        EnqueueError::Closed => ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "shutting_down", "the service is shutting down"),
    })?;
    let body = SubmitResponse {
        job_id: job.job_id,
        model_id: job.model_id,
        state: job.state,
    };
    Ok((StatusCode::ACCEPTED, Json(body)).into_response())
}

pub async fn status(State(state): State<AppState>, Path(job_id): Path<String>) -> Result<Response, ApiError> {
    let not_found = || ApiError::new(StatusCode::NOT_FOUND, "not_found", format!("no job {job_id}"));
    let id = Uuid::parse_str(&job_id).map_err(|_| not_found())?;
    let job = state.queue.get(&id).ok_or_else(not_found)?;
    Ok(Json(job).into_response())
}

fn etag_of(body: &[u8]) -> String {
    format!("\"{}\"", hex::encode(Sha256::digest(body)))
}

fn etag_matches(headers: &HeaderMap, etag: &str) -> bool {
    headers
        .get_all(header::IF_NONE_MATCH)
        .iter()
        .filter_map(|v| v.to_str().ok())
        .flat_map(|v| v.split(','))
        .map(|t| t.trim().trim_start_matches("W/"))
        .any(|t| t == etag || t == "*")
}

pub async fn leaderboard(State(state): State<AppState>, headers: HeaderMap) -> Response {
    let body = state.store.index_json();
    let etag = etag_of(&body);
    let etag_header = HeaderValue::from_str(&etag).expect("hex etag is a valid header");
    if etag_matches(&headers, &etag) {
        return (StatusCode::NOT_MODIFIED, [(header::ETAG, etag_header)]).into_response();
    }
    (
        [
            (header::CONTENT_TYPE, HeaderValue::from_static("application/json")),
            (header::ETAG, etag_header),
        ],
        body,
    )
        .into_response()
}

pub async fn result(State(state): State<AppState>, Path(model_id): Path<String>) -> Result<Response, ApiError> {
    let bytes = state.store.get_audit_bytes(&model_id)?;
    Ok(([(header::CONTENT_TYPE, HeaderValue::from_static("application/json"))], bytes).into_response())
}

pub async fn plots(State(state): State<AppState>, Path(model_id): Path<String>) -> Result<Response, ApiError> {
    let audit = state.store.get_audit(&model_id)?;
    let summary = plot_summary(&audit).map_err(|e| match e {
        PlotError::NoDetail(_) => ApiError::new(StatusCode::CONFLICT, "no_per_utterance_detail", e.to_string()),
    })?;
    Ok(Json(summary).into_response())
}

pub async fn health(State(state): State<AppState>) -> Response {
    Json(json!({
        "status": "ok",
        "corpus_loaded": state.corpus.is_some(),
        "queue_depth": state.queue.depth(),
    }))
    .into_response()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn if_none_match_parsing() {
        let etag = etag_of(b"[]");
        let mut h = HeaderMap::new();
        assert!(!etag_matches(&h, &etag));
        h.insert(header::IF_NONE_MATCH, HeaderValue::from_str(&format!("\"x\", W/{etag}")).unwrap());
        assert!(etag_matches(&h, &etag));
        h.insert(header::IF_NONE_MATCH, HeaderValue::from_static("*"));
        assert!(etag_matches(&h, &etag));
    }
}
