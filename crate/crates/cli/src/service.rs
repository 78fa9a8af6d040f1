//! Workshop-mode HTTP service: one survey, one response log.

use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::Utc;
use ivstat::survey::{IngestError, ResponseStore, SubmissionPayload, SurveyDefinition};
use ivstat::Error;
use serde_json::json;
use tokio::net::TcpListener;

pub const DEFAULT_ADMIN_TOKEN_ENV: &str = "IVSTAT_ADMIN_TOKEN";

#[derive(Clone)]
pub struct AppState {
    survey: Arc<SurveyDefinition>,
    document: Bytes,
    store: Arc<ResponseStore>,
    admin_token: Option<Arc<str>>,
}

impl AppState {
    /// `admin_token` of `None` disables `GET /responses`.
    pub fn new(survey: SurveyDefinition, store: ResponseStore, admin_token: Option<String>) -> anyhow::Result<Self> {
        let document = Bytes::from(survey.to_json()?);
        Ok(AppState {
            survey: Arc::new(survey),
            document,
            store: Arc::new(store),
            admin_token: admin_token.filter(|t| !t.is_empty()).map(Arc::from),
        })
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/survey", get(get_survey))
        .route("/response", post(post_response))
        .route("/responses", get(get_responses))
        .with_state(state)
}

/// Binds `addr` and serves in the background, returning the bound address.
pub async fn spawn(state: AppState, addr: SocketAddr) -> anyhow::Result<(SocketAddr, tokio::task::JoinHandle<()>)> {
    let listener = TcpListener::bind(addr).await?;
    let local = listener.local_addr()?;
    let app = router(state);
    let handle = tokio::spawn(async move {
        let _ = axum::serve(listener, app).await;
    });
    Ok((local, handle))
}

/// Serves until interrupted.
pub async fn serve(state: AppState, addr: SocketAddr) -> anyhow::Result<()> {
    let listener = TcpListener::bind(addr).await?;
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

async fn get_survey(State(state): State<AppState>) -> Response {
    ([(header::CONTENT_TYPE, "application/json")], state.document.clone()).into_response()
}

fn reject(status: StatusCode, body: serde_json::Value) -> Response {
    (status, Json(body)).into_response()
}

async fn post_response(State(state): State<AppState>, body: Bytes) -> Response {
    let text = match std::str::from_utf8(&body) {
        Ok(t) => t,
        Err(_) => return reject(StatusCode::BAD_REQUEST, json!({ "error": "body is not UTF-8" })),
    };
    let payload = match SubmissionPayload::from_json(text) {
        Ok(p) => p,
        Err(e) => return reject(StatusCode::BAD_REQUEST, json!({ "error": e.to_string() })),
    };
    let record = match payload.ingest(&state.survey, Utc::now()) {
        Ok(r) => r,
        Err(IngestError::Mismatch { claimed, recomputed }) => {
            return reject(
                StatusCode::UNPROCESSABLE_ENTITY,
                json!({
                    "error": "claimed interval disagrees with the server extraction",
                    "claimed_interval": claimed,
                    "recomputed_interval": recomputed,
                }),
            )
        }
        Err(IngestError::Invalid(e)) => return reject(status_for(&e), json!({ "error": e.to_string() })),
    };
    let store = state.store.clone();
    let survey = state.survey.clone();
    let stored = tokio::task::spawn_blocking(move || store.append(&survey, &record).map(|ack| (ack, record))).await;
    match stored {
        Ok(Ok((ack, record))) => (
            StatusCode::CREATED,
            Json(json!({
                "sequence": ack.sequence,
                "respondent_id": record.respondent_id,
                "question_id": record.question_id,
                "interval_raw": record.interval_raw,
                "interval_norm": record.interval_norm,
                "submitted_at": ivstat::survey::format_timestamp(&record.submitted_at),
            })),
        )
            .into_response(),
        Ok(Err(e)) => reject(status_for(&e), json!({ "error": e.to_string() })),
        Err(e) => reject(StatusCode::INTERNAL_SERVER_ERROR, json!({ "error": e.to_string() })),
    }
}

fn status_for(e: &Error) -> StatusCode {
    match e {
        Error::Io(_) | Error::Json(_) | Error::Csv(_) => StatusCode::INTERNAL_SERVER_ERROR,
        _ => StatusCode::UNPROCESSABLE_ENTITY,
    }
}

async fn get_responses(State(state): State<AppState>, headers: HeaderMap) -> Response {
    let Some(expected) = state.admin_token.as_deref() else {
        return reject(StatusCode::FORBIDDEN, json!({ "error": "export is disabled" }));
    };
    let presented = headers
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "));
    if presented != Some(expected) {
        return reject(StatusCode::UNAUTHORIZED, json!({ "error": "missing or wrong bearer token" }));
    }
    let store = state.store.clone();
    match tokio::task::spawn_blocking(move || store.retained()).await {
        Ok(Ok(records)) => Json(records).into_response(),
        Ok(Err(e)) => reject(StatusCode::INTERNAL_SERVER_ERROR, json!({ "error": e.to_string() })),
        Err(e) => reject(StatusCode::INTERNAL_SERVER_ERROR, json!({ "error": e.to_string() })),
    }
}
