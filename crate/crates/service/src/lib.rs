//! HTTP+JSON front of the application repository and the staged authoring
//! sessions. Every failure answers with an [`ErrorBody`] whose `error` field
//! is a message key.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use mowa_core::i18n;
use mowa_core::platform::{
    ErrorBody, Platform, PlatformError, PreviewRequest, PublishMeta, RequestMeta, SessionView, StageOutcome,
    Visibility,
};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub const XML_CONTENT_TYPE: &str = "application/xml";

/// Listen address, store and corpus locations, and the default locale.
#[derive(Debug, Clone, PartialEq)]
pub struct ServiceConfig {
    pub addr: SocketAddr,
    pub store: PathBuf,
    pub corpus: Option<PathBuf>,
    pub cache: Option<PathBuf>,
    pub locale: String,
}

#[derive(Clone)]
struct AppState {
    platform: Arc<Platform>,
}

/// An error plus the locale its message is rendered in.
#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: Box<ErrorBody>,
}

impl ApiError {
    fn platform(e: PlatformError, locale: &str) -> Self {
        ApiError {
            status: StatusCode::from_u16(e.status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR),
            body: Box::new(e.body(locale)),
        }
    }

    fn malformed(detail: String, locale: &str) -> Self {
        let key = "request.malformed";
        ApiError {
            status: StatusCode::BAD_REQUEST,
            body: Box::new(ErrorBody {
                error: key.to_string(),
                message: i18n::message(locale, key, &[("detail", &detail)]),
                args: [("detail".to_string(), detail)].into(),
                report: None,
                stages: None,
            }),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(*self.body)).into_response()
    }
}

/// First `Accept-Language` tag with a shipped catalog, else the default.
fn locale(headers: &HeaderMap, fallback: &str) -> String {
    headers
        .get(header::ACCEPT_LANGUAGE)
        .and_then(|v| v.to_str().ok())
        .into_iter()
        .flat_map(|v| v.split(','))
        .map(|tag| tag.split(';').next().unwrap_or("").trim())
        .map(|tag| tag.split(['-', '_']).next().unwrap_or(tag).to_ascii_lowercase())
        .find(|lang| i18n::LOCALES.contains(&lang.as_str()))
        .unwrap_or_else(|| fallback.to_string())
}

fn decode<T: DeserializeOwned + Default>(body: &Bytes, locale: &str) -> Result<T, ApiError> {
    if body.iter().all(u8::is_ascii_whitespace) {
        return Ok(T::default());
    }
    serde_json::from_slice(body).map_err(|e| ApiError::malformed(e.to_string(), locale))
}

fn decode_required<T: DeserializeOwned>(body: &Bytes, locale: &str) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::malformed(e.to_string(), locale))
}

fn xml(bytes: Vec<u8>) -> Response {
    ([(header::CONTENT_TYPE, XML_CONTENT_TYPE)], bytes).into_response()
}

/// JSON form of `POST /apps`. A non-JSON body is taken as the spec itself,
/// with author and visibility in the query string.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct PublishBody {
    pub spec: String,
    #[serde(default)]
    pub author: String,
    #[serde(default)]
    pub visibility: Visibility,
}

#[derive(Debug, Clone, Default, Deserialize)]
struct PublishQuery {
    #[serde(default)]
    author: String,
    #[serde(default)]
    visibility: Visibility,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct NewSession {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub from_app: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Fulfill {
    pub app_id: String,
}

/// Body of a stage submission that did not validate.
#[derive(Debug, Clone, Serialize)]
pub struct StageRejected {
    #[serde(flatten)]
    pub error: ErrorBody,
    pub session: SessionView,
}

fn is_json(headers: &HeaderMap) -> bool {
    headers
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.starts_with("application/json"))
}

async fn publish_app(
    State(st): State<AppState>,
    Query(q): Query<PublishQuery>,
    headers: HeaderMap,
    body: Bytes,
) -> Result<Response, ApiError> {
    let loc = locale(&headers, &st.platform.locale);
    let (spec, meta) = if is_json(&headers) {
        let b: PublishBody = decode_required(&body, &loc)?;
        (b.spec.into_bytes(), PublishMeta { author: b.author, visibility: b.visibility })
    } else {
        (body.to_vec(), PublishMeta { author: q.author, visibility: q.visibility })
    };
    let record = st.platform.store.publish(&spec, &meta).map_err(|e| ApiError::platform(e, &loc))?;
    Ok(Json(record).into_response())
}

async fn list_apps(State(st): State<AppState>, headers: HeaderMap) -> Result<Response, ApiError> {
    let loc = locale(&headers, &st.platform.locale);
    let apps = st.platform.store.list_apps().map_err(|e| ApiError::platform(e, &loc))?;
    Ok(Json(apps).into_response())
}

async fn download_app(
    State(st): State<AppState>,
    Path(id): Path<String>,
    headers: HeaderMap,
) -> Result<Response, ApiError> {
    let loc = locale(&headers, &st.platform.locale);
    let bytes = st.platform.store.download(&id).map_err(|e| ApiError::platform(e, &loc))?;
    Ok(xml(bytes))
}

async fn create_request(State(st): State<AppState>, headers: HeaderMap, body: Bytes) -> Result<Response, ApiError> {
    let loc = locale(&headers, &st.platform.locale);
    let meta: RequestMeta = decode_required(&body, &loc)?;
    let request = st.platform.store.create_request(&meta).map_err(|e| ApiError::platform(e, &loc))?;
    Ok((StatusCode::CREATED, Json(request)).into_response())
}

async fn list_requests(State(st): State<AppState>, headers: HeaderMap) -> Result<Response, ApiError> {
    let loc = locale(&headers, &st.platform.locale);
    let all = st.platform.store.list_requests().map_err(|e| ApiError::platform(e, &loc))?;
    Ok(Json(all).into_response())
}

async fn fulfill_request(
    State(st): State<AppState>,
    Path(id): Path<String>,
    headers: HeaderMap,
    body: Bytes,
) -> Result<Response, ApiError> {
    let loc = locale(&headers, &st.platform.locale);
    let f: Fulfill = decode_required(&body, &loc)?;
    let request = st.platform.store.fulfill_request(&id, &f.app_id).map_err(|e| ApiError::platform(e, &loc))?;
    Ok(Json(request).into_response())
}

async fn create_session(State(st): State<AppState>, headers: HeaderMap, body: Bytes) -> Result<Response, ApiError> {
    let loc = locale(&headers, &st.platform.locale);
    let req: NewSession = decode(&body, &loc)?;
    let view = st.platform.create_session(req.from_app.as_deref()).map_err(|e| ApiError::platform(e, &loc))?;
    Ok((StatusCode::CREATED, Json(view)).into_response())
}

async fn get_session(
    State(st): State<AppState>,
    Path(id): Path<String>,
    headers: HeaderMap,
) -> Result<Response, ApiError> {
    let loc = locale(&headers, &st.platform.locale);
    let view = st.platform.session(&id).map_err(|e| ApiError::platform(e, &loc))?;
    Ok(Json(view).into_response())
}

async fn submit_stage(
    State(st): State<AppState>,
    Path((id, stage)): Path<(String, u32)>,
    headers: HeaderMap,
    body: Bytes,
) -> Result<Response, ApiError> {
    let loc = locale(&headers, &st.platform.locale);
    let payload: serde_json::Value = decode_required(&body, &loc)?;
    let StageOutcome { report, session } =
        st.platform.submit_stage(&id, stage, &payload).map_err(|e| ApiError::platform(e, &loc))?;
    if report.ok {
        return Ok(Json(StageOutcome { report, session }).into_response());
    }
    let error = ErrorBody {
        error: "spec.invalid".to_string(),
        message: i18n::message(&loc, "spec.invalid", &[]),
        args: Default::default(),
        report: Some(report),
        stages: None,
    };
    Ok((StatusCode::UNPROCESSABLE_ENTITY, Json(StageRejected { error, session })).into_response())
}

async fn preview(
    State(st): State<AppState>,
    Path(id): Path<String>,
    headers: HeaderMap,
    body: Bytes,
) -> Result<Response, ApiError> {
    let loc = locale(&headers, &st.platform.locale);
    let req: PreviewRequest = decode_required(&body, &loc)?;
    let out = st.platform.preview(&id, &req).map_err(|e| ApiError::platform(e, &loc))?;
    Ok(Json(out).into_response())
}

async fn export(State(st): State<AppState>, Path(id): Path<String>, headers: HeaderMap) -> Result<Response, ApiError> {
    let loc = locale(&headers, &st.platform.locale);
    let bytes = st.platform.export(&id).map_err(|e| ApiError::platform(e, &loc))?;
    Ok(xml(bytes))
}

pub fn router(platform: Arc<Platform>) -> Router {
    Router::new()
        .route("/apps", post(publish_app).get(list_apps))
        .route("/apps/{id}", get(download_app))
        .route("/requests", post(create_request).get(list_requests))
        .route("/requests/{id}/fulfill", post(fulfill_request))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/stages/{n}", post(submit_stage))
        .route("/sessions/{id}/preview", post(preview))
        .route("/sessions/{id}/export", post(export))
        .with_state(AppState { platform })
}

pub fn open_platform(config: &ServiceConfig) -> Result<Platform, PlatformError> {
    Platform::open(&config.store, config.corpus.as_deref(), config.cache.as_deref(), &config.locale)
}

/// Binds and serves until the process is stopped.
pub async fn serve(config: ServiceConfig) -> std::io::Result<()> {
    let platform = open_platform(&config).map_err(|e| std::io::Error::other(e.to_string()))?;
    let listener = tokio::net::TcpListener::bind(config.addr).await?;
    eprintln!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(Arc::new(platform))).await
}
