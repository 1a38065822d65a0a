//! HTTP front end for a labeling [`Session`].
//!
//! One session is served per process. Mutations take the write lock and run
//! one at a time in arrival order; reads share the read lock and so only ever
//! see fully applied edits. Every mutation is saved before it is answered.

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::rejection::{JsonRejection, PathRejection};
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use pointbrush_core::registration::CorrespondenceMode;
use pointbrush_core::{Error, LabelId, LabelPalette, PropagationParams, PropagationReport, Session};
use serde::{Deserialize, Serialize};
use tokio::sync::RwLock;

pub type SharedSession = Arc<RwLock<Session>>;

#[derive(Debug)]
pub enum ApiError {
    Core(Error),
    /// The request body could not be decoded.
    Body(String),
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        ApiError::Core(e)
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError::Body(e.body_text())
    }
}

#[derive(Serialize)]
struct ErrorBody {
    error: String,
}

impl ApiError {
    fn status(&self) -> StatusCode {
        let e = match self {
            ApiError::Core(e) => e,
            ApiError::Body(_) => return StatusCode::BAD_REQUEST,
        };
        match e {
            Error::FrameOutOfRange { .. } => StatusCode::NOT_FOUND,
            Error::NothingToUndo | Error::NoLabelsAtStart(_) => StatusCode::CONFLICT,
            Error::LabelNotInPalette(_)
            | Error::NegativeRadius
            | Error::InvalidParams(_)
            | Error::InvalidPalette(_)
            | Error::InvalidPoint { .. } => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let error = match &self {
            ApiError::Core(e) => e.to_string(),
            ApiError::Body(msg) => msg.clone(),
        };
        (self.status(), Json(ErrorBody { error })).into_response()
    }
}

type ApiResult<T> = std::result::Result<T, ApiError>;

#[derive(Debug, Serialize, Deserialize)]
pub struct BrushRequest {
    pub frame: usize,
    pub center: [f64; 3],
    pub radius: f64,
    pub label: LabelId,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct BrushResponse {
    pub changed: usize,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct UndoResponse {
    pub frame: usize,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PropagateRequest {
    pub from: usize,
    pub to: usize,
    /// Overrides the session's correspondence mode for this run only.
    #[serde(default)]
    pub mode: Option<CorrespondenceMode>,
}

pub fn router(session: SharedSession) -> Router {
    Router::new()
        .route("/api/sequence", get(sequence_info))
        .route("/api/frame/{i}", get(frame))
        .route("/api/mask/{i}", get(mask))
        .route("/api/brush", post(brush))
        .route("/api/undo", post(undo))
        .route("/api/propagate", post(propagate))
        .route("/api/palette", get(get_palette).put(put_palette))
        .route("/api/params", get(get_params).put(put_params))
        .with_state(session)
}

async fn read<T, F>(session: SharedSession, f: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce(&Session) -> pointbrush_core::Result<T> + Send + 'static,
{
    tokio::task::spawn_blocking(move || f(&session.blocking_read()))
        .await
        .expect("read task panicked")
        .map_err(ApiError::Core)
}

/// Applies `f` under the write lock and saves before releasing it.
async fn write<T, F>(session: SharedSession, f: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce(&mut Session) -> pointbrush_core::Result<T> + Send + 'static,
{
    tokio::task::spawn_blocking(move || {
        let mut s = session.blocking_write();
        let out = f(&mut s)?;
        s.save()?;
        Ok(out)
    })
    .await
    .expect("write task panicked")
    .map_err(ApiError::Core)
}

fn frame_index(path: Result<Path<usize>, PathRejection>) -> ApiResult<usize> {
    path.map(|Path(i)| i).map_err(|e| ApiError::Body(e.body_text()))
}

fn binary(bytes: Vec<u8>) -> Response {
    ([(header::CONTENT_TYPE, "application/octet-stream")], Bytes::from(bytes)).into_response()
}

async fn sequence_info(State(s): State<SharedSession>) -> ApiResult<Response> {
    let info = read(s, |s| Ok(s.info())).await?;
    Ok(Json(info).into_response())
}

async fn frame(State(s): State<SharedSession>, path: Result<Path<usize>, PathRejection>) -> ApiResult<Response> {
    let i = frame_index(path)?;
    Ok(binary(read(s, move |s| s.frame_bytes(i)).await?))
}

async fn mask(State(s): State<SharedSession>, path: Result<Path<usize>, PathRejection>) -> ApiResult<Response> {
    let i = frame_index(path)?;
    Ok(binary(read(s, move |s| s.mask_bytes(i)).await?))
}

async fn brush(State(s): State<SharedSession>, body: Result<Json<BrushRequest>, JsonRejection>) -> ApiResult<Json<BrushResponse>> {
    let Json(req) = body?;
    let changed = write(s, move |s| {
        s.apply_brush(req.frame, req.center.into(), req.radius, req.label)
    })
    .await?;
    Ok(Json(BrushResponse { changed }))
}

async fn undo(State(s): State<SharedSession>) -> ApiResult<Json<UndoResponse>> {
    let frame = write(s, |s| s.undo()).await?;
    Ok(Json(UndoResponse { frame }))
}

async fn propagate(
    State(s): State<SharedSession>,
    body: Result<Json<PropagateRequest>, JsonRejection>,
) -> ApiResult<Json<Vec<PropagationReport>>> {
    let Json(req) = body?;
    let reports = write(s, move |s| {
        let mut params = s.params().clone();
        if let Some(mode) = req.mode {
            params.icp.mode = mode;
        }
        s.run_propagation_with(req.from, req.to, &params)
    })
    .await?;
    Ok(Json(reports))
}

async fn get_palette(State(s): State<SharedSession>) -> ApiResult<Json<LabelPalette>> {
    Ok(Json(read(s, |s| Ok(s.palette().clone())).await?))
}

async fn put_palette(State(s): State<SharedSession>, body: Result<Json<LabelPalette>, JsonRejection>) -> ApiResult<Json<LabelPalette>> {
    let Json(p) = body?;
    let palette = write(s, move |s| {
        s.set_palette(p)?;
        Ok(s.palette().clone())
    })
    .await?;
    Ok(Json(palette))
}

async fn get_params(State(s): State<SharedSession>) -> ApiResult<Json<PropagationParams>> {
    Ok(Json(read(s, |s| Ok(s.params().clone())).await?))
}

async fn put_params(
    State(s): State<SharedSession>,
    body: Result<Json<PropagationParams>, JsonRejection>,
) -> ApiResult<Json<PropagationParams>> {
    let Json(p) = body?;
    let params = write(s, move |s| {
        s.set_params(p)?;
        Ok(s.params().clone())
    })
    .await?;
    Ok(Json(params))
}
