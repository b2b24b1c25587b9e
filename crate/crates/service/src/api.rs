//! Request handlers.

use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::Json;
use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use vessel_core::metrics::LandmarkSet;
use vessel_core::pipeline::{run_minpath, run_track, MinpathOptions};
use vessel_core::tracker::TrackerConfig;
use vessel_core::volume::{load_volume, volume_from_parts, VolumeHeader};
use vessel_core::{Centerline, Error, Volume};

use crate::registry::{new_id, Registry, RunStatus, Session};
use crate::slice::{encode_png, slice_pixels, slice_shape, slice_window, SliceAxis};
use crate::AppState;

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub message: String,
}

impl ApiError {
    pub fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError {
            status,
            message: message.into(),
        }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, message)
    }

    fn not_found(what: &str, id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, format!("unknown {what} {id}"))
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::OutOfBounds(_) => StatusCode::UNPROCESSABLE_ENTITY,
            _ if e.is_data_error() => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        Self::new(status, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn parse<T: for<'de> Deserialize<'de>>(body: &[u8]) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("malformed request: {e}")))
}

fn session(reg: &Registry, id: &str) -> ApiResult<Arc<Session>> {
    reg.session(id).ok_or_else(|| ApiError::not_found("session", id))
}

/// A volume given either as a file path on the server or inline.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum VolumeSource {
    Path(PathBuf),
    Inline {
        header: VolumeHeader,
        payload_base64: String,
    },
}

impl VolumeSource {
    fn load(self) -> ApiResult<Volume> {
        match self {
            VolumeSource::Path(p) => Ok(load_volume(p)?),
            VolumeSource::Inline {
                header,
                payload_base64,
            } => {
                let bytes = base64::engine::general_purpose::STANDARD
                    .decode(payload_base64)
                    .map_err(|e| ApiError::bad_request(format!("payload is not base64: {e}")))?;
                Ok(volume_from_parts(header, &bytes)?)
            }
        }
    }
}

#[derive(Debug, Deserialize)]
pub struct LoadRequest {
    pub volume: VolumeSource,
    #[serde(default)]
    pub vesselness: Option<VolumeSource>,
    #[serde(default)]
    pub minpath_vesselness: Option<VolumeSource>,
    #[serde(default)]
    pub fascia: Option<VolumeSource>,
}

#[derive(Debug, Serialize)]
pub struct SessionInfo {
    pub id: String,
    pub dims: [usize; 3],
    pub spacing_mm: [f64; 3],
    pub origin_mm: [f64; 3],
    pub value_kind: vessel_core::ValueKind,
    pub bounds_mm: [[f64; 3]; 2],
    pub seed_sets: usize,
}

fn info(s: &Session) -> SessionInfo {
    let g = s.volume.geometry();
    let (lo, hi) = g.bounds_mm();
    SessionInfo {
        id: s.id.clone(),
        dims: g.dims,
        spacing_mm: g.spacing_mm,
        origin_mm: g.origin_mm,
        value_kind: s.volume.kind(),
        bounds_mm: [[lo.x, lo.y, lo.z], [hi.x, hi.y, hi.z]],
        seed_sets: s.seed_sets().len(),
    }
}

pub async fn load(State(st): State<AppState>, body: Bytes) -> ApiResult<Response> {
    let req: LoadRequest = parse(&body)?;
    let s = tokio::task::spawn_blocking(move || -> ApiResult<Session> {
        let load = |src: Option<VolumeSource>| src.map(VolumeSource::load).transpose();
        Ok(Session::new(
            new_id(),
            req.volume.load()?,
            load(req.vesselness)?,
            load(req.minpath_vesselness)?,
            load(req.fascia)?,
        )?)
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))??;
    let s = st.registry.insert_session(s);
    log::info!("session {} loaded, dims {:?}", s.id, s.volume.dims());
    Ok((StatusCode::CREATED, Json(info(&s))).into_response())
}

pub async fn get_volume(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<SessionInfo>> {
    let s = session(&st.registry, &id)?;
    Ok(Json(info(&s)))
}

#[derive(Debug, Deserialize)]
pub struct SliceQuery {
    pub axis: Option<SliceAxis>,
    pub index: usize,
    pub wc: Option<f64>,
    pub ww: Option<f64>,
}

pub async fn get_slice(
    State(st): State<AppState>,
    Path(id): Path<String>,
    query: Result<Query<SliceQuery>, axum::extract::rejection::QueryRejection>,
) -> ApiResult<Response> {
    let s = session(&st.registry, &id)?;
    let Query(q) = query.map_err(|e| ApiError::bad_request(e.body_text()))?;
    let axis = q.axis.unwrap_or(SliceAxis::Z);
    let n = s.volume.dims()[axis.index()];
    if q.index >= n {
        return Err(ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            format!("slice index {} out of range 0..{n}", q.index),
        ));
    }
    let window = slice_window(&s.volume, q.wc, q.ww);
    window.validate()?;
    let (w, h) = slice_shape(s.volume.dims(), axis);
    let png = encode_png(w, h, slice_pixels(&s.volume, axis, q.index, &window));
    Ok(([(header::CONTENT_TYPE, "image/png")], png).into_response())
}

pub async fn post_seeds(
    State(st): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Response> {
    let s = session(&st.registry, &id)?;
    let text = std::str::from_utf8(&body).map_err(|_| ApiError::bad_request("body is not UTF-8"))?;
    let set = LandmarkSet::from_json(text).map_err(|e| ApiError::bad_request(e.to_string()))?;
    if let Some(p) = set.points.iter().find(|p| !s.volume.contains(p)) {
        return Err(Error::OutOfBounds([p.x, p.y, p.z]).into());
    }
    let seed_set_id = s.add_seeds(set);
    Ok((StatusCode::CREATED, Json(json!({ "seed_set_id": seed_set_id }))).into_response())
}

pub async fn get_seeds(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let s = session(&st.registry, &id)?;
    let sets = s
        .seed_sets()
        .iter()
        .map(|set| set.to_json().and_then(|t| Ok(serde_json::from_str::<Value>(&t)?)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Json(sets).into_response())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Track,
    Minpath,
}

#[derive(Debug, Deserialize)]
pub struct RunRequest {
    pub session: String,
    pub mode: Mode,
    pub seeds: String,
    #[serde(default)]
    pub tracker: TrackerConfig,
    #[serde(default)]
    pub minpath: MinpathOptions,
}

/// Runs an extraction exactly as the command line does: tracks start at
/// the first seed heading for the second (if any); minimum paths join the
/// first and last seeds.
fn execute(s: &Session, seeds: &LandmarkSet, req: &RunRequest) -> vessel_core::Result<Centerline> {
    let pts = &seeds.points;
    match req.mode {
        Mode::Track => {
            let v = s.track_vesselness()?;
            let fascia = s.fascia.as_deref();
            run_track(&v, Some(&s.normalized), fascia, &pts[0], pts.get(1), &req.tracker)
        }
        Mode::Minpath => {
            let v = s.minpath_vesselness()?;
            run_minpath(&v, &s.normalized, &pts[0], &pts[pts.len() - 1], &req.minpath)
        }
    }
}

pub async fn post_run(State(st): State<AppState>, body: Bytes) -> ApiResult<Response> {
    let req: RunRequest = parse(&body)?;
    let s = session(&st.registry, &req.session)?;
    let seeds = s
        .seeds(&req.seeds)
        .ok_or_else(|| ApiError::not_found("seed set", &req.seeds))?;
    if req.mode == Mode::Minpath && seeds.points.len() < 2 {
        return Err(ApiError::bad_request("a minimum path needs two seeds"));
    }
    req.tracker.validate()?;
    req.minpath.sigmoid.validate()?;
    let run_id = st.registry.start_run(&s.id);
    let reg = st.registry.clone();
    let id = run_id.clone();
    tokio::task::spawn_blocking(move || {
        let outcome = execute(&s, &seeds, &req).map_err(|e| e.to_string());
        if let Err(e) = &outcome {
            log::warn!("run {id} failed: {e}");
        }
        reg.finish_run(&id, outcome);
    });
    Ok((StatusCode::ACCEPTED, Json(json!({ "run_id": run_id }))).into_response())
}

pub async fn get_run(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let run = st.registry.run(&id).ok_or_else(|| ApiError::not_found("run", &id))?;
    let centerline = match &run.centerline {
        Some(c) => serde_json::from_str::<Value>(&c.to_json()?).map_err(Error::from)?,
        None => Value::Null,
    };
    Ok(Json(json!({
        "id": run.id,
        "session": run.session,
        "status": run.status,
        "centerline": centerline,
        "error": run.error,
    })))
}

/// The centerline document exactly as the command line writes it.
pub async fn get_run_centerline(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let run = st.registry.run(&id).ok_or_else(|| ApiError::not_found("run", &id))?;
    match (run.status, run.centerline) {
        (RunStatus::Done, Some(c)) => {
            Ok(([(header::CONTENT_TYPE, "application/json")], c.to_json()?).into_response())
        }
        (RunStatus::Error, _) => Err(ApiError::new(
            StatusCode::CONFLICT,
            run.error.unwrap_or_else(|| "run failed".into()),
        )),
        _ => Err(ApiError::new(StatusCode::CONFLICT, "run still pending")),
    }
}
