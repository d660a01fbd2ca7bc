//! HTTP caption and annotation service.
//!
//! The model and dataset are immutable after startup. The only mutable state
//! is the annotation store, whose writes are serialized behind one lock and
//! versioned per subject.

use std::collections::HashMap;
use std::future::Future;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use image::{ExtendedColorType, ImageEncoder};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sovc_core::annotate::{
    rank_candidates, read_corrections, read_detections, write_corrections, CorrectionFile, Decision, Detection,
    SubjectCandidate, SubjectKey, TrigramSimilarity,
};
use sovc_core::data::{crop_subject, load_dataset, load_frames, BBox, Dataset, Frames, Image, SubjectRegion};
use sovc_core::model::{load_checkpoint, CaptionModel, DecodeMode};
use sovc_core::pipeline::{caption_request, validate_request, CaptionRequest};
use sovc_core::sampler::SamplerConfig;

use crate::config::RunConfig;
use crate::error::CliError;

#[derive(Debug, Default)]
pub struct AnnotationStore {
    pub file: CorrectionFile,
    versions: HashMap<String, u64>,
    /// Persisted after every write when set.
    path: Option<PathBuf>,
}

impl AnnotationStore {
    pub fn open(path: Option<PathBuf>) -> Result<Self, CliError> {
        let file = match &path {
            Some(p) if p.exists() => read_corrections(p)?,
            _ => CorrectionFile::default(),
        };
        let versions = file.entries.keys().map(|k| (k.clone(), 1)).collect();
        Ok(AnnotationStore { file, versions, path })
    }

    pub fn version(&self, key: &SubjectKey) -> u64 {
        self.versions.get(&key.to_string()).copied().unwrap_or(0)
    }
}

pub struct AppState {
    pub dataset: Dataset,
    pub model: CaptionModel,
    pub model_id: String,
    pub sampler: SamplerConfig,
    pub decode: DecodeMode,
    /// Ranked detections per subject, shown to reviewers.
    pub candidates: HashMap<SubjectKey, Vec<SubjectCandidate>>,
    frames: Mutex<HashMap<String, Arc<Frames>>>,
    store: Mutex<AnnotationStore>,
}

impl AppState {
    pub fn new(
        dataset: Dataset,
        model: CaptionModel,
        model_id: String,
        sampler: SamplerConfig,
        decode: DecodeMode,
        store: AnnotationStore,
    ) -> Self {
        AppState {
            dataset,
            model,
            model_id,
            sampler,
            decode,
            candidates: HashMap::new(),
            frames: Mutex::new(HashMap::new()),
            store: Mutex::new(store),
        }
    }

    /// Ranks `detections` for every subject of the dataset.
    pub fn with_detections(mut self, detections: &[sovc_core::annotate::VideoDetection]) -> Self {
        let mut by_video: HashMap<&str, Vec<Detection>> = HashMap::new();
        for d in detections {
            by_video.entry(&d.video_id).or_default().push(d.detection.clone());
        }
        let sim = TrigramSimilarity::new();
        for v in &self.dataset.videos {
            let dets = by_video.get(v.video_id.as_str()).map(Vec::as_slice).unwrap_or(&[]);
            for s in &v.subjects {
                self.candidates
                    .insert(SubjectKey::new(&v.video_id, &s.subject_id), rank_candidates(&s.subject_word, dets, &sim));
            }
        }
        self
    }

    pub fn load(cfg: &RunConfig) -> Result<Self, CliError> {
        let ds_path = cfg.dataset_path()?;
        let ckpt = cfg.checkpoint_path()?;
        for (p, what) in [(ds_path, "dataset"), (ckpt, "checkpoint")] {
            if !p.exists() {
                return Err(CliError::input(format!("{what} {} does not exist", p.display())));
            }
        }
        let state = AppState::new(
            load_dataset(ds_path)?,
            load_checkpoint(ckpt)?,
            crate::commands::model_id(ckpt)?,
            cfg.sampler.clone(),
            cfg.decode_mode()?,
            AnnotationStore::open(cfg.service.annotations.clone())?,
        );
        Ok(match &cfg.service.detections {
            Some(p) => state.with_detections(&read_detections(p)?),
            None => state,
        })
    }

    fn frames(&self, video_id: &str) -> Result<Arc<Frames>, ApiError> {
        if let Some(f) = self.frames.lock().expect("frame cache lock").get(video_id) {
            return Ok(f.clone());
        }
        let video = self.dataset.video(video_id).ok_or_else(|| unknown_video(video_id))?;
        let f = Arc::new(load_frames(video, &self.dataset.root)?);
        self.frames
            .lock()
            .expect("frame cache lock")
            .insert(video_id.to_string(), f.clone());
        Ok(f)
    }
}

/// Error body `{error, field}`; `field` names the offending input when known.
#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    error: String,
    field: Option<String>,
    extra: Option<Value>,
}

impl ApiError {
    fn new(status: StatusCode, error: impl Into<String>, field: Option<&str>) -> Self {
        ApiError {
            status,
            error: error.into(),
            field: field.map(str::to_string),
            extra: None,
        }
    }

    fn invalid(field: &str, error: impl Into<String>) -> Self {
        ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, error, Some(field))
    }
}

impl From<sovc_core::Error> for ApiError {
    fn from(e: sovc_core::Error) -> Self {
        match e {
            sovc_core::Error::Validation { location, message } => ApiError::invalid(&location, message),
            other => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, other.to_string(), None),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({"error": self.error, "field": self.field});
        if let (Some(Value::Object(extra)), Value::Object(b)) = (self.extra, &mut body) {
            b.extend(extra);
        }
        (self.status, Json(body)).into_response()
    }
}

fn unknown_video(id: &str) -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, format!("unknown video {id:?}"), Some("video_id"))
}

type Shared = Arc<AppState>;

pub fn router(state: Shared) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/videos", get(list_videos))
        .route("/videos/{id}", get(get_video))
        .route("/videos/{id}/frames/{index}", get(get_frame))
        .route("/caption", post(post_caption))
        .route("/annotations/{video_id}/{subject_id}", get(get_annotation).put(put_annotation))
        .with_state(state)
}

/// Binds `addr` and serves until `shutdown` resolves. A busy port is a
/// startup error.
pub async fn serve(state: AppState, addr: &str, shutdown: impl Future<Output = ()> + Send + 'static) -> Result<(), CliError> {
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| CliError::internal(format!("cannot listen on {addr}: {e}")))?;
    log::info!("serving on http://{}", listener.local_addr()?);
    axum::serve(listener, router(Arc::new(state)))
        .with_graceful_shutdown(shutdown)
        .await?;
    Ok(())
}

async fn health(State(st): State<Shared>) -> Json<Value> {
    Json(json!({"status": "ok", "model_id": st.model_id, "videos": st.dataset.videos.len()}))
}

#[derive(Serialize)]
struct VideoSummary<'a> {
    video_id: &'a str,
    num_frames: u32,
    width: u32,
    height: u32,
    subjects: Vec<&'a str>,
}

async fn list_videos(State(st): State<Shared>) -> Response {
    let list: Vec<VideoSummary> = st
        .dataset
        .videos
        .iter()
        .map(|v| VideoSummary {
            video_id: &v.video_id,
            num_frames: v.num_frames,
            width: v.width,
            height: v.height,
            subjects: v.subjects.iter().map(|s| s.subject_id.as_str()).collect(),
        })
        .collect();
    Json(list).into_response()
}

async fn get_video(State(st): State<Shared>, UrlPath(id): UrlPath<String>) -> Result<Response, ApiError> {
    let v = st.dataset.video(&id).ok_or_else(|| unknown_video(&id))?;
    Ok(Json(v).into_response())
}

#[derive(Deserialize)]
struct FrameQuery {
    bbox: Option<String>,
}

/// PNG encoding of an RGB image.
pub fn encode_png(img: &Image) -> Vec<u8> {
    let mut buf = Vec::new();
    image::codecs::png::PngEncoder::new(&mut buf)
        .write_image(&img.data, img.width as u32, img.height as u32, ExtendedColorType::Rgb8)
        .expect("in-memory PNG encoding");
    buf
}

async fn get_frame(
    State(st): State<Shared>,
    UrlPath((id, index)): UrlPath<(String, String)>,
    Query(q): Query<FrameQuery>,
) -> Result<Response, ApiError> {
    let video = st.dataset.video(&id).ok_or_else(|| unknown_video(&id))?;
    let index: u32 = index
        .parse()
        .map_err(|_| ApiError::invalid("frame_index", format!("{index:?} is not a frame index")))?;
    if index >= video.num_frames {
        return Err(ApiError::invalid(
            "frame_index",
            format!("frame_index {index} out of range (video has {} frames)", video.num_frames),
        ));
    }
    let bbox = match &q.bbox {
        Some(b) => {
            let b: BBox = b.parse().map_err(|e: sovc_core::Error| ApiError::invalid("bbox", e.to_string()))?;
            b.check_within(video.width, video.height).map_err(|m| ApiError::invalid("bbox", m))?;
            Some(b)
        }
        None => None,
    };
    let st2 = st.clone();
    let png = tokio::task::spawn_blocking(move || -> Result<Vec<u8>, ApiError> {
        let frames = st2.frames(&id)?;
        let img = match bbox {
            Some(bbox) => crop_subject(&frames, &SubjectRegion { frame_index: index, bbox }),
            None => frames.frame(index as usize).to_image(),
        };
        Ok(encode_png(&img))
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string(), None))??;
    Ok(([(header::CONTENT_TYPE, "image/png")], png).into_response())
}

async fn post_caption(State(st): State<Shared>, body: Bytes) -> Result<Response, ApiError> {
    let req: CaptionRequest = serde_json::from_slice(&body).map_err(|e| ApiError::invalid("body", e.to_string()))?;
    validate_request(&st.dataset, &req)?;
    let st2 = st.clone();
    let resp = tokio::task::spawn_blocking(move || -> Result<_, ApiError> {
        let frames = st2.frames(&req.video_id)?;
        Ok(caption_request(&st2.model, &st2.dataset, &frames, &req, &st2.sampler, st2.decode, &st2.model_id)?)
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string(), None))??;
    Ok(Json(resp).into_response())
}

fn subject_key(st: &AppState, video_id: &str, subject_id: &str) -> Result<SubjectKey, ApiError> {
    let v = st.dataset.video(video_id).ok_or_else(|| unknown_video(video_id))?;
    v.subject(subject_id).ok_or_else(|| {
        ApiError::new(
            StatusCode::NOT_FOUND,
            format!("video {video_id:?} has no subject {subject_id:?}"),
            Some("subject_id"),
        )
    })?;
    Ok(SubjectKey::new(video_id, subject_id))
}

fn annotation_body(st: &AppState, key: &SubjectKey, decision: Option<&Decision>, version: u64) -> Value {
    let candidates = st.candidates.get(key).map(Vec::as_slice).unwrap_or(&[]);
    json!({
        "key": key.to_string(),
        "decision": decision,
        "version": version,
        "candidates": candidates,
    })
}

async fn get_annotation(
    State(st): State<Shared>,
    UrlPath((video_id, subject_id)): UrlPath<(String, String)>,
) -> Result<Response, ApiError> {
    let key = subject_key(&st, &video_id, &subject_id)?;
    let store = st.store.lock().expect("annotation store lock");
    Ok(Json(annotation_body(&st, &key, store.file.get(&key), store.version(&key))).into_response())
}

/// Body of a PUT. `version`, when given, must equal the stored version.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PutAnnotation {
    decision: Decision,
    #[serde(default)]
    version: Option<u64>,
}

async fn put_annotation(
    State(st): State<Shared>,
    UrlPath((video_id, subject_id)): UrlPath<(String, String)>,
    body: Bytes,
) -> Result<Response, ApiError> {
    let key = subject_key(&st, &video_id, &subject_id)?;
    let put: PutAnnotation = serde_json::from_slice(&body).map_err(|e| ApiError::invalid("body", e.to_string()))?;
    let video = st.dataset.video(&video_id).expect("checked above");
    match &put.decision {
        Decision::Manual(region) => video.check_region(region).map_err(|m| ApiError::invalid("decision", m))?,
        Decision::Accept(i) => {
            let n = st.candidates.get(&key).map_or(0, Vec::len);
            if *i >= n {
                return Err(ApiError::invalid("decision", format!("accept index {i} out of range ({n} candidates)")));
            }
        }
        Decision::Discard => {}
    }

    let mut store = st.store.lock().expect("annotation store lock");
    let current = store.version(&key);
    if let Some(v) = put.version {
        if v != current {
            let mut err = ApiError::new(
                StatusCode::CONFLICT,
                format!("version {v} is stale, current version is {current}"),
                Some("version"),
            );
            err.extra = Some(json!({"current_version": current}));
            return Err(err);
        }
    }
    let mut next = store.file.clone();
    next.insert(&key, put.decision.clone());
    if let Some(p) = &store.path {
        write_corrections(p, &next)?;
    }
    store.file = next;
    store.versions.insert(key.to_string(), current + 1);
    Ok(Json(annotation_body(&st, &key, Some(&put.decision), current + 1)).into_response())
}
