//! HTTP service behind the curation UI.
//!
//! | Route | Purpose |
//! |---|---|
//! | `GET /api/review/queue` | pending tracks, roughest first |
//! | `GET /api/review/{track}/media/{kind}` | frame list for `rgb`, `masked` or `keypoints`; `X-Frame-Count` header |
//! | `GET /api/review/{track}/media/{kind}/{frame}` | one rendered PNG frame |
//! | `POST /api/review/{track}` | record an accept or reject decision |
//! | `GET /api/stats` | item counts per stage and curation totals |

use std::collections::BTreeMap;
use std::sync::Arc;

use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use mf_core::Skeleton;
use mf_pipeline::media::{self, frame_name, Layout};
use mf_pipeline::records::TrackRecord;
use mf_store::{Decision, Filter, ReviewCriteria, Stage, Status, Store, StoreError};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::overlay;

pub const FRAME_COUNT_HEADER: &str = "x-frame-count";

pub struct ReviewState {
    pub store: Arc<Store>,
    pub layout: Layout,
    pub skeleton: Skeleton,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueueEntry {
    pub track_id: String,
    pub category: Option<String>,
    pub clip_id: Option<String>,
    pub frames: Option<u64>,
    pub roughness: Option<f64>,
    pub mean_occlusion: Option<f64>,
    pub mean_flow: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Queue {
    pub items: Vec<QueueEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MediaIndex {
    pub track_id: String,
    pub kind: MediaKind,
    pub frames: usize,
    pub frame_urls: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MediaKind {
    Rgb,
    Masked,
    Keypoints,
}

impl std::str::FromStr for MediaKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "rgb" => Ok(Self::Rgb),
            "masked" => Ok(Self::Masked),
            "keypoints" => Ok(Self::Keypoints),
            other => Err(format!("unknown media kind '{other}'")),
        }
    }
}

impl MediaKind {
    fn as_str(self) -> &'static str {
        match self {
            Self::Rgb => "rgb",
            Self::Masked => "masked",
            Self::Keypoints => "keypoints",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecisionBody {
    pub decision: Decision,
    pub criteria: ReviewCriteria,
    #[serde(default)]
    pub reviewer: Option<String>,
}

struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({"error": self.1}))).into_response()
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        let status = match &e {
            StoreError::NotFound { .. } => StatusCode::NOT_FOUND,
            e if e.is_conflict() => StatusCode::CONFLICT,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError(status, e.to_string())
    }
}

impl From<mf_pipeline::PipelineError> for ApiError {
    fn from(e: mf_pipeline::PipelineError) -> Self {
        ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string())
    }
}

type ApiResult<T> = Result<T, ApiError>;

pub fn router(state: Arc<ReviewState>) -> Router {
    Router::new()
        .route("/api/review/queue", get(queue))
        .route("/api/review/{track}", axum::routing::post(decide))
        .route("/api/review/{track}/media/{kind}", get(media_index))
        .route("/api/review/{track}/media/{kind}/{frame}", get(media_frame))
        .route("/api/stats", get(stats))
        .with_state(state)
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> ApiResult<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
}

async fn queue(State(st): State<Arc<ReviewState>>) -> ApiResult<Json<Queue>> {
    blocking(move || {
        let items = st.store.query(&Filter::stage(Stage::Review).with_status(Status::Unprocessed))?;
        let mut entries: Vec<QueueEntry> = items
            .iter()
            .map(|i| QueueEntry {
                track_id: i.id.clone(),
                category: i.category().map(str::to_string),
                clip_id: i.metadata.get("clip_id").and_then(|v| v.as_str()).map(str::to_string),
                frames: i.metadata.get("frames").and_then(|v| v.as_u64()),
                roughness: i.meta_f64("roughness"),
                mean_occlusion: i.meta_f64("mean_occlusion"),
                mean_flow: i.meta_f64("mean_flow"),
            })
            .collect();
        entries.sort_by(|a, b| {
            let r = |e: &QueueEntry| e.roughness.unwrap_or(f64::NEG_INFINITY);
            r(b).total_cmp(&r(a)).then_with(|| a.track_id.cmp(&b.track_id))
        });
        Ok(Json(Queue { items: entries }))
    })
    .await
}

fn track_record(st: &ReviewState, track: &str) -> ApiResult<TrackRecord> {
    if track.contains(['/', '\\']) || track.starts_with('.') {
        return Err(ApiError(StatusCode::BAD_REQUEST, format!("invalid track id '{track}'")));
    }
    let path = st.layout.track_dir(track).join("track.json");
    if !path.is_file() {
        return Err(ApiError(StatusCode::NOT_FOUND, format!("no track '{track}'")));
    }
    Ok(media::read_json(&path)?)
}

fn parse_kind(kind: &str) -> ApiResult<MediaKind> {
    kind.parse().map_err(|e| ApiError(StatusCode::NOT_FOUND, e))
}

async fn media_index(State(st): State<Arc<ReviewState>>, Path((track, kind)): Path<(String, String)>) -> ApiResult<Response> {
    let kind = parse_kind(&kind)?;
    blocking(move || {
        let record = track_record(&st, &track)?;
        if kind == MediaKind::Keypoints && !st.layout.track_dir(&track).join("features/kp").is_dir() {
            return Err(ApiError(StatusCode::NOT_FOUND, format!("track '{track}' has no keypoints yet")));
        }
        let n = record.len();
        let index = MediaIndex {
            frame_urls: (0..n).map(|i| format!("/api/review/{track}/media/{}/{i}", kind.as_str())).collect(),
            track_id: track,
            kind,
            frames: n,
        };
        Ok(([(FRAME_COUNT_HEADER, n.to_string())], Json(index)).into_response())
    })
    .await
}

async fn media_frame(
    State(st): State<Arc<ReviewState>>,
    Path((track, kind, frame)): Path<(String, String, usize)>,
) -> ApiResult<Response> {
    let kind = parse_kind(&kind)?;
    blocking(move || {
        let record = track_record(&st, &track)?;
        if frame >= record.len() {
            return Err(ApiError(StatusCode::NOT_FOUND, format!("frame {frame} out of range 0..{}", record.len())));
        }
        let dir = st.layout.track_dir(&track);
        let rgb = media::read_rgb(&dir.join("rgb").join(frame_name(frame, "png")))?;
        let img = match kind {
            MediaKind::Rgb => rgb,
            MediaKind::Masked => overlay::masked(&rgb, &media::read_mask(&dir.join("mask").join(frame_name(frame, "png")))?),
            MediaKind::Keypoints => {
                let path = dir.join("features/kp").join(frame_name(frame, "json"));
                if !path.is_file() {
                    return Err(ApiError(StatusCode::NOT_FOUND, format!("track '{track}' has no keypoints yet")));
                }
                overlay::keypoints(&rgb, &media::read_keypoints(&path)?, &st.skeleton)
            }
        };
        let png = mf_backend::png::encode_rgb(&img);
        Ok((
            [(header::CONTENT_TYPE, "image/png".to_string()), (header::HeaderName::from_static(FRAME_COUNT_HEADER), record.len().to_string())],
            png,
        )
            .into_response())
    })
    .await
}

async fn decide(State(st): State<Arc<ReviewState>>, Path(track): Path<String>, Json(body): Json<DecisionBody>) -> ApiResult<Response> {
    blocking(move || {
        let reviewer = body.reviewer.as_deref().unwrap_or("anonymous");
        let record = st.store.decide(&track, body.decision, body.criteria, reviewer)?;
        Ok(Json(record).into_response())
    })
    .await
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub stages: BTreeMap<String, BTreeMap<String, usize>>,
    pub pending_review: usize,
    pub accepted: usize,
    pub rejected: usize,
    pub accepted_by_category: BTreeMap<String, usize>,
}

async fn stats(State(st): State<Arc<ReviewState>>) -> ApiResult<Json<Stats>> {
    blocking(move || {
        let mut stages: BTreeMap<String, BTreeMap<String, usize>> = BTreeMap::new();
        for (stage, status, n) in st.store.stats()? {
            stages.entry(stage.to_string()).or_default().insert(status.to_string(), n);
        }
        let curation = st.store.curation(None)?;
        let mut accepted_by_category = BTreeMap::new();
        for r in curation.iter().filter(|r| r.decision == Decision::Accept) {
            *accepted_by_category.entry(r.category.clone().unwrap_or_default()).or_insert(0) += 1;
        }
        let pending_review = stages.get("review").and_then(|s| s.get("unprocessed")).copied().unwrap_or(0);
        Ok(Json(Stats {
            stages,
            pending_review,
            accepted: curation.iter().filter(|r| r.decision == Decision::Accept).count(),
            rejected: curation.iter().filter(|r| r.decision == Decision::Reject).count(),
            accepted_by_category,
        }))
    })
    .await
}
