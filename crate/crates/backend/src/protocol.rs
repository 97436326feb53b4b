//! Request and response bodies for every model capability.
//!
//! The same types serve in-process dispatch and the HTTP wire format. On the
//! wire, images and masks are base64 PNG strings and grids are base64 blobs
//! of the binary grid codec (see `docs/wire-protocol.md`).

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use mf_core::{BBoxF64, Grid, KeypointsF64, Mask, RgbImage};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Capability {
    TextGenerate,
    EmbedImage,
    EmbedText,
    Detect,
    SegmentTrack,
    Keypoints,
    Depth,
    Flow,
    FetchVideo,
}

impl Capability {
    pub const ALL: [Capability; 9] = [
        Capability::TextGenerate,
        Capability::EmbedImage,
        Capability::EmbedText,
        Capability::Detect,
        Capability::SegmentTrack,
        Capability::Keypoints,
        Capability::Depth,
        Capability::Flow,
        Capability::FetchVideo,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Capability::TextGenerate => "text_generate",
            Capability::EmbedImage => "embed_image",
            Capability::EmbedText => "embed_text",
            Capability::Detect => "detect",
            Capability::SegmentTrack => "segment_track",
            Capability::Keypoints => "keypoints",
            Capability::Depth => "depth",
            Capability::Flow => "flow",
            Capability::FetchVideo => "fetch_video",
        }
    }

    pub fn route(&self) -> String {
        format!("/v1/{}", self.as_str())
    }
}

impl fmt::Display for Capability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Capability {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Capability::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown capability '{s}'"))
    }
}

/// Square crop window, in source-frame pixels, that produced a crop image.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CropHint {
    pub cx: f64,
    pub cy: f64,
    pub side: f64,
    /// Output resolution of the crop.
    pub size: usize,
}

/// Provenance of an image: which source frame, and which crop of it.
/// Adapters backed by real models ignore it; synthetic backends use it to
/// answer from ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceHint {
    pub video_id: String,
    pub frame: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub crop: Option<CropHint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Image {
    #[serde(rename = "png", with = "wire::rgb")]
    pub pixels: Arc<RgbImage>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<SourceHint>,
}

impl Image {
    pub fn new(pixels: impl Into<Arc<RgbImage>>) -> Self {
        Self {
            pixels: pixels.into(),
            source: None,
        }
    }

    pub fn with_source(mut self, source: SourceHint) -> Self {
        self.source = Some(source);
        self
    }

    pub fn dims(&self) -> (usize, usize) {
        self.pixels.dims()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextGenerateRequest {
    pub prompt: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<Image>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextGenerateResponse {
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedImageRequest {
    pub images: Vec<Image>,
    /// Also return a patch-level feature grid per image.
    #[serde(default)]
    pub dense: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedImageResponse {
    pub embeddings: Vec<Vec<f32>>,
    #[serde(default, with = "wire::grids")]
    pub grids: Vec<Grid<f32>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedTextRequest {
    pub texts: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedTextResponse {
    pub embeddings: Vec<Vec<f32>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectRequest {
    pub image: Image,
    pub prompt: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub bbox: BBoxF64,
    pub confidence: f64,
    #[serde(default)]
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectResponse {
    pub detections: Vec<Detection>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxPrompt {
    pub instance_id: u32,
    /// Index into the request's frame list.
    pub frame: usize,
    pub bbox: BBoxF64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentTrackRequest {
    pub frames: Vec<Image>,
    pub prompts: Vec<BoxPrompt>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceMasks {
    pub instance_id: u32,
    /// One entry per request frame; `None` where the instance is lost.
    #[serde(with = "wire::opt_masks")]
    pub masks: Vec<Option<Mask>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentTrackResponse {
    pub instances: Vec<InstanceMasks>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeypointsRequest {
    pub images: Vec<Image>,
    pub skeleton: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeypointsResponse {
    pub keypoints: Vec<KeypointsF64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthRequest {
    pub images: Vec<Image>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowRequest {
    /// Consecutive pairs; flow is from the first image to the second.
    pub pairs: Vec<[Image; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResponse {
    #[serde(with = "wire::grids")]
    pub grids: Vec<Grid<f32>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum FetchVideoRequest {
    Search { query: String, limit: usize },
    Download { video_id: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoHit {
    pub video_id: String,
    pub title: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoPayload {
    pub video_id: String,
    pub title: String,
    pub fps: f64,
    pub frames: Vec<Image>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum FetchVideoResponse {
    Search { results: Vec<VideoHit> },
    Download { video: VideoPayload },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Request {
    TextGenerate(TextGenerateRequest),
    EmbedImage(EmbedImageRequest),
    EmbedText(EmbedTextRequest),
    Detect(DetectRequest),
    SegmentTrack(SegmentTrackRequest),
    Keypoints(KeypointsRequest),
    Depth(DepthRequest),
    Flow(FlowRequest),
    FetchVideo(FetchVideoRequest),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Response {
    TextGenerate(TextGenerateResponse),
    EmbedImage(EmbedImageResponse),
    EmbedText(EmbedTextResponse),
    Detect(DetectResponse),
    SegmentTrack(SegmentTrackResponse),
    Keypoints(KeypointsResponse),
    Depth(GridResponse),
    Flow(GridResponse),
    FetchVideo(FetchVideoResponse),
}

macro_rules! dispatch {
    ($ty:ident, $($variant:ident),+) => {
        impl $ty {
            pub fn capability(&self) -> Capability {
                match self {
                    $($ty::$variant(_) => Capability::$variant),+
                }
            }

            pub fn to_json(&self) -> serde_json::Result<Vec<u8>> {
                match self {
                    $($ty::$variant(body) => serde_json::to_vec(body)),+
                }
            }

            pub fn from_json(capability: Capability, bytes: &[u8]) -> serde_json::Result<Self> {
                Ok(match capability {
                    $(Capability::$variant => $ty::$variant(serde_json::from_slice(bytes)?)),+
                })
            }
        }
    };
}

dispatch!(Request, TextGenerate, EmbedImage, EmbedText, Detect, SegmentTrack, Keypoints, Depth, Flow, FetchVideo);
dispatch!(Response, TextGenerate, EmbedImage, EmbedText, Detect, SegmentTrack, Keypoints, Depth, Flow, FetchVideo);

/// Error body returned by a server for non-2xx statuses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub retriable: bool,
}

/// Resolution of dense feature grids for an image of the given size.
pub fn feature_grid_dims(width: usize, height: usize) -> (usize, usize) {
    ((width / 14).max(1), (height / 14).max(1))
}

pub(crate) mod wire {
    use base64::engine::general_purpose::STANDARD;
    use base64::Engine;
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serializer};

    fn unbase64<E: serde::de::Error>(s: &str) -> Result<Vec<u8>, E> {
        STANDARD.decode(s).map_err(E::custom)
    }

    pub mod rgb {
        use super::*;
        use mf_core::RgbImage;
        use std::sync::Arc;

        pub fn serialize<S: Serializer>(img: &Arc<RgbImage>, s: S) -> Result<S::Ok, S::Error> {
            s.serialize_str(&STANDARD.encode(crate::png::encode_rgb(img)))
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Arc<RgbImage>, D::Error> {
            let s = String::deserialize(d)?;
            let bytes = unbase64(&s)?;
            crate::png::decode_rgb(&bytes).map(Arc::new).map_err(D::Error::custom)
        }
    }

    pub mod opt_masks {
        use super::*;
        use mf_core::Mask;
        use serde::ser::SerializeSeq;

        pub fn serialize<S: Serializer>(masks: &[Option<Mask>], s: S) -> Result<S::Ok, S::Error> {
            let mut seq = s.serialize_seq(Some(masks.len()))?;
            for m in masks {
                seq.serialize_element(&m.as_ref().map(|m| STANDARD.encode(crate::png::encode_mask(m))))?;
            }
            seq.end()
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Option<Mask>>, D::Error> {
            Vec::<Option<String>>::deserialize(d)?
                .into_iter()
                .map(|m| {
                    m.map(|s| crate::png::decode_mask(&unbase64::<D::Error>(&s)?).map_err(D::Error::custom))
                        .transpose()
                })
                .collect()
        }
    }

    pub mod grids {
        use super::*;
        use mf_core::Grid;
        use serde::ser::SerializeSeq;

        pub fn serialize<S: Serializer>(grids: &[Grid<f32>], s: S) -> Result<S::Ok, S::Error> {
            let mut seq = s.serialize_seq(Some(grids.len()))?;
            for g in grids {
                seq.serialize_element(&STANDARD.encode(g.encode()))?;
            }
            seq.end()
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Grid<f32>>, D::Error> {
            Vec::<String>::deserialize(d)?
                .iter()
                .map(|s| Grid::decode(&unbase64::<D::Error>(s)?).map_err(D::Error::custom))
                .collect()
        }
    }
}
