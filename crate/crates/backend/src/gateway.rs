use std::collections::HashMap;
use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use mf_core::{DepthGrid, FeatureGrid, FlowGrid, KeypointsF64, Mask, Skeleton};

use crate::error::{BackendError, Result};
use crate::protocol::*;

/// Something that can answer capability requests: an HTTP adapter, or an
/// in-process implementation.
pub trait Backend: Send + Sync {
    fn call(&self, request: Request) -> Result<Response>;
}

impl<B: Backend + ?Sized> Backend for Arc<B> {
    fn call(&self, request: Request) -> Result<Response> {
        (**self).call(request)
    }
}

#[derive(Debug, Clone)]
pub struct GatewayConfig {
    /// Total attempts per call, including the first.
    pub attempts: u32,
    /// Delay before the second attempt; doubles each time.
    pub backoff: Duration,
    /// Concurrent in-flight calls allowed per capability.
    pub max_inflight: usize,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        Self {
            attempts: 3,
            backoff: Duration::from_millis(200),
            max_inflight: 8,
        }
    }
}

struct Limiter {
    limit: usize,
    used: Mutex<usize>,
    freed: Condvar,
}

struct Permit<'a>(&'a Limiter);

impl Limiter {
    fn new(limit: usize) -> Self {
        Self {
            limit: limit.max(1),
            used: Mutex::new(0),
            freed: Condvar::new(),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut used = self.used.lock().unwrap_or_else(|p| p.into_inner());
        while *used >= self.limit {
            used = self.freed.wait(used).unwrap_or_else(|p| p.into_inner());
        }
        *used += 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.used.lock().unwrap_or_else(|p| p.into_inner()) -= 1;
        self.0.freed.notify_one();
    }
}

/// Routes typed capability calls to configured backends, with retries,
/// per-capability concurrency limits and response validation.
///
/// Every typed method checks the response against the request (counts,
/// dimensions, value ranges) so malformed output never reaches the pipeline.
pub struct Gateway {
    routes: HashMap<Capability, Arc<dyn Backend>>,
    limits: HashMap<Capability, Limiter>,
    config: GatewayConfig,
}

impl std::fmt::Debug for Gateway {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mut caps: Vec<_> = self.routes.keys().collect();
        caps.sort();
        f.debug_struct("Gateway").field("capabilities", &caps).finish()
    }
}

impl Gateway {
    pub fn new(config: GatewayConfig) -> Self {
        let limits = Capability::ALL
            .into_iter()
            .map(|c| (c, Limiter::new(config.max_inflight)))
            .collect();
        Self {
            routes: HashMap::new(),
            limits,
            config,
        }
    }

    /// Serves `capability` with `backend`, replacing any previous route.
    pub fn route(mut self, capability: Capability, backend: Arc<dyn Backend>) -> Self {
        self.routes.insert(capability, backend);
        self
    }

    /// Serves every capability with `backend`.
    pub fn route_all(mut self, backend: Arc<dyn Backend>) -> Self {
        for c in Capability::ALL {
            self.routes.insert(c, backend.clone());
        }
        self
    }

    pub fn has(&self, capability: Capability) -> bool {
        self.routes.contains_key(&capability)
    }

    /// Sends a request with retries, without validation.
    pub fn call(&self, request: Request) -> Result<Response> {
        let capability = request.capability();
        let backend = self
            .routes
            .get(&capability)
            .ok_or(BackendError::Unconfigured(capability))?;
        let _permit = self.limits[&capability].acquire();
        let mut delay = self.config.backoff;
        let mut attempt = 1;
        loop {
            match backend.call(request.clone()) {
                Ok(resp) if resp.capability() == capability => return Ok(resp),
                Ok(resp) => {
                    return Err(BackendError::shape(
                        capability,
                        format!("answered as {}", resp.capability()),
                    ))
                }
                Err(e) if e.is_retriable() && attempt < self.config.attempts => {
                    log::warn!("attempt {attempt} failed, retrying in {delay:?}: {e}");
                    std::thread::sleep(delay);
                    delay *= 2;
                    attempt += 1;
                }
                Err(e) => return Err(e),
            }
        }
    }

    pub fn text_generate(&self, prompt: &str, image: Option<Image>) -> Result<String> {
        let req = TextGenerateRequest {
            prompt: prompt.to_string(),
            image,
        };
        match self.call(Request::TextGenerate(req))? {
            Response::TextGenerate(r) => Ok(r.text),
            _ => unreachable!(),
        }
    }

    pub fn embed_images(&self, images: Vec<Image>, dense: bool) -> Result<EmbedImageResponse> {
        let cap = Capability::EmbedImage;
        let dims: Vec<_> = images.iter().map(Image::dims).collect();
        let Response::EmbedImage(r) = self.call(Request::EmbedImage(EmbedImageRequest { images, dense }))? else {
            unreachable!()
        };
        expect_count(cap, "embeddings", r.embeddings.len(), dims.len())?;
        check_vectors(cap, &r.embeddings)?;
        if dense {
            expect_count(cap, "grids", r.grids.len(), dims.len())?;
            let channels = r.grids.first().map(|g| g.channels());
            for (g, &(w, h)) in r.grids.iter().zip(&dims) {
                expect_dims(cap, g.dims(), feature_grid_dims(w, h))?;
                if Some(g.channels()) != channels || g.channels() == 0 {
                    return Err(BackendError::shape(cap, "feature grids disagree on channel count"));
                }
                check_finite(cap, g.values())?;
            }
        } else if !r.grids.is_empty() {
            return Err(BackendError::shape(cap, "grids returned for a non-dense request"));
        }
        Ok(r)
    }

    pub fn embed_texts(&self, texts: Vec<String>) -> Result<Vec<Vec<f32>>> {
        let cap = Capability::EmbedText;
        let n = texts.len();
        let Response::EmbedText(r) = self.call(Request::EmbedText(EmbedTextRequest { texts }))? else {
            unreachable!()
        };
        expect_count(cap, "embeddings", r.embeddings.len(), n)?;
        check_vectors(cap, &r.embeddings)?;
        Ok(r.embeddings)
    }

    pub fn detect(&self, image: Image, prompt: &str) -> Result<Vec<Detection>> {
        let cap = Capability::Detect;
        let req = DetectRequest {
            image,
            prompt: prompt.to_string(),
        };
        let Response::Detect(r) = self.call(Request::Detect(req))? else {
            unreachable!()
        };
        for d in &r.detections {
            let b = &d.bbox;
            let finite = [b.x_min, b.y_min, b.x_max, b.y_max].iter().all(|v| v.is_finite());
            if !finite || b.x_min > b.x_max || b.y_min > b.y_max {
                return Err(BackendError::shape(cap, format!("invalid box {b:?}")));
            }
            if !(0.0..=1.0).contains(&d.confidence) {
                return Err(BackendError::shape(cap, format!("confidence {} outside [0, 1]", d.confidence)));
            }
        }
        Ok(r.detections)
    }

    /// Returns one entry per prompted instance id, in ascending id order.
    pub fn segment_track(&self, frames: Vec<Image>, prompts: Vec<BoxPrompt>) -> Result<Vec<InstanceMasks>> {
        let cap = Capability::SegmentTrack;
        let dims: Vec<_> = frames.iter().map(Image::dims).collect();
        if let Some(p) = prompts.iter().find(|p| p.frame >= dims.len()) {
            return Err(BackendError::bad_request(cap, format!("prompt on frame {} of {}", p.frame, dims.len())));
        }
        let mut ids: Vec<u32> = prompts.iter().map(|p| p.instance_id).collect();
        ids.sort_unstable();
        ids.dedup();
        let Response::SegmentTrack(mut r) = self.call(Request::SegmentTrack(SegmentTrackRequest { frames, prompts }))?
        else {
            unreachable!()
        };
        r.instances.sort_by_key(|i| i.instance_id);
        let got: Vec<u32> = r.instances.iter().map(|i| i.instance_id).collect();
        if got != ids {
            return Err(BackendError::shape(cap, format!("instances {got:?}, prompted {ids:?}")));
        }
        for inst in &r.instances {
            expect_count(cap, "masks", inst.masks.len(), dims.len())?;
            for (m, &d) in inst.masks.iter().zip(&dims) {
                if let Some(m) = m {
                    expect_dims(cap, m.dims(), d)?;
                }
            }
        }
        Ok(r.instances)
    }

    pub fn keypoints(&self, images: Vec<Image>, skeleton: &Skeleton) -> Result<Vec<KeypointsF64>> {
        let cap = Capability::Keypoints;
        let n = images.len();
        let req = KeypointsRequest {
            images,
            skeleton: skeleton.name.clone(),
        };
        let Response::Keypoints(r) = self.call(Request::Keypoints(req))? else {
            unreachable!()
        };
        expect_count(cap, "keypoint sets", r.keypoints.len(), n)?;
        for k in &r.keypoints {
            expect_count(cap, "joints", k.len(), skeleton.len())?;
            if !k.points.iter().all(|p| p.x.is_finite() && p.y.is_finite()) {
                return Err(BackendError::shape(cap, "non-finite joint position"));
            }
        }
        Ok(r.keypoints)
    }

    pub fn depth(&self, images: Vec<Image>) -> Result<Vec<DepthGrid>> {
        let cap = Capability::Depth;
        let dims: Vec<_> = images.iter().map(Image::dims).collect();
        let Response::Depth(r) = self.call(Request::Depth(DepthRequest { images }))? else {
            unreachable!()
        };
        check_grids(cap, &r.grids, &dims, 1)?;
        Ok(r.grids)
    }

    pub fn flow(&self, pairs: Vec<[Image; 2]>) -> Result<Vec<FlowGrid>> {
        let cap = Capability::Flow;
        let dims: Vec<_> = pairs.iter().map(|[a, _]| a.dims()).collect();
        if let Some([a, b]) = pairs.iter().find(|[a, b]| a.dims() != b.dims()) {
            return Err(BackendError::bad_request(cap, format!("pair dims {:?} vs {:?}", a.dims(), b.dims())));
        }
        let Response::Flow(r) = self.call(Request::Flow(FlowRequest { pairs }))? else {
            unreachable!()
        };
        check_grids(cap, &r.grids, &dims, 2)?;
        Ok(r.grids)
    }

    pub fn search_videos(&self, query: &str, limit: usize) -> Result<Vec<VideoHit>> {
        let req = FetchVideoRequest::Search {
            query: query.to_string(),
            limit,
        };
        match self.call(Request::FetchVideo(req))? {
            Response::FetchVideo(FetchVideoResponse::Search { mut results }) => {
                results.truncate(limit);
                Ok(results)
            }
            _ => Err(BackendError::shape(Capability::FetchVideo, "expected search results")),
        }
    }

    pub fn download_video(&self, video_id: &str) -> Result<VideoPayload> {
        let cap = Capability::FetchVideo;
        let req = FetchVideoRequest::Download {
            video_id: video_id.to_string(),
        };
        match self.call(Request::FetchVideo(req))? {
            Response::FetchVideo(FetchVideoResponse::Download { video }) => {
                if !(video.fps.is_finite() && video.fps > 0.0) {
                    return Err(BackendError::shape(cap, format!("fps {}", video.fps)));
                }
                if let Some(first) = video.frames.first() {
                    if video.frames.iter().any(|f| f.dims() != first.dims()) {
                        return Err(BackendError::shape(cap, "frames differ in size"));
                    }
                }
                Ok(video)
            }
            _ => Err(BackendError::shape(cap, "expected a video payload")),
        }
    }

    /// Masks for a single frame from box prompts, keyed like the prompts.
    pub fn segment_frame(&self, frame: Image, prompts: &[(u32, mf_core::BBoxF64)]) -> Result<Vec<(u32, Option<Mask>)>> {
        let prompts = prompts
            .iter()
            .map(|&(instance_id, bbox)| BoxPrompt {
                instance_id,
                frame: 0,
                bbox,
            })
            .collect();
        Ok(self
            .segment_track(vec![frame], prompts)?
            .into_iter()
            .map(|mut i| (i.instance_id, i.masks.pop().flatten()))
            .collect())
    }
}

fn expect_count(cap: Capability, what: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(BackendError::shape(cap, format!("{got} {what}, expected {want}")));
    }
    Ok(())
}

fn expect_dims(cap: Capability, got: (usize, usize), want: (usize, usize)) -> Result<()> {
    if got != want {
        return Err(BackendError::shape(cap, format!("size {got:?}, expected {want:?}")));
    }
    Ok(())
}

fn check_finite(cap: Capability, values: &[f32]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(BackendError::shape(cap, "non-finite values"))
    }
}

fn check_vectors(cap: Capability, vs: &[Vec<f32>]) -> Result<()> {
    let len = vs.first().map_or(0, Vec::len);
    if vs.iter().any(|v| v.len() != len || v.is_empty()) {
        return Err(BackendError::shape(cap, "embeddings differ in length or are empty"));
    }
    vs.iter().try_for_each(|v| check_finite(cap, v))
}

fn check_grids(cap: Capability, grids: &[FeatureGrid], dims: &[(usize, usize)], channels: usize) -> Result<()> {
    expect_count(cap, "grids", grids.len(), dims.len())?;
    for (g, &d) in grids.iter().zip(dims) {
        expect_dims(cap, g.dims(), d)?;
        if g.channels() != channels {
            return Err(BackendError::shape(cap, format!("{} channels, expected {channels}", g.channels())));
        }
        check_finite(cap, g.values())?;
    }
    Ok(())
}
