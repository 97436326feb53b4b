use std::collections::BTreeMap;
use std::sync::Arc;

use mf_backend::*;
use mf_core::{Grid, Keypoint, KeypointsF64, Mask};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::scene::{Scene, Surface, View};
use crate::spec::SceneSpec;
use crate::{mix64, mix_str};

/// Random perturbations on top of each scene's scripted events.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NoiseConfig {
    /// Standard deviation, in pixels, added to each detection box edge.
    pub box_jitter: f64,
    /// Probability that a detector misses an actor on a frame.
    pub detect_dropout: f64,
    pub seed: u64,
}

/// Length of global image and text embeddings.
pub const EMBED_DIM: usize = 16;
/// Channels of dense feature grids.
pub const FEATURE_CHANNELS: usize = 4;

/// Every capability answered from scene ground truth. Images must carry
/// source hints naming a registered scene.
#[derive(Debug, Clone)]
pub struct SyntheticBackend {
    scenes: BTreeMap<String, Arc<Scene>>,
    categories: Vec<String>,
    noise: NoiseConfig,
}

fn bad(cap: Capability, msg: impl Into<String>) -> BackendError {
    BackendError::bad_request(cap, msg)
}

impl SyntheticBackend {
    pub fn new(specs: impl IntoIterator<Item = SceneSpec>) -> Self {
        let scenes: BTreeMap<_, _> = specs
            .into_iter()
            .map(|s| (s.name.clone(), Arc::new(Scene::new(s))))
            .collect();
        let mut categories: Vec<String> = scenes.values().map(|s| s.spec.category.to_lowercase()).collect();
        categories.sort();
        categories.dedup();
        Self {
            scenes,
            categories,
            noise: NoiseConfig::default(),
        }
    }

    pub fn with_noise(mut self, noise: NoiseConfig) -> Self {
        self.noise = noise;
        self
    }

    pub fn scene(&self, name: &str) -> Option<&Arc<Scene>> {
        self.scenes.get(name)
    }

    pub fn scenes(&self) -> impl Iterator<Item = &Arc<Scene>> {
        self.scenes.values()
    }

    fn locate(&self, cap: Capability, image: &Image) -> Result<(&Scene, usize, View)> {
        let hint = image
            .source
            .as_ref()
            .ok_or_else(|| bad(cap, "synthetic backends need a source hint on every image"))?;
        let scene = self
            .scenes
            .get(&hint.video_id)
            .ok_or_else(|| bad(cap, format!("unknown scene '{}'", hint.video_id)))?;
        let view = match hint.crop {
            Some(c) => View::Crop(c),
            None => View::Full,
        };
        if view.dims(&scene.spec) != image.dims() {
            return Err(bad(cap, format!("image size {:?} does not match its source hint", image.dims())));
        }
        Ok((scene, hint.frame, view))
    }

    fn category_axis(&self, category: &str) -> usize {
        let c = category.trim().to_lowercase();
        match self.categories.iter().position(|k| *k == c) {
            Some(i) if i < EMBED_DIM - 1 => i,
            _ => (mix_str(&c) % (EMBED_DIM as u64 - 1)) as usize,
        }
    }

    fn detect(&self, r: DetectRequest) -> Result<DetectResponse> {
        let cap = Capability::Detect;
        let (scene, frame, view) = self.locate(cap, &r.image)?;
        let prompt = r.prompt.to_lowercase();
        let category = scene.spec.category.to_lowercase();
        if !prompt.is_empty() && !prompt.contains(&category) {
            return Ok(DetectResponse { detections: vec![] });
        }
        let mut detections = Vec::new();
        for (i, actor) in scene.spec.actors.iter().enumerate() {
            let Some(bbox) = scene.mask(i, frame, &view).bbox::<f64>() else {
                continue;
            };
            let key = mix64(scene.spec.seed ^ self.noise.seed ^ mix64(frame as u64) ^ mix64(actor.id as u64 + 77));
            let mut rng = ChaCha8Rng::seed_from_u64(key);
            if self.noise.detect_dropout > 0.0 && rng.random::<f64>() < self.noise.detect_dropout {
                continue;
            }
            let bbox = if self.noise.box_jitter > 0.0 {
                let n = Normal::new(0.0, self.noise.box_jitter).expect("finite jitter");
                let e: [f64; 4] = std::array::from_fn(|_| n.sample(&mut rng));
                let (x0, x1) = (bbox.x_min + e[0], bbox.x_max + e[2]);
                let (y0, y1) = (bbox.y_min + e[1], bbox.y_max + e[3]);
                mf_core::BBoxF64::new(x0.min(x1), y0.min(y1), x0.max(x1), y0.max(y1)).expect("ordered box")
            } else {
                bbox
            };
            detections.push(Detection {
                bbox,
                confidence: 0.9,
                label: scene.spec.category.clone(),
            });
        }
        Ok(DetectResponse { detections })
    }

    fn segment_track(&self, r: SegmentTrackRequest) -> Result<SegmentTrackResponse> {
        let cap = Capability::SegmentTrack;
        let located: Vec<_> = r.frames.iter().map(|f| self.locate(cap, f)).collect::<Result<_>>()?;
        let mut instances = Vec::new();
        for p in &r.prompts {
            let (scene, pframe, pview) = located
                .get(p.frame)
                .ok_or_else(|| bad(cap, format!("prompt on missing frame {}", p.frame)))?;
            let target = (0..scene.spec.actors.len())
                .filter_map(|i| Some((i, scene.mask(i, *pframe, pview).bbox::<f64>()?.iou(&p.bbox))))
                .filter(|&(_, iou)| iou >= 0.1)
                .max_by(|a, b| a.1.total_cmp(&b.1))
                .map(|(i, _)| i);
            let masks = located
                .iter()
                .enumerate()
                .map(|(k, (s, f, view))| {
                    let actor = target?;
                    if s.name() != scene.name() {
                        return None;
                    }
                    let id = scene.spec.actors[actor].id;
                    let ev = &scene.spec.events;
                    let id = ev
                        .id_swaps
                        .iter()
                        .find(|sw| sw.from == id && *pframe < sw.frame && sw.frame <= *f)
                        .map_or(id, |sw| sw.to);
                    let lost = k != p.frame
                        && ev.track_drops.iter().any(|d| d.actor == id && d.start <= *f && *f < d.end);
                    if lost {
                        return None;
                    }
                    let m: Mask = scene.mask(scene.actor_index(id)?, *f, view);
                    (!m.is_empty()).then_some(m)
                })
                .collect();
            instances.push(InstanceMasks {
                instance_id: p.instance_id,
                masks,
            });
        }
        Ok(SegmentTrackResponse { instances })
    }

    fn keypoints(&self, r: KeypointsRequest) -> Result<KeypointsResponse> {
        let cap = Capability::Keypoints;
        let keypoints = r
            .images
            .iter()
            .map(|img| {
                let (scene, frame, view) = self.locate(cap, img)?;
                Ok(scene
                    .actor_at_view_center(frame, &view)
                    .and_then(|i| scene.keypoints(i, frame, &view))
                    .unwrap_or_else(|| KeypointsF64::new(vec![Keypoint::new(0.0, 0.0, 0.0); 17])))
            })
            .collect::<Result<_>>()?;
        Ok(KeypointsResponse { keypoints })
    }

    fn global_embedding(&self, img: &Image) -> Vec<f32> {
        let mut v = vec![0.0f32; EMBED_DIM];
        match self.locate(Capability::EmbedImage, img) {
            Ok((scene, _, _)) => {
                let s = scene.spec.semantic_score.clamp(-1.0, 1.0);
                v[self.category_axis(&scene.spec.category)] = s as f32;
                v[EMBED_DIM - 1] = (1.0 - s * s).sqrt() as f32;
            }
            Err(_) => v[EMBED_DIM - 1] = 1.0,
        }
        v
    }

    fn dense_grid(&self, img: &Image) -> Grid<f32> {
        let (w, h) = img.dims();
        let (gw, gh) = feature_grid_dims(w, h);
        let located = self.locate(Capability::EmbedImage, img).ok();
        Grid::from_fn(gw, gh, FEATURE_CHANNELS, |gx, gy, c| {
            let Some((scene, frame, view)) = &located else {
                return 0.0;
            };
            let (x, y) = view.to_frame((gx * 14 + 7) as f64, (gy * 14 + 7) as f64);
            let (surface, depth) = scene.surface(*frame, x, y);
            match c {
                0 => depth as f32,
                1 => matches!(surface, Surface::Actor(_)) as u8 as f32,
                2 => (x / scene.spec.width as f64) as f32,
                _ => (y / scene.spec.height as f64) as f32,
            }
        })
    }

    fn text_embedding(&self, text: &str) -> Vec<f32> {
        let t = text.trim();
        let category = t
            .strip_prefix("A photo of ")
            .or_else(|| t.strip_prefix("a photo of "))
            .map(|c| c.trim_end_matches('.'))
            .map(|c| c.strip_prefix("a ").or_else(|| c.strip_prefix("an ")).unwrap_or(c))
            .unwrap_or(t);
        let mut v = vec![0.0f32; EMBED_DIM];
        v[self.category_axis(category)] = 1.0;
        v
    }

    fn text(&self, r: TextGenerateRequest) -> Result<TextGenerateResponse> {
        let p = r.prompt.as_str();
        let list = |n: usize, f: &dyn Fn(usize) -> String| {
            let items: Vec<String> = (1..=n).map(|i| format!("'{}'", f(i))).collect();
            format!("[{}]", items.join(", "))
        };
        let count = || {
            p.split_whitespace()
                .nth(1)
                .and_then(|w| w.parse::<usize>().ok())
                .unwrap_or(10)
        };
        let text = if p.starts_with("List ") && p.contains(" types of ") {
            let category = p.split(" types of ").nth(1).unwrap_or("").split('.').next().unwrap_or("");
            list(count(), &|i| format!("{category} breed {i}"))
        } else if p.starts_with("List ") && p.contains("search phrases") {
            list(count(), &|i| format!("clip {i}"))
        } else if p.contains("yes or no") {
            match r.image.as_ref().map(|i| self.locate(Capability::TextGenerate, i)) {
                Some(Ok((scene, _, _))) => scene.spec.image_check.clone(),
                _ => "yes".into(),
            }
        } else {
            return Err(bad(Capability::TextGenerate, "prompt not understood by the synthetic text model"));
        };
        Ok(TextGenerateResponse { text })
    }

    fn fetch(&self, r: FetchVideoRequest) -> Result<FetchVideoResponse> {
        match r {
            FetchVideoRequest::Search { query, limit } => {
                let q = query.to_lowercase();
                let results = self
                    .scenes
                    .values()
                    .filter(|s| q.contains(&s.spec.category.to_lowercase()))
                    .take(limit)
                    .map(|s| VideoHit {
                        video_id: s.spec.name.clone(),
                        title: s.spec.title.clone(),
                    })
                    .collect();
                Ok(FetchVideoResponse::Search { results })
            }
            FetchVideoRequest::Download { video_id } => {
                let scene = self.scenes.get(&video_id).ok_or_else(|| BackendError::Remote {
                    capability: Capability::FetchVideo,
                    status: 404,
                    message: format!("no video '{video_id}'"),
                    retriable: false,
                })?;
                let frames = (0..scene.spec.frames)
                    .map(|f| Image::new(scene.render(f, &View::Full)))
                    .collect();
                Ok(FetchVideoResponse::Download {
                    video: VideoPayload {
                        video_id,
                        title: scene.spec.title.clone(),
                        fps: scene.spec.fps,
                        frames,
                    },
                })
            }
        }
    }
}

impl Backend for SyntheticBackend {
    fn call(&self, request: Request) -> Result<Response> {
        Ok(match request {
            Request::TextGenerate(r) => Response::TextGenerate(self.text(r)?),
            Request::EmbedImage(r) => Response::EmbedImage(EmbedImageResponse {
                embeddings: r.images.iter().map(|i| self.global_embedding(i)).collect(),
                grids: if r.dense {
                    r.images.iter().map(|i| self.dense_grid(i)).collect()
                } else {
                    vec![]
                },
            }),
            Request::EmbedText(r) => Response::EmbedText(EmbedTextResponse {
                embeddings: r.texts.iter().map(|t| self.text_embedding(t)).collect(),
            }),
            Request::Detect(r) => Response::Detect(self.detect(r)?),
            Request::SegmentTrack(r) => Response::SegmentTrack(self.segment_track(r)?),
            Request::Keypoints(r) => Response::Keypoints(self.keypoints(r)?),
            Request::Depth(r) => Response::Depth(GridResponse {
                grids: r
                    .images
                    .iter()
                    .map(|i| {
                        let (scene, frame, view) = self.locate(Capability::Depth, i)?;
                        Ok(scene.depth(frame, &view))
                    })
                    .collect::<Result<_>>()?,
            }),
            Request::Flow(r) => Response::Flow(GridResponse {
                grids: r
                    .pairs
                    .iter()
                    .map(|[a, b]| {
                        let (scene, f0, v0) = self.locate(Capability::Flow, a)?;
                        let (other, f1, v1) = self.locate(Capability::Flow, b)?;
                        if other.name() != scene.name() {
                            return Err(bad(Capability::Flow, "flow pair spans two videos"));
                        }
                        Ok(scene.flow(f0, &v0, f1, &v1))
                    })
                    .collect::<Result<_>>()?,
            }),
            Request::FetchVideo(r) => Response::FetchVideo(self.fetch(r)?),
        })
    }
}
