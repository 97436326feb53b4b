use serde::{Deserialize, Serialize};

/// A scripted video: background schedule, moving actors, static occluders
/// and the tracker failures to simulate. Frame indices are source frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    /// Also the video id.
    pub name: String,
    #[serde(default)]
    pub title: String,
    pub category: String,
    pub width: usize,
    pub height: usize,
    pub fps: f64,
    pub frames: usize,
    #[serde(default)]
    pub seed: u64,
    pub background: Vec<BackgroundSegment>,
    /// Amplitude of per-pixel uniform sensor noise, per channel.
    #[serde(default)]
    pub grain: u8,
    #[serde(default)]
    pub actors: Vec<ActorSpec>,
    #[serde(default)]
    pub occluders: Vec<Occluder>,
    #[serde(default)]
    pub events: Events,
    /// Cosine between this scene's frames and the category caption.
    #[serde(default = "default_semantic")]
    pub semantic_score: f64,
    /// What the text backend answers to the final image check.
    #[serde(default = "default_answer")]
    pub image_check: String,
    /// Tracks the pipeline should emit for this scene.
    #[serde(default)]
    pub expected: Vec<ExpectedTrack>,
}

fn default_semantic() -> f64 {
    0.4
}

fn default_answer() -> String {
    "yes".into()
}

/// Background colour from `start` until the next segment. With `fade_to`
/// the colour ramps linearly and reaches `fade_to` on the next segment's
/// first frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackgroundSegment {
    pub start: usize,
    pub color: [u8; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fade_to: Option<[u8; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    Ellipse {
        rx: f64,
        ry: f64,
    },
    /// Capsule body facing +x with head, neck and four straight legs.
    Quadruped {
        body_length: f64,
        body_height: f64,
        leg_length: f64,
        leg_width: f64,
        /// Frames per stride; 0 keeps the legs still.
        #[serde(default)]
        gait_period: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Keyframe {
    pub frame: usize,
    pub x: f64,
    pub y: f64,
    #[serde(default = "one")]
    pub scale: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActorSpec {
    pub id: u32,
    pub shape: Shape,
    pub color: [u8; 3],
    /// Larger is nearer to the camera.
    pub depth: f64,
    /// Piecewise-linear trajectory; held constant outside the keyframes.
    pub keyframes: Vec<Keyframe>,
    /// Half-open frame range in which the actor exists.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub visible: Option<[usize; 2]>,
}

/// Static axis-aligned rectangle `[x_min, y_min, x_max, y_max]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Occluder {
    pub rect: [f64; 4],
    pub depth: f64,
    pub color: [u8; 3],
}

/// Scripted tracker failures, applied by the synthetic segmenter.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Events {
    #[serde(default)]
    pub id_swaps: Vec<IdSwap>,
    #[serde(default)]
    pub track_drops: Vec<TrackDrop>,
}

/// From `frame` on, propagating `from` yields the masks of `to`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdSwap {
    pub frame: usize,
    pub from: u32,
    pub to: u32,
}

/// Mask propagation loses `actor` on frames `[start, end)`. A box prompt on
/// the frame itself still finds it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackDrop {
    pub actor: u32,
    pub start: usize,
    pub end: usize,
}

/// One track the pipeline should produce: `actor` over source frames
/// `[start, end)` within shot `clip` (0-based, in cut order).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ExpectedTrack {
    pub clip: usize,
    pub actor: u32,
    pub start: usize,
    pub end: usize,
}

impl SceneSpec {
    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scene specs always serialize")
    }

    pub fn actor(&self, id: u32) -> Option<&ActorSpec> {
        self.actors.iter().find(|a| a.id == id)
    }
}
