//! Pipeline configuration: one TOML key tree with a default for every
//! threshold, overridable from the environment.
//!
//! An environment variable `MF_<SECTION>__<KEY>` (for example
//! `MF_TRACK__MIN_LEN=40`) replaces `section.key`. Values are parsed as TOML
//! scalars, falling back to a plain string.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{PipelineError, Result};

pub const ENV_PREFIX: &str = "MF_";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    /// Root directory for videos, clips and tracks.
    pub data_dir: String,
    /// Store file; relative paths resolve against the working directory.
    pub store: String,
    pub collect: CollectConfig,
    pub shot: ShotConfig,
    pub semantic: SemanticConfig,
    pub track: TrackConfig,
    pub crop: CropConfig,
    pub feature: FeatureConfig,
    pub worker: WorkerConfig,
    pub backend: BackendConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CollectConfig {
    pub n_breeds: usize,
    pub n_contexts: usize,
    /// Search hits requested per query.
    pub per_query: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShotConfig {
    pub threshold: f64,
    pub min_len: usize,
    pub target_fps: f64,
    pub still_eps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SemanticConfig {
    pub threshold: f64,
    pub n_samples: usize,
    /// Rescaling applied to the clamped cosine similarity.
    pub weight: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackConfig {
    pub interval: usize,
    /// `{category}` is replaced with the clip's category.
    pub prompt_template: String,
    pub association_floor: f64,
    pub overlap_iou: f64,
    pub margin_frac: f64,
    pub inconsistency_iou: f64,
    pub min_len: usize,
    pub max_len: usize,
    pub max_gap: usize,
    pub image_check: bool,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CropConfig {
    pub size: usize,
    pub area_ratio: f64,
    pub smooth_window: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    pub occlusion_radius: usize,
    pub occlusion_tau: f64,
    /// Frames per backend request.
    pub batch: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorkerConfig {
    pub lease_secs: f64,
    /// Sleep between polls when a stage is momentarily empty.
    pub poll_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendConfig {
    /// Base URL of an adapter service, or `synthetic`.
    pub endpoint: String,
    /// Per-capability overrides of `endpoint`, keyed by capability name.
    pub endpoints: std::collections::BTreeMap<String, String>,
    /// Scene specs served by the synthetic backend.
    pub scenes_dir: String,
    pub timeout_secs: f64,
    pub attempts: u32,
    pub backoff_ms: u64,
    pub max_inflight: usize,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            data_dir: "data".into(),
            store: "data/store.sqlite".into(),
            collect: CollectConfig::default(),
            shot: ShotConfig::default(),
            semantic: SemanticConfig::default(),
            track: TrackConfig::default(),
            crop: CropConfig::default(),
            feature: FeatureConfig::default(),
            worker: WorkerConfig::default(),
            backend: BackendConfig::default(),
        }
    }
}

impl Default for CollectConfig {
    fn default() -> Self {
        Self {
            n_breeds: 10,
            n_contexts: 10,
            per_query: 5,
            seed: 0,
        }
    }
}

impl Default for ShotConfig {
    fn default() -> Self {
        Self {
            threshold: 25.0,
            min_len: 30,
            target_fps: 10.0,
            still_eps: 0.5,
        }
    }
}

impl Default for SemanticConfig {
    fn default() -> Self {
        Self {
            threshold: 0.55,
            n_samples: 10,
            weight: 2.5,
            seed: 0,
        }
    }
}

impl Default for TrackConfig {
    fn default() -> Self {
        Self {
            interval: 50,
            prompt_template: "{category}".into(),
            association_floor: 0.3,
            overlap_iou: 0.1,
            margin_frac: 0.02,
            inconsistency_iou: 0.3,
            min_len: 30,
            max_len: 500,
            max_gap: 5,
            image_check: true,
            seed: 0,
        }
    }
}

impl Default for CropConfig {
    fn default() -> Self {
        Self {
            size: 512,
            area_ratio: 2.0,
            smooth_window: 10,
        }
    }
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            occlusion_radius: mf_core::morph::DEFAULT_RADIUS,
            occlusion_tau: mf_core::occlusion::DEFAULT_TAU,
            batch: 16,
        }
    }
}

impl Default for WorkerConfig {
    fn default() -> Self {
        Self {
            lease_secs: mf_store::DEFAULT_LEASE_SECS,
            poll_ms: 200,
        }
    }
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self {
            endpoint: "http://127.0.0.1:8700".into(),
            endpoints: Default::default(),
            scenes_dir: "fixtures/scenes".into(),
            timeout_secs: 120.0,
            attempts: 3,
            backoff_ms: 200,
            max_inflight: 8,
        }
    }
}

impl Config {
    /// Parses TOML text without environment overrides.
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))
    }

    /// Reads `path` if given (defaults otherwise), then applies overrides
    /// from the process environment.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p)
                .map_err(|e| PipelineError::Config(format!("{}: {e}", p.display())))?,
            None => String::new(),
        };
        Self::from_sources(&text, std::env::vars())
    }

    /// Merges `MF_*` pairs from `env` over the TOML document.
    pub fn from_sources(text: &str, env: impl IntoIterator<Item = (String, String)>) -> Result<Self> {
        let mut doc: toml::Table = toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        let mut applied = false;
        for (key, raw) in env {
            let Some(rest) = key.strip_prefix(ENV_PREFIX) else {
                continue;
            };
            if rest == "STORE" {
                doc.insert("store".into(), toml::Value::String(raw));
                applied = true;
                continue;
            }
            let path: Vec<String> = rest.split("__").map(|s| s.to_lowercase()).collect();
            if path.iter().any(String::is_empty) || (path.len() == 1 && path[0] != "data_dir") {
                continue;
            }
            let value = parse_scalar(&raw);
            let mut table = &mut doc;
            for seg in &path[..path.len() - 1] {
                let entry = table
                    .entry(seg.clone())
                    .or_insert_with(|| toml::Value::Table(toml::Table::new()));
                table = entry
                    .as_table_mut()
                    .ok_or_else(|| PipelineError::Config(format!("{key}: '{seg}' is not a section")))?;
            }
            table.insert(path[path.len() - 1].clone(), value);
            applied = true;
        }
        let config: Config = if applied || !text.trim().is_empty() {
            toml::Value::Table(doc)
                .try_into()
                .map_err(|e: toml::de::Error| PipelineError::Config(e.to_string()))?
        } else {
            Config::default()
        };
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        let mut check = |ok: bool, msg: &str| {
            if !ok {
                problems.push(msg.to_string());
            }
        };
        check(self.shot.threshold > 0.0, "shot.threshold must be positive");
        check(self.shot.min_len >= 1, "shot.min_len must be at least 1");
        check(self.shot.target_fps > 0.0, "shot.target_fps must be positive");
        check(self.semantic.n_samples >= 1, "semantic.n_samples must be at least 1");
        check(self.track.interval >= 1, "track.interval must be at least 1");
        check((0.0..=1.0).contains(&self.track.overlap_iou), "track.overlap_iou must lie in [0, 1]");
        check((0.0..=1.0).contains(&self.track.inconsistency_iou), "track.inconsistency_iou must lie in [0, 1]");
        check((0.0..0.5).contains(&self.track.margin_frac), "track.margin_frac must lie in [0, 0.5)");
        check(self.track.min_len >= 1, "track.min_len must be at least 1");
        check(self.track.max_len >= self.track.min_len, "track.max_len must be >= track.min_len");
        check(self.crop.size >= 1, "crop.size must be at least 1");
        check(self.crop.area_ratio > 0.0, "crop.area_ratio must be positive");
        check(self.crop.smooth_window >= 1, "crop.smooth_window must be at least 1");
        check(self.feature.occlusion_radius >= 1, "feature.occlusion_radius must be at least 1");
        check(self.feature.batch >= 1, "feature.batch must be at least 1");
        check(self.worker.lease_secs > 0.0, "worker.lease_secs must be positive");
        check(self.backend.attempts >= 1, "backend.attempts must be at least 1");
        check(self.backend.max_inflight >= 1, "backend.max_inflight must be at least 1");
        if problems.is_empty() {
            Ok(())
        } else {
            Err(PipelineError::Config(problems.join("; ")))
        }
    }

    /// Settings sized for the 480×360 synthetic fixture corpus.
    pub fn corpus() -> Self {
        let mut c = Self::default();
        c.crop.size = 128;
        c.backend.endpoint = "synthetic".into();
        c
    }
}

fn parse_scalar(raw: &str) -> toml::Value {
    let wrapped = format!("v = {raw}");
    match toml::from_str::<toml::Table>(&wrapped) {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.into()),
    }
}
