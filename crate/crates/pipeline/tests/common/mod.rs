#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::atomic::AtomicBool;
use std::sync::Arc;

use mf_pipeline::config::Config;
use mf_pipeline::records::TrackRecord;
use mf_pipeline::{build_gateway, process, seed_collect, run_stage, Context, RunOptions};
use mf_backend::Gateway;
use mf_store::{Kind, Stage, Store, SystemClock, WorkItem};
use mf_synth::{corpus, SyntheticBackend};

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/scenes")
}

pub fn corpus_backend() -> Arc<SyntheticBackend> {
    Arc::new(SyntheticBackend::new(corpus::load_dir(&fixtures()).unwrap()))
}

pub fn backend_for(names: &[&str]) -> Arc<SyntheticBackend> {
    let specs = corpus::load_dir(&fixtures()).unwrap();
    Arc::new(SyntheticBackend::new(specs.into_iter().filter(|s| names.contains(&s.name.as_str()))))
}

pub fn corpus_config(root: &Path) -> Config {
    let mut config = Config::corpus();
    config.data_dir = root.join("data").display().to_string();
    config.store = root.join("store.sqlite").display().to_string();
    config.collect.per_query = 50;
    config
}

pub fn context_with(config: Config, gateway: Gateway) -> Context {
    let store = Arc::new(Store::open_with_clock(&config.store, Arc::new(SystemClock)).unwrap());
    Context::new(config, store, Arc::new(gateway))
}

pub fn corpus_context(root: &Path, backend: Arc<SyntheticBackend>) -> Context {
    let config = corpus_config(root);
    let gateway = build_gateway(&config.backend, Some(backend)).unwrap();
    context_with(config, gateway)
}

/// Enqueues one video for collection and drains `stages` in order.
pub fn run_video(ctx: &Context, video: &str, category: &str, stages: &[Stage]) {
    let item = WorkItem::new(video, Kind::Video, Stage::Collect, "").with_meta("category", category);
    ctx.store.enqueue_if_absent(&item).unwrap();
    let stop = AtomicBool::new(false);
    for &stage in stages {
        let report = run_stage(&ctx.store, stage, &RunOptions::default(), &stop, |i| process(ctx, i)).unwrap();
        assert_eq!(report.failed, 0, "{stage}: {report:?}");
    }
}

pub const STAGES: [Stage; 4] = [Stage::Collect, Stage::Preprocess, Stage::Track, Stage::Feature];

/// Seeds every corpus category and drains each stage in order.
pub fn run_all(ctx: &Context, workers: usize) {
    for category in ["horse", "dog"] {
        seed_collect(ctx, category).unwrap();
    }
    let opts = RunOptions {
        workers,
        ..RunOptions::default()
    };
    let stop = AtomicBool::new(false);
    for stage in STAGES {
        let report = run_stage(&ctx.store, stage, &opts, &stop, |item| process(ctx, item)).unwrap();
        assert_eq!(report.failed, 0, "{stage}: {report:?}");
    }
}

pub fn load_tracks(ctx: &Context) -> Vec<TrackRecord> {
    let root = ctx.layout.root().join("tracks");
    let mut out: Vec<TrackRecord> = match std::fs::read_dir(&root) {
        Ok(rd) => rd
            .map(|e| e.unwrap().path())
            .filter(|p| p.join("track.json").is_file())
            .map(|p| serde_json::from_str(&std::fs::read_to_string(p.join("track.json")).unwrap()).unwrap())
            .collect(),
        Err(_) => vec![],
    };
    out.sort_by(|a, b| a.track_id.cmp(&b.track_id));
    out
}
