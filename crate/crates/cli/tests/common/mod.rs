#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::atomic::AtomicBool;
use std::sync::{Arc, OnceLock};

use mf_backend::server::BackgroundServer;
use mf_cli::app;
use mf_cli::review::{self, ReviewState};
use mf_pipeline::media::Layout;
use mf_pipeline::{seed_collect, Config};
use mf_store::{Stage, Store};

pub const STAGES: [Stage; 4] = [Stage::Collect, Stage::Preprocess, Stage::Track, Stage::Feature];

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/scenes").canonicalize().unwrap()
}

pub fn corpus_config(root: &Path) -> Config {
    let mut config = Config::corpus();
    config.data_dir = root.join("data").display().to_string();
    config.store = root.join("store.sqlite").display().to_string();
    config.backend.scenes_dir = fixtures().display().to_string();
    config.collect.per_query = 50;
    config
}

/// Seeds both corpus categories and drains every stage.
pub fn run_corpus(config: &Config, workers: usize) {
    let ctx = app::context(config.clone()).unwrap();
    for category in ["horse", "dog"] {
        seed_collect(&ctx, category).unwrap();
    }
    let stop = AtomicBool::new(false);
    for stage in STAGES {
        let report = app::run(&ctx, stage, workers, true, &stop).unwrap();
        assert_eq!(report.failed, 0, "{stage}: {report:?}");
    }
}

pub fn copy_tree(from: &Path, to: &Path) {
    std::fs::create_dir_all(to).unwrap();
    for entry in std::fs::read_dir(from).unwrap() {
        let entry = entry.unwrap();
        let target = to.join(entry.file_name());
        if entry.file_type().unwrap().is_dir() {
            copy_tree(&entry.path(), &target);
        } else {
            std::fs::copy(entry.path(), target).unwrap();
        }
    }
}

/// The corpus processed once per test binary.
fn template() -> &'static Path {
    static DIR: OnceLock<PathBuf> = OnceLock::new();
    DIR.get_or_init(|| {
        let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join(format!("corpus-{}", std::process::id()));
        let _ = std::fs::remove_dir_all(&dir);
        run_corpus(&corpus_config(&dir), 2);
        dir
    })
}

/// A private copy of the processed corpus.
pub struct Processed {
    pub dir: tempfile::TempDir,
    pub config: Config,
}

pub fn processed() -> Processed {
    let src = template();
    let dir = tempfile::tempdir().unwrap();
    copy_tree(src, dir.path());
    let config = corpus_config(dir.path());
    Processed { dir, config }
}

pub struct Review {
    pub server: BackgroundServer,
    pub store: Arc<Store>,
    pub agent: ureq::Agent,
}

impl Review {
    pub fn start(config: &Config) -> Self {
        let store = app::open_store(config).unwrap();
        let state = Arc::new(ReviewState {
            store: store.clone(),
            layout: Layout::new(&config.data_dir),
            skeleton: mf_core::Skeleton::quadruped17(),
        });
        let server = BackgroundServer::start("127.0.0.1:0".parse().unwrap(), review::router(state)).unwrap();
        let agent: ureq::Agent = ureq::Agent::config_builder().http_status_as_error(false).build().into();
        Self { server, store, agent }
    }

    pub fn url(&self, path: &str) -> String {
        format!("{}{path}", self.server.url())
    }

    pub fn get(&self, path: &str) -> ureq::http::Response<ureq::Body> {
        self.agent.get(self.url(path)).call().unwrap()
    }

    pub fn get_json<T: serde::de::DeserializeOwned>(&self, path: &str) -> T {
        let mut resp = self.get(path);
        assert_eq!(resp.status(), 200, "GET {path}");
        resp.body_mut().read_json().unwrap()
    }

    /// Posts a decision with every criterion ticked; returns the status code.
    pub fn decide(&self, track: &str, decision: &str) -> u16 {
        let body = serde_json::json!({
            "decision": decision,
            "criteria": mf_store::ReviewCriteria::all(),
            "reviewer": "tester",
        });
        self.agent.post(self.url(&format!("/api/review/{track}"))).send_json(body).unwrap().status().as_u16()
    }
}

/// `n` single-actor horse videos named `v00`, `v01`, ... written to `dir`.
pub fn small_scenes(dir: &Path, n: usize, frames: usize) {
    std::fs::create_dir_all(dir).unwrap();
    let base = mf_synth::corpus::fixture_corpus().into_iter().find(|s| s.name == "clean_ellipse").unwrap();
    for i in 0..n {
        let mut s = base.clone();
        s.name = format!("v{i:02}");
        s.title = format!("horse video {}", s.name);
        s.seed = i as u64 + 1;
        s.frames = frames;
        std::fs::write(dir.join(format!("{}.json", s.name)), s.to_json()).unwrap();
    }
}

/// Writes `mf.toml` for a workspace rooted at `root` and returns it.
pub fn write_config(root: &Path, scenes: &Path, lease_secs: f64) -> (PathBuf, Config) {
    let mut config = corpus_config(root);
    config.backend.scenes_dir = scenes.display().to_string();
    config.collect.per_query = 20;
    config.worker.lease_secs = lease_secs;
    config.worker.poll_ms = 50;
    let file = root.join("mf.toml");
    std::fs::write(&file, config.to_toml()).unwrap();
    (file, config)
}

/// The `mf` binary, run from `root` with `--config mf.toml` and only our
/// own environment overrides.
pub fn mf(root: &Path) -> std::process::Command {
    let mut cmd = std::process::Command::new(env!("CARGO_BIN_EXE_mf"));
    for (k, _) in std::env::vars() {
        if k.starts_with("MF_") {
            cmd.env_remove(k);
        }
    }
    cmd.current_dir(root).env("RUST_LOG", "info").arg("--config").arg(root.join("mf.toml"));
    cmd
}

/// Ids in `processing <stage>/<id>` log lines, one entry per line.
pub fn processed_ids(log: &str, stage: Stage) -> Vec<String> {
    let tag = format!("processing {stage}/");
    log.lines().filter_map(|l| l.split_once(&tag).map(|(_, id)| id.trim().to_string())).collect()
}

pub fn count(store: &Store, stage: Stage, status: mf_store::Status) -> usize {
    store.count(&mf_store::Filter::stage(stage).with_status(status)).unwrap()
}
