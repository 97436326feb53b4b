//! Command implementations shared by the binary and the tests.

use std::path::{Path, PathBuf};
use std::sync::atomic::AtomicBool;
use std::sync::Arc;

use anyhow::{Context as _, Result};
use mf_backend::Backend;
use mf_core::metrics::{evaluate, EvalConfig, MetricReport};
use mf_pipeline::{build_gateway, Config, Context, RunOptions, RunReport};
use mf_store::{Stage, Store, SystemClock};
use mf_synth::{corpus, SyntheticBackend};

use crate::manifest::{self, BenchmarkManifest};
use crate::predictions;

pub const CONFIG_ENV: &str = "MF_CONFIG";
pub const DEFAULT_CONFIG: &str = "mf.toml";

/// `--config`, else `$MF_CONFIG`, else `./mf.toml` when present.
pub fn config_path(explicit: Option<&Path>) -> Option<PathBuf> {
    explicit
        .map(Path::to_path_buf)
        .or_else(|| std::env::var_os(CONFIG_ENV).map(PathBuf::from))
        .or_else(|| Path::new(DEFAULT_CONFIG).is_file().then(|| PathBuf::from(DEFAULT_CONFIG)))
}

pub fn load_config(explicit: Option<&Path>) -> Result<Config> {
    let path = config_path(explicit);
    Config::load(path.as_deref()).with_context(|| match &path {
        Some(p) => format!("loading {}", p.display()),
        None => "loading default configuration".into(),
    })
}

pub fn open_store(config: &Config) -> Result<Arc<Store>> {
    let path = Path::new(&config.store);
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    let store = Store::open_with_clock(path, Arc::new(SystemClock)).with_context(|| format!("opening {}", path.display()))?;
    Ok(Arc::new(store))
}

fn uses_synthetic(config: &Config) -> bool {
    config.backend.endpoint == "synthetic" || config.backend.endpoints.values().any(|e| e == "synthetic")
}

pub fn synthetic_backend(config: &Config) -> Result<Arc<SyntheticBackend>> {
    let dir = Path::new(&config.backend.scenes_dir);
    let specs = corpus::load_dir(dir).with_context(|| format!("loading scenes from {}", dir.display()))?;
    Ok(Arc::new(SyntheticBackend::new(specs)))
}

pub fn context(config: Config) -> Result<Context> {
    let synthetic: Option<Arc<dyn Backend>> = if uses_synthetic(&config) {
        Some(synthetic_backend(&config)?)
    } else {
        None
    };
    let gateway = build_gateway(&config.backend, synthetic)?;
    let store = open_store(&config)?;
    Ok(Context::new(config, store, Arc::new(gateway)))
}

/// Creates the data directory, the store and, if missing, a config file
/// holding every default.
pub fn init(config: &Config, config_file: &Path) -> Result<()> {
    std::fs::create_dir_all(&config.data_dir).with_context(|| format!("creating {}", config.data_dir))?;
    open_store(config)?;
    if !config_file.exists() {
        std::fs::write(config_file, config.to_toml()).with_context(|| format!("writing {}", config_file.display()))?;
    }
    Ok(())
}

pub fn run(ctx: &Context, stage: Stage, workers: usize, drain: bool, stop: &AtomicBool) -> Result<RunReport> {
    let opts = RunOptions {
        workers,
        lease_secs: ctx.config.worker.lease_secs,
        poll: std::time::Duration::from_millis(ctx.config.worker.poll_ms),
        drain,
        ..RunOptions::default()
    };
    Ok(mf_pipeline::run_stage(&ctx.store, stage, &opts, stop, |item| mf_pipeline::process(ctx, item))?)
}

/// Scores every method under `pred` against the manifest, writes
/// `report.json` to `out` and returns the report.
pub fn evaluate_dir(manifest_path: &Path, pred: &Path, cfg: &EvalConfig, out: &Path) -> Result<MetricReport<f64>> {
    let (file, root) = manifest::resolve(manifest_path);
    let manifest = BenchmarkManifest::load(&file)?;
    let truth = manifest.load_truth(&root)?;
    let (set, failures) = predictions::load(pred, &manifest)?;
    let mut report = evaluate(&truth, &set, cfg);
    for m in &mut report.methods {
        for (track, reason) in failures.get(&m.method).into_iter().flatten() {
            if let Some(e) = m.exclusions.iter_mut().find(|e| &e.track_id == track) {
                e.reason = reason.clone();
            }
        }
    }
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(out, serde_json::to_string_pretty(&report)? + "\n").with_context(|| format!("writing {}", out.display()))?;
    Ok(report)
}
