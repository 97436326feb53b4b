use std::io::BufRead;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::OnceLock;

use anyhow::{anyhow, bail, ensure, Context as _};
use mf_cli::manifest::{BenchmarkManifest, MANIFEST_FILE};
use mf_cli::review::{Queue, Stats};
use mf_core::metrics::MetricReport;
use mf_store::{Decision, Filter, ReviewCriteria, Stage, Store};

use crate::common::{self, mf};
use crate::Outcome;

fn check(cmd: &mut Command) -> anyhow::Result<String> {
    let out = cmd.output()?;
    if !out.status.success() {
        bail!("{cmd:?} exited with {}: {}", out.status, String::from_utf8_lossy(&out.stderr));
    }
    Ok(String::from_utf8(out.stdout)?)
}

/// The fixture corpus taken through every stage by the `mf` binary, once.
fn processed_corpus() -> anyhow::Result<&'static Path> {
    static DIR: OnceLock<Result<tempfile::TempDir, String>> = OnceLock::new();
    let dir = DIR.get_or_init(|| {
        let run = || -> anyhow::Result<tempfile::TempDir> {
            let dir = tempfile::tempdir()?;
            common::write_config(dir.path(), &common::fixtures(), 600.0);
            check(mf(dir.path()).args(["seed", "horse", "dog"]))?;
            for stage in ["collect", "preprocess", "track", "feature"] {
                check(mf(dir.path()).args(["run", stage, "--workers", "2"]))?;
            }
            Ok(dir)
        };
        run().map_err(|e| format!("{e:#}"))
    });
    dir.as_ref().map(|d| d.path()).map_err(|e| anyhow!("processing the corpus: {e}"))
}

/// A private copy of the processed corpus with its own config and store.
fn workspace() -> anyhow::Result<(tempfile::TempDir, mf_pipeline::Config)> {
    let src = processed_corpus()?;
    let dir = tempfile::tempdir()?;
    common::copy_tree(src, dir.path());
    let (_, config) = common::write_config(dir.path(), &common::fixtures(), 600.0);
    Ok((dir, config))
}

pub fn oracle_round_trip() -> Outcome {
    let (dir, config) = workspace()?;
    let root = dir.path();
    let store = Store::open(&config.store)?;
    let review = store.query(&Filter::stage(Stage::Review))?;
    ensure!(review.len() >= 12, "only {} tracks reached review", review.len());
    for item in &review {
        store.decide(&item.id, Decision::Accept, ReviewCriteria::all(), "acceptance")?;
    }
    drop(store);

    check(mf(root).args(["export", "--out", "bench", "--cap", "1000"]))?;
    check(mf(root).args(["synth", "oracle", "--manifest", "bench", "--out", "pred"]))?;
    let table = check(mf(root).args(["evaluate", "--manifest", "bench", "--pred", "pred", "--out", "report.json"]))?;
    ensure!(table.contains("oracle"), "evaluate printed {table}");

    let report: MetricReport<f64> = serde_json::from_str(&std::fs::read_to_string(root.join("report.json"))?)?;
    let [method] = report.methods.as_slice() else {
        bail!("expected one method, got {}", report.methods.len());
    };
    ensure!(method.exclusions.is_empty(), "exclusions {:?}", method.exclusions);
    ensure!(method.sequences.len() == review.len(), "{} of {} sequences scored", method.sequences.len(), review.len());
    let mut worst_iou: f64 = 1.0;
    let mut worst_mpjve: f64 = 0.0;
    for row in &method.sequences {
        let m = &row.metrics;
        let iou = m.iou.ok_or_else(|| anyhow!("{}: no IoU", row.track_id))?;
        let mpjve = m.mpjve.ok_or_else(|| anyhow!("{}: no MPJVE", row.track_id))?;
        ensure!(iou >= 0.98, "{}: IoU {iou}", row.track_id);
        ensure!(m.pck_high == Some(1.0), "{}: PCK@0.1 {:?}", row.track_id, m.pck_high);
        ensure!(mpjve <= 1e-3, "{}: MPJVE {mpjve}", row.track_id);
        worst_iou = worst_iou.min(iou);
        worst_mpjve = worst_mpjve.max(mpjve);
    }
    println!(
        "      {} sequences, worst IoU {worst_iou:.4}, PCK@0.1 {:?}, worst MPJVE {worst_mpjve:.2e}",
        method.sequences.len(),
        method.overall.pck_high
    );
    Ok(())
}

struct Server {
    child: std::process::Child,
    url: String,
}

impl Server {
    fn start(root: &Path) -> anyhow::Result<Self> {
        let mut child = mf(root).args(["serve", "--port", "0"]).stdout(Stdio::piped()).stderr(Stdio::null()).spawn()?;
        let mut line = String::new();
        std::io::BufReader::new(child.stdout.take().unwrap()).read_line(&mut line)?;
        let url = line.trim().rsplit(' ').next().unwrap_or_default().to_string();
        ensure!(url.starts_with("http://"), "serve printed {line:?}");
        Ok(Self { child, url })
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = Command::new("kill").args(["-TERM", &self.child.id().to_string()]).status();
        let _ = self.child.wait();
    }
}

pub fn review_and_export() -> Outcome {
    let (dir, _) = workspace()?;
    let root = dir.path();
    let server = Server::start(root)?;
    let agent: ureq::Agent = ureq::Agent::config_builder().http_status_as_error(false).build().into();

    let queue: Queue = agent.get(format!("{}/api/review/queue", server.url)).call()?.body_mut().read_json()?;
    let horses: Vec<String> = queue
        .items
        .iter()
        .filter(|e| e.category.as_deref() == Some("horse"))
        .map(|e| e.track_id.clone())
        .collect();
    ensure!(horses.len() >= 12, "{} horse tracks pending", horses.len());
    let accepted = &horses[..12];
    for id in accepted {
        let body = serde_json::json!({"decision": "accept", "criteria": ReviewCriteria::all(), "reviewer": "acceptance"});
        let status = agent.post(format!("{}/api/review/{id}", server.url)).send_json(body)?.status();
        ensure!(status == 200, "accept {id}: HTTP {status}");
    }
    let stats: Stats = agent.get(format!("{}/api/stats", server.url)).call()?.body_mut().read_json()?;
    ensure!(stats.accepted_by_category.get("horse") == Some(&12), "stats {stats:?}");
    drop(server);

    let out = check(mf(root).args(["export", "--out", "bench"]))?;
    ensure!(out.contains("exported 10 sequences"), "export printed {out}");
    let bench: PathBuf = root.join("bench");
    let manifest = BenchmarkManifest::load(&bench.join(MANIFEST_FILE))?;
    let ids: Vec<&str> = manifest.sequences.iter().map(|s| s.track_id.as_str()).collect();
    let want: Vec<&str> = accepted[..10].iter().map(String::as_str).collect();
    ensure!(ids == want, "exported {ids:?}, expected the first ten accepted {want:?}");
    ensure!(manifest.categories == ["horse"], "categories {:?}", manifest.categories);

    let problems = manifest.problems(&bench);
    ensure!(problems.is_empty(), "validation: {problems:?}");
    let truth = manifest.load_truth(&bench).context("loading benchmark truth")?;
    for (seq, t) in manifest.sequences.iter().zip(&truth) {
        ensure!(t.masks.len() == seq.frames && t.keypoints.len() == seq.frames, "{}: frame counts", seq.track_id);
        ensure!(manifest.crop_windows(&bench, seq)?.len() == seq.frames);
    }
    let copy = root.join("copy.json");
    manifest.save(&copy)?;
    ensure!(BenchmarkManifest::load(&copy)? == manifest, "manifest does not round-trip");
    ensure!(std::fs::read(&copy)? == std::fs::read(bench.join(MANIFEST_FILE))?, "re-saved manifest differs");
    Ok(())
}
