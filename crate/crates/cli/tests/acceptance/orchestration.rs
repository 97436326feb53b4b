use std::collections::BTreeMap;
use std::process::Stdio;
use std::time::{Duration, Instant};

use anyhow::{bail, ensure};
use mf_store::{Filter, Stage, Status, Store};

use crate::common::{count, mf, processed_ids, small_scenes, write_config};
use crate::Outcome;

fn tally(logs: &[&str]) -> BTreeMap<String, usize> {
    let mut m = BTreeMap::new();
    for log in logs {
        for id in processed_ids(log, Stage::Collect) {
            *m.entry(id).or_insert(0) += 1;
        }
    }
    m
}

fn run(root: &std::path::Path, workers: &str) -> anyhow::Result<(serde_json::Value, String)> {
    let out = mf(root).args(["run", "collect", "--workers", workers]).output()?;
    if !out.status.success() {
        bail!("run exited with {}: {}", out.status, String::from_utf8_lossy(&out.stderr));
    }
    Ok((serde_json::from_slice(&out.stdout)?, String::from_utf8(out.stderr)?))
}

fn four_by_twenty() -> Outcome {
    let dir = tempfile::tempdir()?;
    small_scenes(&dir.path().join("scenes"), 20, 30);
    let (_, config) = write_config(dir.path(), &dir.path().join("scenes"), 5.0);
    let seeded = mf(dir.path()).args(["seed", "horse"]).output()?;
    ensure!(seeded.status.success());

    let (report, log) = run(dir.path(), "4")?;
    ensure!(report["completed"] == 20, "report {report}");
    let seen = tally(&[&log]);
    ensure!(seen.len() == 20 && seen.values().all(|&n| n == 1), "processing counts {seen:?}");
    let store = Store::open(&config.store)?;
    let items = store.query(&Filter::stage(Stage::Collect))?;
    ensure!(items.len() == 20);
    ensure!(items.iter().all(|i| i.status == Status::Completed && i.attempts == 1), "{items:?}");
    ensure!(count(&store, Stage::Preprocess, Status::Unprocessed) == 20, "downstream items");
    Ok(())
}

fn kill_and_restart() -> Outcome {
    let dir = tempfile::tempdir()?;
    small_scenes(&dir.path().join("scenes"), 20, 30);
    let lease = 1.0;
    let (_, config) = write_config(dir.path(), &dir.path().join("scenes"), lease);
    ensure!(mf(dir.path()).args(["seed", "horse"]).output()?.status.success());
    let store = Store::open(&config.store)?;

    let log_path = dir.path().join("killed.log");
    let mut child = mf(dir.path())
        .args(["run", "collect", "--workers", "4"])
        .stdout(Stdio::null())
        .stderr(std::fs::File::create(&log_path)?)
        .spawn()?;
    let start = Instant::now();
    while count(&store, Stage::Collect, Status::Completed) < 3 {
        ensure!(start.elapsed() < Duration::from_secs(30), "no progress before the kill");
        std::thread::sleep(Duration::from_millis(20));
    }
    child.kill()?;
    child.wait()?;
    let done = count(&store, Stage::Collect, Status::Completed);
    ensure!(done < 20, "run finished before the kill");
    let orphaned: Vec<String> =
        store.query(&Filter::stage(Stage::Collect).with_status(Status::Processing))?.into_iter().map(|i| i.id).collect();

    std::thread::sleep(Duration::from_secs_f64(lease + 0.3));
    let (report, log) = run(dir.path(), "4")?;
    ensure!(report["completed"] == 20 - done, "restart report {report}, {done} done before");

    let killed_log = std::fs::read_to_string(&log_path)?;
    let seen = tally(&[&killed_log, &log]);
    for item in store.query(&Filter::stage(Stage::Collect))? {
        ensure!(item.status == Status::Completed, "{} is {}", item.id, item.status);
        let expected = if orphaned.contains(&item.id) { 2 } else { 1 };
        ensure!(item.attempts as usize == expected && seen.get(&item.id) == Some(&expected), "{}: attempts {}, processed {:?}", item.id, item.attempts, seen.get(&item.id));
    }
    ensure!(count(&store, Stage::Preprocess, Status::Unprocessed) == 20, "downstream items");
    Ok(())
}

pub fn exactly_once() -> Outcome {
    four_by_twenty()?;
    kill_and_restart()
}
