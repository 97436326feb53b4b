//! Worker loops: claim, process, finish, with a heartbeat that keeps the
//! lease alive while an item is being processed.

use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::mpsc;
use std::time::Duration;

use mf_store::{Metadata, Outcome, Stage, Store, WorkItem};
use serde::Serialize;
use serde_json::Value;

use crate::error::{PipelineError, Result};

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub workers: usize,
    pub lease_secs: f64,
    pub poll: Duration,
    /// Exit once nothing is claimable instead of waiting for more work.
    pub drain: bool,
    /// Prefix for worker ids recorded as lease owners.
    pub worker_prefix: String,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            workers: 1,
            lease_secs: mf_store::DEFAULT_LEASE_SECS,
            poll: Duration::from_millis(200),
            drain: true,
            worker_prefix: format!("pid{}", std::process::id()),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct RunReport {
    pub completed: usize,
    pub discarded: usize,
    /// Items left leased after a retriable failure.
    pub failed: usize,
}

/// Runs `opts.workers` threads on `stage` until drained or `stop` is set.
/// A worker finishes its current item before honouring `stop`.
pub fn run_stage<F>(store: &Store, stage: Stage, opts: &RunOptions, stop: &AtomicBool, process: F) -> Result<RunReport>
where
    F: Fn(&WorkItem) -> Result<(Outcome, Metadata)> + Sync,
{
    let completed = AtomicUsize::new(0);
    let discarded = AtomicUsize::new(0);
    let failed = AtomicUsize::new(0);
    let fatal: std::sync::Mutex<Option<PipelineError>> = std::sync::Mutex::new(None);
    std::thread::scope(|s| {
        for w in 0..opts.workers.max(1) {
            let worker = format!("{}-{stage}-{w}", opts.worker_prefix);
            let (process, completed, discarded, failed, fatal) = (&process, &completed, &discarded, &failed, &fatal);
            s.spawn(move || {
                let result = worker_loop(store, stage, opts, stop, &worker, process, |o| match o {
                    Some(Outcome::Completed) => completed.fetch_add(1, Ordering::Relaxed),
                    Some(Outcome::Discarded) => discarded.fetch_add(1, Ordering::Relaxed),
                    None => failed.fetch_add(1, Ordering::Relaxed),
                });
                if let Err(e) = result {
                    log::error!("{worker}: {e}");
                    fatal.lock().unwrap_or_else(|p| p.into_inner()).get_or_insert(e);
                }
            });
        }
    });
    if let Some(e) = fatal.into_inner().unwrap_or_else(|p| p.into_inner()) {
        return Err(e);
    }
    Ok(RunReport {
        completed: completed.into_inner(),
        discarded: discarded.into_inner(),
        failed: failed.into_inner(),
    })
}

fn worker_loop<F>(
    store: &Store,
    stage: Stage,
    opts: &RunOptions,
    stop: &AtomicBool,
    worker: &str,
    process: &F,
    tally: impl Fn(Option<Outcome>) -> usize,
) -> Result<()>
where
    F: Fn(&WorkItem) -> Result<(Outcome, Metadata)> + Sync,
{
    while !stop.load(Ordering::SeqCst) {
        let Some(item) = store.claim(stage, worker, opts.lease_secs)? else {
            if opts.drain {
                break;
            }
            std::thread::sleep(opts.poll);
            continue;
        };
        log::info!("{worker}: processing {stage}/{}", item.id);
        let result = with_heartbeat(store, &item, worker, opts.lease_secs, || process(&item));
        match result {
            Ok((outcome, updates)) => match store.finish(stage, &item.id, worker, outcome, updates) {
                Ok(()) => {
                    tally(Some(outcome));
                }
                Err(e) if e.is_conflict() => {
                    log::warn!("{worker}: lost the lease on {stage}/{} before finishing: {e}", item.id);
                    tally(None);
                }
                Err(e) => return Err(e.into()),
            },
            Err(e) if e.is_retriable() => {
                log::warn!("{worker}: {stage}/{} will be retried after its lease lapses: {e}", item.id);
                tally(None);
            }
            Err(e) => {
                log::warn!("{worker}: discarding {stage}/{}: {e}", item.id);
                let mut updates = Metadata::new();
                updates.insert("error".into(), Value::String(e.to_string()));
                store.finish(stage, &item.id, worker, Outcome::Discarded, updates)?;
                tally(Some(Outcome::Discarded));
            }
        }
    }
    Ok(())
}

fn with_heartbeat<T>(store: &Store, item: &WorkItem, worker: &str, lease_secs: f64, f: impl FnOnce() -> T) -> T {
    let (done, wait) = mpsc::channel::<()>();
    let every = Duration::from_secs_f64((lease_secs / 3.0).max(0.05));
    std::thread::scope(|s| {
        s.spawn(move || {
            while let Err(mpsc::RecvTimeoutError::Timeout) = wait.recv_timeout(every) {
                if let Err(e) = store.renew(item.stage, &item.id, worker, lease_secs) {
                    log::warn!("{worker}: could not renew lease on {}/{}: {e}", item.stage, item.id);
                    break;
                }
            }
        });
        let out = f();
        drop(done);
        out
    })
}
