//! Acceptance gate: one line per criterion, non-zero exit if any fails.

#[path = "../common/mod.rs"]
mod common;
mod corpus;
mod filters;
mod geometry;
mod metrics;
mod oracle;
mod orchestration;

use std::panic::AssertUnwindSafe;
use std::time::{Duration, Instant};

pub type Outcome = anyhow::Result<()>;

struct Criterion {
    name: &'static str,
    limit: Option<Duration>,
    run: fn() -> Outcome,
}

const fn criterion(name: &'static str, limit_secs: Option<u64>, run: fn() -> Outcome) -> Criterion {
    let limit = match limit_secs {
        Some(s) => Some(Duration::from_secs(s)),
        None => None,
    };
    Criterion { name, limit, run }
}

const CRITERIA: &[Criterion] = &[
    criterion("metric oracles", Some(30), metrics::metric_oracles),
    criterion("oracle round trip", Some(120), corpus::oracle_round_trip),
    criterion("shot detection", None, geometry::shot_detection),
    criterion("filter triggers", Some(60), filters::filter_triggers),
    criterion("crop geometry", None, geometry::crop_geometry),
    criterion("occlusion boundary", None, geometry::occlusion_boundary),
    criterion("exactly-once orchestration", Some(60), orchestration::exactly_once),
    criterion("review and export", None, corpus::review_and_export),
];

fn main() {
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    let mut ran = 0;
    for c in CRITERIA {
        if !filter.is_empty() && !filter.iter().any(|f| c.name.contains(f.as_str())) {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let result = std::panic::catch_unwind(AssertUnwindSafe(c.run));
        let elapsed = start.elapsed();
        let verdict = match result {
            Ok(Ok(())) => match c.limit {
                Some(limit) if elapsed > limit => Err(format!("took longer than {} s", limit.as_secs())),
                _ => Ok(()),
            },
            Ok(Err(e)) => Err(format!("{e:#}")),
            Err(panic) => Err(panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into())),
        };
        let limit = c.limit.map(|l| format!(" / limit {} s", l.as_secs())).unwrap_or_default();
        match verdict {
            Ok(()) => println!("PASS  {:<28} {:>7.2} s{limit}", c.name, elapsed.as_secs_f64()),
            Err(why) => {
                failed += 1;
                println!("FAIL  {:<28} {:>7.2} s{limit}  {why}", c.name, elapsed.as_secs_f64());
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", ran - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
