use std::collections::HashSet;
use std::sync::{Arc, Barrier, Mutex};

use mf_store::{
    CompareOp, Decision, Filter, Kind, ManualClock, MetaPredicate, Metadata, Outcome, ReviewCriteria, Stage, Status,
    Store, StoreError, WorkItem,
};
use serde_json::json;

fn clip(id: &str) -> WorkItem {
    WorkItem::new(id, Kind::Clip, Stage::Track, format!("clips/{id}"))
}

fn manual_store(dir: &tempfile::TempDir) -> (Store, Arc<ManualClock>) {
    let clock = Arc::new(ManualClock::new(1_000.0));
    let store = Store::open_with_clock(dir.path().join("mf.db"), clock.clone()).unwrap();
    (store, clock)
}

#[test]
fn enqueue_then_get_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let (store, _) = manual_store(&dir);
    let item = clip("c1").with_meta("category", "horse").with_meta("title", "a horse");
    store.enqueue(&item).unwrap();
    let got = store.get(Stage::Track, "c1").unwrap().unwrap();
    assert_eq!(got.id, "c1");
    assert_eq!(got.status, Status::Unprocessed);
    assert_eq!(got.metadata, item.metadata);
    assert_eq!(got.payload_path, "clips/c1");
    assert_eq!(got.created_at, 1_000.0);
}

#[test]
fn duplicate_enqueue_fails() {
    let dir = tempfile::tempdir().unwrap();
    let (store, _) = manual_store(&dir);
    store.enqueue(&clip("c1")).unwrap();
    let err = store.enqueue(&clip("c1")).unwrap_err();
    assert!(matches!(err, StoreError::Duplicate { .. }), "{err}");
    assert!(!store.enqueue_if_absent(&clip("c1")).unwrap());
    let mut other_stage = clip("c1");
    other_stage.stage = Stage::Feature;
    store.enqueue(&other_stage).unwrap();
}

#[test]
fn thousand_enqueues_counted() {
    let dir = tempfile::tempdir().unwrap();
    let (store, _) = manual_store(&dir);
    for i in 0..1000 {
        store.enqueue(&clip(&format!("c{i:04}"))).unwrap();
    }
    assert_eq!(store.count(&Filter::default()).unwrap(), 1000);
    assert_eq!(store.count(&Filter::stage(Stage::Track).with_status(Status::Unprocessed)).unwrap(), 1000);
}

#[test]
fn claim_on_empty_store_is_none() {
    let dir = tempfile::tempdir().unwrap();
    let (store, _) = manual_store(&dir);
    assert!(store.claim(Stage::Track, "w", 10.0).unwrap().is_none());
}

#[test]
fn concurrent_claimers_have_a_single_winner() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("mf.db");
    Store::open(&path).unwrap().enqueue(&clip("only")).unwrap();
    for _round in 0..5 {
        let barrier = Arc::new(Barrier::new(8));
        let winners = Arc::new(Mutex::new(Vec::new()));
        let handles: Vec<_> = (0..8)
            .map(|w| {
                let (path, barrier, winners) = (path.clone(), barrier.clone(), winners.clone());
                std::thread::spawn(move || {
                    let store = Store::open(&path).unwrap();
                    barrier.wait();
                    if let Some(item) = store.claim(Stage::Track, &format!("w{w}"), 60.0).unwrap() {
                        winners.lock().unwrap().push(item.lease_owner.unwrap());
                    }
                })
            })
            .collect();
        for h in handles {
            h.join().unwrap();
        }
        let winners = winners.lock().unwrap();
        assert!(winners.len() <= 1, "{winners:?}");
        let store = Store::open(&path).unwrap();
        if let Some(owner) = winners.first() {
            store
                .finish(Stage::Track, "only", owner, Outcome::Completed, Metadata::new())
                .unwrap();
            return;
        }
    }
    panic!("no claimer ever won");
}

#[test]
fn many_workers_claim_every_item_once() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("mf.db");
    let store = Store::open(&path).unwrap();
    for i in 0..60 {
        store.enqueue(&clip(&format!("c{i:02}"))).unwrap();
    }
    let seen = Arc::new(Mutex::new(Vec::new()));
    let handles: Vec<_> = (0..6)
        .map(|w| {
            let (path, seen) = (path.clone(), seen.clone());
            std::thread::spawn(move || {
                let store = Store::open(&path).unwrap();
                let me = format!("w{w}");
                while let Some(item) = store.claim(Stage::Track, &me, 60.0).unwrap() {
                    seen.lock().unwrap().push(item.id.clone());
                    store
                        .finish(Stage::Track, &item.id, &me, Outcome::Completed, Metadata::new())
                        .unwrap();
                }
            })
        })
        .collect();
    for h in handles {
        h.join().unwrap();
    }
    let seen = seen.lock().unwrap();
    let unique: HashSet<_> = seen.iter().collect();
    assert_eq!(seen.len(), 60);
    assert_eq!(unique.len(), 60);
    assert_eq!(store.count(&Filter::default().with_status(Status::Completed)).unwrap(), 60);
}

#[test]
fn expired_lease_is_reclaimable() {
    let dir = tempfile::tempdir().unwrap();
    let (store, clock) = manual_store(&dir);
    store.enqueue(&clip("c1")).unwrap();
    let first = store.claim(Stage::Track, "dead", 30.0).unwrap().unwrap();
    assert_eq!(first.lease_expiry, Some(1_030.0));
    assert!(store.claim(Stage::Track, "alive", 30.0).unwrap().is_none());
    clock.advance(29.0);
    assert!(store.claim(Stage::Track, "alive", 30.0).unwrap().is_none());
    clock.advance(1.0);
    let again = store.claim(Stage::Track, "alive", 30.0).unwrap().unwrap();
    assert_eq!(again.lease_owner.as_deref(), Some("alive"));
    assert_eq!(again.attempts, 2);
    let late = store.finish(Stage::Track, "c1", "dead", Outcome::Completed, Metadata::new());
    assert!(matches!(late, Err(StoreError::NotOwner { .. })));
    store
        .finish(Stage::Track, "c1", "alive", Outcome::Discarded, Metadata::new())
        .unwrap();
    assert_eq!(store.get(Stage::Track, "c1").unwrap().unwrap().status, Status::Discarded);
}

#[test]
fn finish_requires_a_live_owned_lease() {
    let dir = tempfile::tempdir().unwrap();
    let (store, clock) = manual_store(&dir);
    store.enqueue(&clip("c1")).unwrap();
    let err = store
        .finish(Stage::Track, "c1", "w", Outcome::Completed, Metadata::new())
        .unwrap_err();
    assert!(matches!(err, StoreError::WrongStatus { .. }), "{err}");
    let err = store
        .finish(Stage::Track, "nope", "w", Outcome::Completed, Metadata::new())
        .unwrap_err();
    assert!(matches!(err, StoreError::NotFound { .. }), "{err}");

    store.claim(Stage::Track, "w", 10.0).unwrap().unwrap();
    clock.advance(10.0);
    let err = store
        .finish(Stage::Track, "c1", "w", Outcome::Completed, Metadata::new())
        .unwrap_err();
    assert!(matches!(err, StoreError::LeaseExpired { .. }), "{err}");
    assert!(err.is_conflict());
}

#[test]
fn renew_extends_lease() {
    let dir = tempfile::tempdir().unwrap();
    let (store, clock) = manual_store(&dir);
    store.enqueue(&clip("c1")).unwrap();
    store.claim(Stage::Track, "w", 10.0).unwrap().unwrap();
    clock.advance(8.0);
    store.renew(Stage::Track, "c1", "w", 10.0).unwrap();
    clock.advance(8.0);
    assert!(store.claim(Stage::Track, "x", 10.0).unwrap().is_none());
    store
        .finish(Stage::Track, "c1", "w", Outcome::Completed, Metadata::new())
        .unwrap();
}

#[test]
fn finish_metadata_is_queryable() {
    let dir = tempfile::tempdir().unwrap();
    let (store, _) = manual_store(&dir);
    let flows = [0.5, 2.3, 4.0];
    for (i, _) in flows.iter().enumerate() {
        store.enqueue(&clip(&format!("c{i}")).with_meta("category", "dog")).unwrap();
    }
    for flow in flows {
        let item = store.claim(Stage::Track, "w", 60.0).unwrap().unwrap();
        let mut meta = Metadata::new();
        meta.insert("mean_flow".into(), json!(flow));
        let outcome = if flow > 1.0 { Outcome::Completed } else { Outcome::Discarded };
        store.finish(Stage::Track, &item.id, "w", outcome, meta).unwrap();
    }
    let c1 = store.get(Stage::Track, "c1").unwrap().unwrap();
    assert_eq!(c1.meta_f64("mean_flow"), Some(2.3));
    assert_eq!(c1.category(), Some("dog"));

    let completed = store.query(&Filter::default().with_status(Status::Completed)).unwrap();
    assert_eq!(completed.len(), 2);

    for tau in [0.0, 1.0, 2.3, 3.0, 5.0] {
        let got: Vec<_> = store
            .query(&Filter::default().with_predicate(MetaPredicate::new("mean_flow", CompareOp::Ge, tau)))
            .unwrap()
            .into_iter()
            .map(|i| i.id)
            .collect();
        let want: Vec<_> = flows
            .iter()
            .enumerate()
            .filter(|(_, f)| **f >= tau)
            .map(|(i, _)| format!("c{i}"))
            .collect();
        assert_eq!(got, want, "tau {tau}");
    }
    assert!(store.query(&Filter::default().with_category("cat")).unwrap().is_empty());
    let parsed: MetaPredicate = "mean_flow<1".parse().unwrap();
    assert_eq!(store.query(&Filter::default().with_predicate(parsed)).unwrap().len(), 1);
}

#[test]
fn query_on_empty_store_is_empty() {
    let dir = tempfile::tempdir().unwrap();
    let (store, _) = manual_store(&dir);
    assert!(store.query(&Filter::default().with_status(Status::Completed)).unwrap().is_empty());
}

#[test]
fn state_survives_reopen() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("mf.db");
    {
        let store = Store::open(&path).unwrap();
        store.enqueue(&clip("a")).unwrap();
        store.enqueue(&clip("b")).unwrap();
        store.claim(Stage::Track, "w", 600.0).unwrap().unwrap();
        store.finish(Stage::Track, "a", "w", Outcome::Completed, Metadata::new()).unwrap();
    }
    let store = Store::open(&path).unwrap();
    assert_eq!(store.get(Stage::Track, "a").unwrap().unwrap().status, Status::Completed);
    assert_eq!(store.get(Stage::Track, "b").unwrap().unwrap().status, Status::Unprocessed);
}

#[test]
fn review_decisions_are_exclusive_and_ordered() {
    let dir = tempfile::tempdir().unwrap();
    let (store, clock) = manual_store(&dir);
    for id in ["t1", "t2", "t3"] {
        store
            .enqueue(&WorkItem::new(id, Kind::Track, Stage::Review, id).with_meta("category", "cat"))
            .unwrap();
    }
    let rec = store.decide("t2", Decision::Accept, ReviewCriteria::all(), "ana").unwrap();
    assert_eq!(rec.category.as_deref(), Some("cat"));
    clock.advance(1.0);
    let mut partial = ReviewCriteria::all();
    partial.smooth_animal_motion = false;
    store.decide("t1", Decision::Reject, partial, "bo").unwrap();
    clock.advance(1.0);
    store.decide("t3", Decision::Accept, ReviewCriteria::all(), "ana").unwrap();

    let err = store.decide("t2", Decision::Reject, ReviewCriteria::default(), "bo").unwrap_err();
    assert!(matches!(err, StoreError::AlreadyDecided(_)), "{err}");
    assert!(matches!(
        store.decide("zz", Decision::Accept, ReviewCriteria::all(), "bo"),
        Err(StoreError::NotFound { .. })
    ));

    let accepted: Vec<_> = store
        .curation(Some(Decision::Accept))
        .unwrap()
        .into_iter()
        .map(|r| r.track_id)
        .collect();
    assert_eq!(accepted, ["t2", "t3"]);
    let all = store.curation(None).unwrap();
    assert_eq!(all[1].criteria, partial);
    assert_eq!(all[1].reviewer, "bo");
    assert_eq!(store.get(Stage::Review, "t1").unwrap().unwrap().status, Status::Discarded);
    assert_eq!(store.get(Stage::Review, "t3").unwrap().unwrap().status, Status::Completed);
}
