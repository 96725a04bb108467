mod common;

use std::sync::Arc;
use std::thread;

use eepcrawl::model::{transition, EepsiteRecord, InstanceId, LifecycleEvent, LifecycleLimits, Source, Status};
use eepcrawl::store::{daily_series, Store, StoreError, StoreOptions};

use common::*;

fn open(dir: &tempfile::TempDir) -> Store {
    Store::open(&dir.path().join("s.redb"), StoreOptions::default()).unwrap()
}

fn rec(host: &str, source: Source, owner: u32) -> EepsiteRecord {
    EepsiteRecord::new(id(host), source, 1_000, InstanceId(owner))
}

#[test]
fn records_and_queue_survive_reopening() {
    let dir = tempfile::tempdir().unwrap();
    let limits = LifecycleLimits::default();
    {
        let store = open(&dir);
        let s = store.session(InstanceId(1));
        for h in ["a.i2p", "b.i2p", "c.i2p"] {
            let r = s.insert_if_absent(&rec(h, Source::Seed, 1)).unwrap().unwrap();
            if h != "c.i2p" {
                s.upsert_record(&transition(&r, LifecycleEvent::ContactOk, &limits, 1_100).unwrap()).unwrap();
            }
        }
    }
    let store = Store::open_existing(&dir.path().join("s.redb"), StoreOptions::default()).unwrap();
    assert_eq!(store.record_count().unwrap(), 3);
    assert_eq!(store.queued(InstanceId(1)).unwrap(), vec![id("a.i2p"), id("b.i2p")]);
    let s = store.session(InstanceId(1));
    assert_eq!(s.dequeue_pending().unwrap(), Some(id("a.i2p")));
    assert_eq!(s.queue_len().unwrap(), 1);
    assert_eq!(store.session(InstanceId(0)).dequeue_pending().unwrap(), None);
}

#[test]
fn missing_store_is_not_created_by_open_existing() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("none.redb");
    assert!(matches!(
        Store::open_existing(&path, StoreOptions::default()),
        Err(StoreError::MissingStore(_))
    ));
    assert!(!path.exists());
}

#[test]
fn first_origin_wins() {
    let dir = tempfile::tempdir().unwrap();
    let store = open(&dir);
    let s = store.session(InstanceId(0));
    assert!(s.insert_if_absent(&rec("x.i2p", Source::Seed, 0)).unwrap().is_some());
    assert!(s.insert_if_absent(&rec("x.i2p", Source::Floodfill, 0)).unwrap().is_none());
    let mut relabeled = rec("x.i2p", Source::Discovered, 0);
    relabeled.status = Status::Discovering;
    let stored = s.upsert_record(&relabeled).unwrap();
    assert_eq!(stored.source, Source::Seed);
    assert_eq!(store.get(&id("x.i2p")).unwrap().unwrap().source, Source::Seed);
}

#[test]
fn other_instances_cannot_take_over_a_record() {
    let dir = tempfile::tempdir().unwrap();
    let store = open(&dir);
    store.session(InstanceId(0)).insert_if_absent(&rec("x.i2p", Source::Seed, 0)).unwrap();
    let err = store.session(InstanceId(1)).upsert_record(&rec("x.i2p", Source::Seed, 1)).unwrap_err();
    assert!(matches!(err, StoreError::OwnershipConflict { owner: InstanceId(0), .. }), "{err}");
}

#[test]
fn invalid_records_are_refused() {
    let dir = tempfile::tempdir().unwrap();
    let store = open(&dir);
    let mut r = rec("x.i2p", Source::Seed, 0);
    r.discovery_attempts = 10_000;
    assert!(matches!(
        store.session(InstanceId(0)).upsert_record(&r),
        Err(StoreError::InvalidRecord(_))
    ));
    assert_eq!(store.record_count().unwrap(), 0);
}

#[test]
fn concurrent_batches_never_duplicate() {
    let dir = tempfile::tempdir().unwrap();
    let store = Arc::new(open(&dir));
    let handles: Vec<_> = (0..16)
        .map(|t| {
            let store = store.clone();
            thread::spawn(move || {
                let s = store.session(InstanceId(t % 4));
                let batch: Vec<EepsiteRecord> =
                    (0..50).map(|k| rec(&format!("h{}.i2p", (k * 7 + t as usize) % 120), Source::Discovered, t % 4)).collect();
                s.insert_many_if_absent(&batch).unwrap().len()
            })
        })
        .collect();
    let inserted: usize = handles.into_iter().map(|h| h.join().unwrap()).sum();
    assert_eq!(inserted, 120);
    assert_eq!(store.record_count().unwrap(), 120);
}

#[test]
fn daily_series_counts_first_sightings_and_finishes() {
    let day = 86_400;
    let mut a = rec("a.i2p", Source::Seed, 0);
    a.first_seen = 10 * day;
    a.last_transition = 12 * day + 5;
    a.status = Status::Finished;
    let mut b = rec("b.i2p", Source::Seed, 0);
    b.first_seen = 10 * day + 50;
    b.last_transition = b.first_seen;
    let series = daily_series(&[a, b]);
    let observed: Vec<u64> = series.iter().map(|d| d.services_observed).collect();
    let finished: Vec<u64> = series.iter().map(|d| d.eepsites_finished).collect();
    assert_eq!(observed, [2, 0, 0]);
    assert_eq!(finished, [0, 0, 1]);
}
