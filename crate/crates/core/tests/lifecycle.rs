use std::collections::{BTreeSet, VecDeque};

use proptest::prelude::*;

use eepcrawl::model::{
    normalize_url, transition, EepsiteRecord, InstanceId, LifecycleEvent, LifecycleLimits, Source, Status, Timestamp,
};

fn event() -> impl Strategy<Value = LifecycleEvent> {
    prop::sample::select(LifecycleEvent::ALL.to_vec())
}

fn small_limits() -> impl Strategy<Value = LifecycleLimits> {
    (1u32..20, 1i64..100_000, 0u32..4).prop_map(|(a, d, c)| LifecycleLimits {
        max_discovery_attempts: a,
        max_discovery_duration_secs: d,
        max_crawling_attempts_on_error: c,
    })
}

fn fresh(t: Timestamp) -> EepsiteRecord {
    EepsiteRecord::new("a.i2p".parse().unwrap(), Source::Floodfill, t, InstanceId(3))
}

proptest! {
    #[test]
    fn random_histories_keep_invariants(
        limits in small_limits(),
        steps in prop::collection::vec((event(), 0i64..5_000), 0..200),
    ) {
        let mut r = fresh(0);
        let mut now = 0;
        for (e, dt) in steps {
            now += dt;
            match transition(&r, e, &limits, now) {
                Ok(next) => {
                    prop_assert!(!r.status.is_terminal());
                    prop_assert!(next.validate(&limits).is_ok(), "{:?}", next);
                    prop_assert_eq!(&next, &transition(&r, e, &limits, now).unwrap());
                    prop_assert_eq!(next.source, r.source);
                    prop_assert_eq!(next.owner_instance, r.owner_instance);
                    prop_assert!(next.discovery_attempts >= r.discovery_attempts);
                    let rediscovered = r.status == Status::Error && next.status == Status::Discovering;
                    if next.crawl_attempts < r.crawl_attempts {
                        prop_assert!(rediscovered);
                        prop_assert_eq!(next.crawl_attempts, 0);
                    }
                    if rediscovered {
                        prop_assert_eq!(next.discovery_started, now);
                    }
                    r = next;
                }
                Err(err) => {
                    prop_assert_eq!(err.status, r.status);
                }
            }
        }
    }

    #[test]
    fn repeated_failures_always_discard(limits in small_limits(), dt in 1i64..10_000) {
        let mut r = fresh(0);
        let mut n = 0;
        while r.status == Status::Discovering {
            n += 1;
            r = transition(&r, LifecycleEvent::ContactFail, &limits, n * dt).unwrap();
        }
        prop_assert_eq!(r.status, Status::Discarded);
        prop_assert!(n as u32 <= limits.max_discovery_attempts);
    }

    #[test]
    fn normalization_is_idempotent(host in "[a-zA-Z0-9-]{1,20}(\\.[a-zA-Z0-9]{1,8})?", path in "(/[a-z0-9]{0,5}){0,3}") {
        let raw = format!("http://{host}.I2P:8080{path}?q=1#frag");
        let id = normalize_url(&raw).unwrap();
        prop_assert_eq!(id.as_str(), id.as_str().to_lowercase());
        prop_assert!(id.as_str().ends_with(".i2p"));
        prop_assert_eq!(normalize_url(id.as_str()).unwrap(), id.clone());
        prop_assert_eq!(normalize_url(&id.home_url()).unwrap(), id);
    }
}

#[test]
fn every_status_is_reachable_from_discovering() {
    let limits = LifecycleLimits {
        max_discovery_attempts: 3,
        ..LifecycleLimits::default()
    };
    let mut seen = BTreeSet::new();
    let mut queue = VecDeque::from([fresh(0)]);
    let mut visited = BTreeSet::new();
    while let Some(r) = queue.pop_front() {
        seen.insert(r.status);
        for e in LifecycleEvent::ALL {
            if let Ok(next) = transition(&r, e, &limits, 10) {
                let key = (next.status, next.discovery_attempts, next.crawl_attempts);
                if visited.insert(key) {
                    queue.push_back(next);
                }
            }
        }
    }
    assert_eq!(seen, Status::ALL.into_iter().collect());
}

#[test]
fn duration_cap_discards_on_the_next_failure() {
    let limits = LifecycleLimits::default();
    let r = fresh(0);
    let r = transition(&r, LifecycleEvent::ContactFail, &limits, limits.max_discovery_duration_secs).unwrap();
    assert_eq!(r.status, Status::Discovering);
    let r = transition(&r, LifecycleEvent::ContactFail, &limits, limits.max_discovery_duration_secs + 1).unwrap();
    assert_eq!(r.status, Status::Discarded);
    assert_eq!(r.discovery_attempts, 2);
}

#[test]
fn crawl_errors_send_a_site_back_to_discovery_after_the_retry_budget() {
    use LifecycleEvent::*;
    let limits = LifecycleLimits::default();
    let mut r = transition(&fresh(0), ContactOk, &limits, 1).unwrap();
    r = transition(&r, DequeueForCrawl, &limits, 2).unwrap();
    for round in 1..=3 {
        r = transition(&r, CrawlError, &limits, 3).unwrap();
        assert_eq!((r.status, r.crawl_attempts), (Status::Error, round));
        r = transition(&r, DequeueForCrawl, &limits, 4).unwrap();
    }
    assert_eq!(r.status, Status::Discovering);
    assert_eq!(r.crawl_attempts, 0);
    assert_eq!(r.discovery_attempts, 1);
    assert_eq!(r.discovery_started, 4);
}
