//! Domain types shared by every part of the crawler and the eepsite lifecycle
//! state machine.
//!
//! An eepsite enters as `DISCOVERING`, becomes `PENDING` once a probe
//! reaches it, is crawled (`ONGOING`), and ends `FINISHED`. Probe
//! failures accumulate until the attempt or duration cap discards it;
//! crawl failures park it in `ERROR` and, after too many, send it back to
//! discovery.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use url::Url;

/// UTC epoch seconds.
pub type Timestamp = i64;

/// Identifier of a crawler instance sharing the central store.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct InstanceId(pub u32);

impl fmt::Display for InstanceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Normalized I2P hostname, e.g. `identiguy.i2p` or `<base32>.b32.i2p`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct EepsiteId(String);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum UrlRejection {
    #[error("not an I2P host: {0}")]
    NotI2p(String),
    #[error("malformed URL: {0}")]
    Malformed(String),
}

impl EepsiteId {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// `true` for `<base32>.b32.i2p` destinations.
    pub fn is_b32(&self) -> bool {
        self.0.ends_with(".b32.i2p")
    }

    /// Home page URL as seen through an HTTP proxy.
    pub fn home_url(&self) -> String {
        format!("http://{}/", self.0)
    }

    fn from_host(host: &str) -> Result<Self, UrlRejection> {
        let host = host.trim_end_matches('.').to_ascii_lowercase();
        let name = match host.strip_suffix(".i2p") {
            Some(name) => name,
            None => return Err(UrlRejection::NotI2p(host)),
        };
        if name.is_empty() || name == "b32" || name.split('.').any(str::is_empty) {
            return Err(UrlRejection::Malformed(host));
        }
        Ok(EepsiteId(host))
    }
}

impl fmt::Display for EepsiteId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for EepsiteId {
    type Err = UrlRejection;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        normalize_url(s)
    }
}

impl TryFrom<String> for EepsiteId {
    type Error = UrlRejection;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        normalize_url(&value)
    }
}

impl From<EepsiteId> for String {
    fn from(id: EepsiteId) -> Self {
        id.0
    }
}

/// Reduces a scraped or hand-written URL to its canonical eepsite host.
///
/// Accepts bare hosts (`forum.i2p`) as well as full `http`/`https` URLs;
/// scheme, port, credentials, path, query and fragment are dropped.
pub fn normalize_url(raw: &str) -> Result<EepsiteId, UrlRejection> {
    let trimmed = raw.trim();
    if trimmed.is_empty() {
        return Err(UrlRejection::Malformed(raw.to_string()));
    }
    let candidate = if trimmed.contains("://") {
        trimmed.to_string()
    } else {
        format!("http://{trimmed}")
    };
    let url = Url::parse(&candidate).map_err(|e| UrlRejection::Malformed(format!("{raw}: {e}")))?;
    match url.scheme() {
        "http" | "https" => {}
        other => return Err(UrlRejection::Malformed(format!("{raw}: unsupported scheme {other}"))),
    }
    let host = match url.host() {
        Some(url::Host::Domain(d)) => d.to_string(),
        Some(other) => return Err(UrlRejection::NotI2p(other.to_string())),
        None => return Err(UrlRejection::Malformed(raw.to_string())),
    };
    EepsiteId::from_host(&host)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Source {
    Seed,
    Floodfill,
    Discovered,
}

impl Source {
    pub const ALL: [Source; 3] = [Source::Seed, Source::Floodfill, Source::Discovered];

    pub fn as_str(self) -> &'static str {
        match self {
            Source::Seed => "SEED",
            Source::Floodfill => "FLOODFILL",
            Source::Discovered => "DISCOVERED",
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Status {
    Discovering,
    Pending,
    Ongoing,
    Error,
    Finished,
    Discarded,
}

impl Status {
    pub const ALL: [Status; 6] = [
        Status::Discovering,
        Status::Pending,
        Status::Ongoing,
        Status::Error,
        Status::Finished,
        Status::Discarded,
    ];

    pub fn is_terminal(self) -> bool {
        matches!(self, Status::Finished | Status::Discarded)
    }

    /// Statuses that sit in the crawl queue waiting for a spider.
    pub fn awaits_crawl(self) -> bool {
        matches!(self, Status::Pending | Status::Error)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Status::Discovering => "DISCOVERING",
            Status::Pending => "PENDING",
            Status::Ongoing => "ONGOING",
            Status::Error => "ERROR",
            Status::Finished => "FINISHED",
            Status::Discarded => "DISCARDED",
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum LifecycleEvent {
    ContactOk,
    ContactFail,
    DequeueForCrawl,
    CrawlOk,
    CrawlError,
}

impl LifecycleEvent {
    pub const ALL: [LifecycleEvent; 5] = [
        LifecycleEvent::ContactOk,
        LifecycleEvent::ContactFail,
        LifecycleEvent::DequeueForCrawl,
        LifecycleEvent::CrawlOk,
        LifecycleEvent::CrawlError,
    ];
}

/// Caps that bound how long an eepsite may stay in discovery and how many
/// crawls it gets before being sent back.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LifecycleLimits {
    pub max_discovery_attempts: u32,
    pub max_discovery_duration_secs: i64,
    pub max_crawling_attempts_on_error: u32,
}

impl Default for LifecycleLimits {
    fn default() -> Self {
        LifecycleLimits {
            max_discovery_attempts: 30 * 24,
            max_discovery_duration_secs: 30 * 24 * 60 * 60,
            max_crawling_attempts_on_error: 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EepsiteRecord {
    pub id: EepsiteId,
    pub source: Source,
    pub status: Status,
    pub discovery_attempts: u32,
    pub crawl_attempts: u32,
    pub first_seen: Timestamp,
    pub discovery_started: Timestamp,
    pub last_transition: Timestamp,
    /// Time of the most recent probe, `None` until the first one.
    pub last_probe: Option<Timestamp>,
    pub owner_instance: InstanceId,
}

impl EepsiteRecord {
    pub fn new(id: EepsiteId, source: Source, now: Timestamp, owner: InstanceId) -> Self {
        EepsiteRecord {
            id,
            source,
            status: Status::Discovering,
            discovery_attempts: 0,
            crawl_attempts: 0,
            first_seen: now,
            discovery_started: now,
            last_transition: now,
            last_probe: None,
            owner_instance: owner,
        }
    }

    /// Checks the invariants a stored record must satisfy.
    pub fn validate(&self, limits: &LifecycleLimits) -> Result<(), String> {
        if self.discovery_attempts > limits.max_discovery_attempts {
            return Err(format!(
                "{}: discovery_attempts {} exceeds cap {}",
                self.id, self.discovery_attempts, limits.max_discovery_attempts
            ));
        }
        if self.crawl_attempts > limits.max_crawling_attempts_on_error + 1 {
            return Err(format!(
                "{}: crawl_attempts {} exceeds cap {}",
                self.id,
                self.crawl_attempts,
                limits.max_crawling_attempts_on_error + 1
            ));
        }
        if self.last_transition < self.first_seen {
            return Err(format!("{}: last_transition precedes first_seen", self.id));
        }
        if self.discovery_started < self.first_seen {
            return Err(format!("{}: discovery_started precedes first_seen", self.id));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("illegal transition: {event:?} in status {status}")]
pub struct IllegalTransition {
    pub status: Status,
    pub event: LifecycleEvent,
}

/// Applies one lifecycle event. Pure: the result depends only on the
/// arguments, with `now` supplied by whatever clock the caller uses.
pub fn transition(
    record: &EepsiteRecord,
    event: LifecycleEvent,
    limits: &LifecycleLimits,
    now: Timestamp,
) -> Result<EepsiteRecord, IllegalTransition> {
    use LifecycleEvent as E;
    use Status as S;

    let illegal = || IllegalTransition {
        status: record.status,
        event,
    };
    let now = now.max(record.last_transition);
    let mut next = record.clone();
    next.last_transition = now;

    match (record.status, event) {
        (S::Discovering, E::ContactOk) => {
            // the successful probe counts as an attempt too
            next.discovery_attempts = bump(record.discovery_attempts, limits.max_discovery_attempts);
            next.last_probe = Some(now);
            next.status = S::Pending;
        }
        (S::Discovering, E::ContactFail) => {
            next.discovery_attempts = bump(record.discovery_attempts, limits.max_discovery_attempts);
            next.last_probe = Some(now);
            let attempts_exhausted = next.discovery_attempts >= limits.max_discovery_attempts;
            let duration_exhausted =
                now - record.discovery_started > limits.max_discovery_duration_secs;
            if attempts_exhausted || duration_exhausted {
                next.status = S::Discarded;
            }
        }
        (S::Pending, E::DequeueForCrawl) => next.status = S::Ongoing,
        (S::Ongoing, E::CrawlOk) => next.status = S::Finished,
        (S::Ongoing, E::CrawlError) => {
            next.crawl_attempts = record.crawl_attempts + 1;
            next.status = S::Error;
        }
        (S::Error, E::DequeueForCrawl) => {
            if record.crawl_attempts <= limits.max_crawling_attempts_on_error {
                next.status = S::Ongoing;
            } else {
                next.status = S::Discovering;
                next.crawl_attempts = 0;
                next.discovery_started = now;
            }
        }
        _ => return Err(illegal()),
    }
    Ok(next)
}

fn bump(attempts: u32, cap: u32) -> u32 {
    attempts.saturating_add(1).min(cap)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn id(s: &str) -> EepsiteId {
        normalize_url(s).unwrap()
    }

    fn fresh() -> EepsiteRecord {
        EepsiteRecord::new(id("a.i2p"), Source::Seed, 1_000, InstanceId(0))
    }

    #[test]
    fn normalize_strips_path_and_scheme() {
        assert_eq!(id("http://identiguy.i2p/list").as_str(), "identiguy.i2p");
        assert_eq!(id("HTTP://Forum.I2P:80/").as_str(), "forum.i2p");
        assert_eq!(id("  stats.i2p  ").as_str(), "stats.i2p");
        assert_eq!(id("https://u:p@x.b32.i2p/a?b=c#d").as_str(), "x.b32.i2p");
    }

    #[test]
    fn normalize_rejects_non_darknet_hosts() {
        assert!(matches!(
            normalize_url("http://example.com/page"),
            Err(UrlRejection::NotI2p(_))
        ));
        assert!(matches!(normalize_url("http://10.0.0.1/"), Err(UrlRejection::NotI2p(_))));
        assert!(matches!(normalize_url(""), Err(UrlRejection::Malformed(_))));
        assert!(matches!(normalize_url("http://.i2p/"), Err(UrlRejection::Malformed(_))));
        assert!(matches!(normalize_url("http://b32.i2p/"), Err(UrlRejection::Malformed(_))));
        assert!(matches!(normalize_url("ftp://files.i2p/"), Err(UrlRejection::Malformed(_))));
        assert!(matches!(normalize_url("http://[::1"), Err(UrlRejection::Malformed(_))));
    }

    #[test]
    fn id_serde_goes_through_normalization() {
        let parsed: EepsiteId = serde_json::from_str("\"Forum.I2P\"").unwrap();
        assert_eq!(parsed.as_str(), "forum.i2p");
        assert!(serde_json::from_str::<EepsiteId>("\"example.com\"").is_err());
    }

    #[test]
    fn contact_ok_moves_to_pending() {
        let limits = LifecycleLimits::default();
        let next = transition(&fresh(), LifecycleEvent::ContactOk, &limits, 1_010).unwrap();
        assert_eq!(next.status, Status::Pending);
        assert_eq!(next.discovery_attempts, 1);
        assert_eq!(next.last_probe, Some(1_010));
    }

    #[test]
    fn terminal_states_reject_everything() {
        let limits = LifecycleLimits::default();
        for terminal in [Status::Finished, Status::Discarded] {
            let mut rec = fresh();
            rec.status = terminal;
            for event in LifecycleEvent::ALL {
                let err = transition(&rec, event, &limits, 2_000).unwrap_err();
                assert_eq!(err.status, terminal);
            }
        }
    }

    #[test]
    fn discard_after_attempt_cap() {
        let limits = LifecycleLimits::default();
        let mut rec = fresh();
        for i in 1..=720 {
            rec = transition(&rec, LifecycleEvent::ContactFail, &limits, 1_000 + i * 3_600 - 3_600)
                .unwrap();
            if i < 720 {
                assert_eq!(rec.status, Status::Discovering, "attempt {i}");
            }
        }
        assert_eq!(rec.status, Status::Discarded);
        assert_eq!(rec.discovery_attempts, 720);
    }

    #[test]
    fn discard_after_duration_cap() {
        let limits = LifecycleLimits {
            max_discovery_attempts: 1_000,
            max_discovery_duration_secs: 100,
            max_crawling_attempts_on_error: 2,
        };
        let rec = transition(&fresh(), LifecycleEvent::ContactFail, &limits, 1_100).unwrap();
        assert_eq!(rec.status, Status::Discovering);
        let rec = transition(&rec, LifecycleEvent::ContactFail, &limits, 1_101).unwrap();
        assert_eq!(rec.status, Status::Discarded);
    }

    #[test]
    fn crawl_errors_eventually_return_to_discovery() {
        let limits = LifecycleLimits::default();
        let mut rec = transition(&fresh(), LifecycleEvent::ContactOk, &limits, 1_000).unwrap();
        rec = transition(&rec, LifecycleEvent::DequeueForCrawl, &limits, 1_000).unwrap();
        for attempt in 1..=3 {
            rec = transition(&rec, LifecycleEvent::CrawlError, &limits, 1_000).unwrap();
            assert_eq!(rec.status, Status::Error);
            assert_eq!(rec.crawl_attempts, attempt);
            rec = transition(&rec, LifecycleEvent::DequeueForCrawl, &limits, 2_000 + attempt as i64)
                .unwrap();
        }
        assert_eq!(rec.status, Status::Discovering);
        assert_eq!(rec.crawl_attempts, 0);
        assert_eq!(rec.discovery_attempts, 1);
        assert_eq!(rec.discovery_started, 2_003);
    }

    #[test]
    fn clock_going_backwards_keeps_timestamps_monotone() {
        let limits = LifecycleLimits::default();
        let rec = transition(&fresh(), LifecycleEvent::ContactFail, &limits, 10).unwrap();
        assert_eq!(rec.last_transition, 1_000);
        assert!(rec.validate(&limits).is_ok());
    }
}
