//! The crawl loop of one or more instances.
//!
//! Each iteration happens at one clock instant: ingest seeds and floodfill
//! announcements, probe the due `DISCOVERING` records, then hand queued
//! records to spiders and feed their links back as `DISCOVERED` records.
//! Probes and crawls of an iteration run in parallel; their outcomes are
//! applied in a fixed order, so a simulated run is fully reproducible.
//! Between iterations the clock moves by one tick while work is queued and
//! otherwise jumps to the next due probe or announcement.
//!
//! Instances of a cluster share nothing but the store.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use rayon::ThreadPool;
use serde::Serialize;
use thiserror::Error;
use tracing::{debug, info, warn};

use crate::clock::{Clock, SimClock, SystemClock, Timeline};
use crate::config::{load_seeds, partition_seeds, ConfigError, CrawlConfig, DetectorChoice, TransportConfig};
use crate::discovery::{probe, DiscoverySchedule, DueQueue, ProbeLogLine};
use crate::model::{transition, EepsiteId, EepsiteRecord, InstanceId, LifecycleEvent, LifecycleLimits, Source, Status, Timestamp};
use crate::simnet::{SimNet, SimNetDetector, SimNetError, SimNetSpec};
use crate::spider::{crawl_site, CrawlLimits, FetchLogLine, LanguageDetector, StopwordDetector};
use crate::store::{Store, StoreError, StoreOptions, StoreSession};
use crate::transport::{FloodfillFeed, HostListFeed, NoFloodfill, ProxyTransport, SimTransport, Transport};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    SimNet(#[from] SimNetError),
    #[error("transport setup: {0}")]
    Transport(String),
    #[error("log output: {0}")]
    Log(#[from] io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RunSettings {
    pub limits: LifecycleLimits,
    pub schedule: DiscoverySchedule,
    pub crawl: CrawlLimits,
    pub max_ongoing_spiders: usize,
    pub seed_batch_size: usize,
    pub tick_secs: i64,
    pub horizon_secs: i64,
}

impl RunSettings {
    pub fn from_config(c: &CrawlConfig) -> Self {
        RunSettings {
            limits: c.lifecycle_limits(),
            schedule: c.schedule(),
            crawl: c.crawl_limits(),
            max_ongoing_spiders: c.max_ongoing_spiders,
            seed_batch_size: c.initial_seeds_batch_size,
            tick_secs: c.tick as i64,
            horizon_secs: c.horizon_days as i64 * 86_400,
        }
    }
}

impl Default for RunSettings {
    fn default() -> Self {
        RunSettings::from_config(&CrawlConfig::default())
    }
}

/// Everything an instance talks to besides the store.
#[derive(Clone)]
pub struct Services {
    pub transport: Arc<dyn Transport>,
    pub feed: Arc<dyn FloodfillFeed>,
    pub detector: Arc<dyn LanguageDetector>,
}

struct LogSink {
    probes: BufWriter<File>,
    fetches: BufWriter<File>,
}

impl LogSink {
    fn create(dir: &Path, instance: InstanceId) -> io::Result<LogSink> {
        fs::create_dir_all(dir)?;
        Ok(LogSink {
            probes: BufWriter::new(File::create(dir.join(format!("probes-{instance}.jsonl")))?),
            fetches: BufWriter::new(File::create(dir.join(format!("fetches-{instance}.jsonl")))?),
        })
    }

    fn line<T: Serialize>(w: &mut BufWriter<File>, value: &T) -> io::Result<()> {
        serde_json::to_writer(&mut *w, value)?;
        w.write_all(b"\n")
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct StepReport {
    pub new_records: usize,
    pub probes: usize,
    pub crawls: usize,
}

/// One crawler instance.
pub struct Instance {
    session: StoreSession,
    settings: RunSettings,
    services: Services,
    slot: usize,
    n_slots: usize,
    seeds: Vec<EepsiteId>,
    seeds_ingested: bool,
    feed_cursor: usize,
    due: DueQueue,
    resume: Vec<EepsiteId>,
    probe_pool: ThreadPool,
    spider_pool: ThreadPool,
    logs: Option<LogSink>,
}

fn pool(threads: usize, name: &'static str) -> ThreadPool {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .thread_name(move |i| format!("{name}-{i}"))
        .build()
        .expect("spawning worker threads")
}

impl Instance {
    /// `slot` of `n_slots` decides which floodfill announcements this
    /// instance ingests. Records already owned by the session are resumed.
    pub fn new(
        session: StoreSession,
        settings: RunSettings,
        services: Services,
        seeds: Vec<EepsiteId>,
        slot: usize,
        n_slots: usize,
        log_dir: Option<&Path>,
    ) -> Result<Instance, RunError> {
        let mut due = DueQueue::new();
        let mut resume = Vec::new();
        for r in session.owned_records()? {
            match r.status {
                Status::Discovering => due.insert(r.id, r.last_probe),
                Status::Ongoing => resume.push(r.id),
                _ => {}
            }
        }
        if seeds.len() > settings.seed_batch_size {
            warn!(
                "instance {}: using {} of {} assigned seeds",
                session.instance(),
                settings.seed_batch_size,
                seeds.len()
            );
        }
        let logs = log_dir.map(|d| LogSink::create(d, session.instance())).transpose()?;
        Ok(Instance {
            probe_pool: pool(settings.schedule.max_parallel_probes, "probe"),
            spider_pool: pool(settings.max_ongoing_spiders, "spider"),
            session,
            settings,
            services,
            slot,
            n_slots: n_slots.max(1),
            seeds,
            seeds_ingested: false,
            feed_cursor: 0,
            due,
            resume,
            logs,
        })
    }

    pub fn instance(&self) -> InstanceId {
        self.session.instance()
    }

    pub fn step(&mut self, now: Timestamp) -> Result<StepReport, RunError> {
        let mut report = StepReport::default();
        report.new_records += self.ingest(now)?;
        report.probes = self.run_probes(now)?;
        let (crawls, discovered) = self.run_spiders(now)?;
        report.crawls = crawls;
        report.new_records += discovered;
        Ok(report)
    }

    fn add_new(&mut self, ids: Vec<EepsiteId>, source: Source, now: Timestamp) -> Result<usize, RunError> {
        if ids.is_empty() {
            return Ok(0);
        }
        let batch: Vec<EepsiteRecord> = ids
            .into_iter()
            .map(|id| EepsiteRecord::new(id, source, now, self.instance()))
            .collect();
        let inserted = self.session.insert_many_if_absent(&batch)?;
        for r in &inserted {
            self.due.insert(r.id.clone(), r.last_probe);
        }
        Ok(inserted.len())
    }

    fn ingest(&mut self, now: Timestamp) -> Result<usize, RunError> {
        let mut added = 0;
        if !self.seeds_ingested {
            self.seeds_ingested = true;
            let seeds: Vec<EepsiteId> = self.seeds.iter().take(self.settings.seed_batch_size).cloned().collect();
            added += self.add_new(seeds, Source::Seed, now)?;
        }
        let fresh = self.services.feed.announced_since(self.feed_cursor, now);
        let mine: Vec<EepsiteId> = fresh
            .iter()
            .enumerate()
            .filter(|(k, _)| (self.feed_cursor + k) % self.n_slots == self.slot)
            .map(|(_, (id, _))| id.clone())
            .collect();
        self.feed_cursor += fresh.len();
        added += self.add_new(mine, Source::Floodfill, now)?;
        Ok(added)
    }

    /// Applies `event` to the stored record. Records that moved on in the
    /// meantime are skipped with a warning.
    fn apply(&self, id: &EepsiteId, event: LifecycleEvent, now: Timestamp) -> Result<Option<EepsiteRecord>, RunError> {
        let Some(record) = self.session.store().get(id)? else {
            warn!("{id}: record vanished before {event:?}");
            return Ok(None);
        };
        match transition(&record, event, &self.settings.limits, now) {
            Ok(next) => Ok(Some(self.session.upsert_record(&next)?)),
            Err(e) => {
                warn!("{id}: {e}");
                Ok(None)
            }
        }
    }

    fn run_probes(&mut self, now: Timestamp) -> Result<usize, RunError> {
        let schedule = self.settings.schedule;
        let ids = self.due.take_due(now, schedule.interval_secs, schedule.max_parallel_probes);
        if ids.is_empty() {
            return Ok(0);
        }
        let transport = &self.services.transport;
        let timeout = self.settings.crawl.request_timeout;
        let outcomes: Vec<_> = self
            .probe_pool
            .install(|| ids.par_iter().map(|id| probe(id, transport.as_ref(), timeout)).collect());
        for (id, outcome) in ids.iter().zip(outcomes) {
            let Some(next) = self.apply(id, outcome.event(), now)? else { continue };
            if let Some(logs) = &mut self.logs {
                LogSink::line(
                    &mut logs.probes,
                    &ProbeLogLine {
                        timestamp: now,
                        id: id.clone(),
                        outcome: outcome.event(),
                        reason: outcome.reason(),
                        attempt: next.discovery_attempts,
                    },
                )?;
            }
            if next.status == Status::Discovering {
                self.due.insert(id.clone(), next.last_probe);
            }
        }
        Ok(ids.len())
    }

    fn run_spiders(&mut self, now: Timestamp) -> Result<(usize, usize), RunError> {
        let mut batch: Vec<EepsiteId> = std::mem::take(&mut self.resume);
        while batch.len() < self.settings.max_ongoing_spiders {
            let Some(id) = self.session.dequeue_pending()? else { break };
            let Some(next) = self.apply(&id, LifecycleEvent::DequeueForCrawl, now)? else { continue };
            match next.status {
                Status::Ongoing => batch.push(id),
                Status::Discovering => self.due.insert(id, next.last_probe),
                _ => {}
            }
        }
        if batch.is_empty() {
            return Ok((0, 0));
        }
        let transport = &self.services.transport;
        let detector = &self.services.detector;
        let limits = self.settings.crawl;
        let outcomes: Vec<_> = self.spider_pool.install(|| {
            batch
                .par_iter()
                .map(|id| {
                    let mut log = Vec::new();
                    let result = crawl_site(id, transport.as_ref(), &limits, detector.as_ref(), now, &mut log);
                    (result, log)
                })
                .collect()
        });
        let mut discovered = 0;
        for (id, (result, log)) in batch.iter().zip(outcomes) {
            if let Some(logs) = &mut self.logs {
                for line in &log {
                    LogSink::line::<FetchLogLine>(&mut logs.fetches, line)?;
                }
            }
            match result {
                Ok(result) => {
                    self.session.put_result(&result)?;
                    self.apply(id, LifecycleEvent::CrawlOk, now)?;
                    discovered += self.add_new(result.out_links.into_iter().collect(), Source::Discovered, now)?;
                }
                Err(e) => {
                    debug!("{id}: crawl failed: {e}");
                    self.apply(id, LifecycleEvent::CrawlError, now)?;
                }
            }
        }
        Ok((batch.len(), discovered))
    }

    /// When this instance next has something to do, `None` if never.
    pub fn next_wakeup(&self, now: Timestamp) -> Result<Option<Timestamp>, RunError> {
        let tick = now + self.settings.tick_secs;
        if self.session.queue_len()? > 0 || !self.resume.is_empty() {
            return Ok(Some(tick));
        }
        let probe = self
            .due
            .next_due_time(self.settings.schedule.interval_secs)
            .map(|t| if t <= now { tick } else { t });
        let announce = self.services.feed.next_announcement_after(now);
        Ok(probe.into_iter().chain(announce).min())
    }

    fn flush_logs(&mut self) -> io::Result<()> {
        if let Some(logs) = &mut self.logs {
            logs.probes.flush()?;
            logs.fetches.flush()?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum StopReason {
    /// Nothing left to probe, crawl or ingest.
    Exhausted,
    Horizon,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RunSummary {
    pub start: Timestamp,
    pub end: Timestamp,
    pub iterations: u64,
    pub stop: StopReason,
    pub records: u64,
    pub status_counts: BTreeMap<Status, u64>,
}

impl RunSummary {
    pub fn count(&self, status: Status) -> u64 {
        self.status_counts.get(&status).copied().unwrap_or(0)
    }
}

/// Runs `instances` in lockstep on `timeline` until they run out of work
/// or `horizon_secs` have passed since the first iteration.
pub fn drive(instances: &mut [Instance], store: &Store, timeline: &dyn Timeline, horizon_secs: i64) -> Result<RunSummary, RunError> {
    let start = timeline.now();
    let end = start + horizon_secs;
    let mut iterations = 0;
    let stop = loop {
        let now = timeline.now();
        for inst in instances.iter_mut() {
            let r = inst.step(now)?;
            if r.probes + r.crawls + r.new_records > 0 {
                debug!("t={now} instance {}: {r:?}", inst.instance());
            }
        }
        iterations += 1;
        let mut next: Option<Timestamp> = None;
        for inst in instances.iter() {
            if let Some(t) = inst.next_wakeup(now)? {
                next = Some(next.map_or(t, |n| n.min(t)));
            }
        }
        match next {
            None => break StopReason::Exhausted,
            Some(t) if t > end => break StopReason::Horizon,
            Some(t) => timeline.wait_until(t.max(now + 1)),
        }
    };
    for inst in instances.iter_mut() {
        inst.flush_logs()?;
    }
    store.flush()?;
    let records = store.records()?;
    let mut status_counts = BTreeMap::new();
    for r in &records {
        *status_counts.entry(r.status).or_insert(0) += 1;
    }
    let summary = RunSummary {
        start,
        end: timeline.now(),
        iterations,
        stop,
        records: records.len() as u64,
        status_counts,
    };
    info!("run stopped ({:?}) after {iterations} iterations", summary.stop);
    Ok(summary)
}

/// Runs `n_instances` lockstep instances against a simulated net, seeded
/// with the net's seed sites.
pub fn run_simulation(
    net: Arc<SimNet>,
    store: &Store,
    settings: &RunSettings,
    n_instances: usize,
    detector: DetectorChoice,
    log_dir: Option<&Path>,
) -> Result<RunSummary, RunError> {
    let seeds = net.seeds();
    run_simulation_with_seeds(net, store, settings, &seeds, n_instances, None, detector, log_dir)
}

#[allow(clippy::too_many_arguments)]
fn run_simulation_with_seeds(
    net: Arc<SimNet>,
    store: &Store,
    settings: &RunSettings,
    seeds: &[EepsiteId],
    n_instances: usize,
    only: Option<usize>,
    detector: DetectorChoice,
    log_dir: Option<&Path>,
) -> Result<RunSummary, RunError> {
    // a resumed run picks up simulated time where the store left off
    let resume_at = store.records()?.iter().map(|r| r.last_transition).max();
    let clock = Arc::new(SimClock::new(resume_at.map_or(net.start_time(), |t| t.max(net.start_time()))));
    let transport = Arc::new(SimTransport::new(net.clone(), clock.clone()));
    let detector: Arc<dyn LanguageDetector> = match detector {
        DetectorChoice::Simnet => Arc::new(SimNetDetector::new(net.clone())),
        DetectorChoice::Stopword => Arc::new(StopwordDetector),
    };
    let services = Services {
        transport: transport.clone(),
        feed: transport,
        detector,
    };
    let mut instances = build_instances(store, settings, &services, seeds, n_instances, only, log_dir)?;
    drive(&mut instances, store, clock.as_ref(), settings.horizon_secs)
}

fn build_instances(
    store: &Store,
    settings: &RunSettings,
    services: &Services,
    seeds: &[EepsiteId],
    n_instances: usize,
    only: Option<usize>,
    log_dir: Option<&Path>,
) -> Result<Vec<Instance>, RunError> {
    partition_seeds(seeds, n_instances)
        .into_iter()
        .enumerate()
        .filter(|(i, _)| only.is_none_or(|o| o == *i))
        .map(|(i, batch)| {
            Instance::new(
                store.session(InstanceId(i as u32)),
                *settings,
                services.clone(),
                batch,
                i,
                n_instances,
                log_dir,
            )
        })
        .collect()
}

/// Runs a configured crawl. With `only = Some(k)` just instance `k` of the
/// configured `instances` runs; otherwise all of them, in lockstep.
pub fn run(config: &CrawlConfig, only: Option<u32>) -> Result<RunSummary, RunError> {
    config.validate()?;
    let seeds = load_seeds(&config.initial_seeds)?;
    let store = Store::open(
        &config.store,
        StoreOptions {
            durable_commits: false,
            limits: config.lifecycle_limits(),
        },
    )?;
    let settings = RunSettings::from_config(config);
    let n = config.instances as usize;
    let only = only.map(|k| k as usize);
    let log_dir: Option<PathBuf> = config.log_dir.clone();
    match &config.transport {
        TransportConfig::Simnet { spec } => {
            let net = Arc::new(SimNet::generate(&SimNetSpec::load(spec)?)?);
            run_simulation_with_seeds(net, &store, &settings, &seeds, n, only, config.detector, log_dir.as_deref())
        }
        TransportConfig::Proxy { proxy, hostlist } => {
            let clock = SystemClock;
            let transport = Arc::new(ProxyTransport::new(proxy).map_err(|e| RunError::Transport(e.to_string()))?);
            let feed: Arc<dyn FloodfillFeed> = match hostlist {
                Some(path) => Arc::new(HostListFeed::load(path, clock.now()).map_err(|e| RunError::Transport(format!("{}: {e}", path.display())))?),
                None => Arc::new(NoFloodfill),
            };
            let services = Services {
                transport,
                feed,
                detector: Arc::new(StopwordDetector),
            };
            let mut instances = build_instances(&store, &settings, &services, &seeds, n, only, log_dir.as_deref())?;
            drive(&mut instances, &store, &clock, settings.horizon_secs)
        }
    }
}
