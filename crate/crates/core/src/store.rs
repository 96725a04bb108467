//! Central persistence shared by crawler instances: eepsite records, crawl
//! results and the FIFO crawl queue, in one embedded redb file.
//!
//! Every operation is one redb transaction, and redb serializes writers, so
//! concurrent sessions see each other's operations in a single total order.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::{DateTime, NaiveDate};
use redb::{Database, Durability, ReadableDatabase, ReadableTable, ReadableTableMetadata, TableDefinition};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{EepsiteId, EepsiteRecord, InstanceId, LifecycleLimits, Source, Status, Timestamp};
use crate::spider::CrawlResult;

pub const SCHEMA_VERSION: u64 = 1;

const RECORDS: TableDefinition<&str, &[u8]> = TableDefinition::new("records");
const RESULTS: TableDefinition<&str, &[u8]> = TableDefinition::new("results");
const QUEUE: TableDefinition<(u32, u64), &str> = TableDefinition::new("queue");
const META: TableDefinition<&str, u64> = TableDefinition::new("meta");

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("store not found at {0}")]
    MissingStore(PathBuf),
    #[error("{id} is owned by instance {owner}")]
    OwnershipConflict { id: EepsiteId, owner: InstanceId },
    #[error("invalid record: {0}")]
    InvalidRecord(String),
    #[error("store schema version {found}, expected {expected}")]
    SchemaMismatch { found: u64, expected: u64 },
    #[error("corrupt entry: {0}")]
    Corrupt(String),
    #[error("storage backend: {0}")]
    Backend(#[from] redb::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

macro_rules! backend_error {
    ($($t:ty),*) => {
        $(impl From<$t> for StoreError {
            fn from(e: $t) -> Self {
                StoreError::Backend(e.into())
            }
        })*
    };
}

backend_error!(
    redb::DatabaseError,
    redb::TransactionError,
    redb::TableError,
    redb::StorageError,
    redb::CommitError,
    redb::SetDurabilityError
);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StoreOptions {
    /// fsync every commit. When off, commits are visible at once but only
    /// reach disk on [`Store::flush`] or when the store is dropped.
    pub durable_commits: bool,
    pub limits: LifecycleLimits,
}

impl Default for StoreOptions {
    fn default() -> Self {
        StoreOptions {
            durable_commits: false,
            limits: LifecycleLimits::default(),
        }
    }
}

struct Inner {
    db: Database,
    path: PathBuf,
    options: StoreOptions,
}

impl Drop for Inner {
    fn drop(&mut self) {
        if let Err(e) = flush_db(&self.db) {
            tracing::warn!("flushing {} on close failed: {e}", self.path.display());
        }
    }
}

fn flush_db(db: &Database) -> Result<(), StoreError> {
    let mut txn = db.begin_write()?;
    txn.set_durability(Durability::Immediate)?;
    txn.commit()?;
    Ok(())
}

/// Handle to a store file; cheap to clone and share between threads.
#[derive(Clone)]
pub struct Store {
    inner: Arc<Inner>,
}

fn encode<T: Serialize>(value: &T) -> Vec<u8> {
    serde_json::to_vec(value).expect("plain data serializes")
}

fn decode<T: for<'de> Deserialize<'de>>(bytes: &[u8]) -> Result<T, StoreError> {
    serde_json::from_slice(bytes).map_err(|e| StoreError::Corrupt(e.to_string()))
}

impl Store {
    /// Opens `path`, creating an empty store if the file does not exist.
    pub fn open(path: &Path, options: StoreOptions) -> Result<Store, StoreError> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent)?;
        }
        let db = Database::create(path)?;
        let txn = db.begin_write()?;
        {
            let mut meta = txn.open_table(META)?;
            let found = meta.get("schema_version")?.map(|v| v.value());
            match found {
                None => {
                    meta.insert("schema_version", SCHEMA_VERSION)?;
                }
                Some(v) if v != SCHEMA_VERSION => {
                    return Err(StoreError::SchemaMismatch {
                        found: v,
                        expected: SCHEMA_VERSION,
                    })
                }
                Some(_) => {}
            }
            txn.open_table(RECORDS)?;
            txn.open_table(RESULTS)?;
            txn.open_table(QUEUE)?;
        }
        txn.commit()?;
        Ok(Store {
            inner: Arc::new(Inner {
                db,
                path: path.to_path_buf(),
                options,
            }),
        })
    }

    /// Opens an existing store; [`StoreError::MissingStore`] otherwise.
    pub fn open_existing(path: &Path, options: StoreOptions) -> Result<Store, StoreError> {
        if !path.is_file() {
            return Err(StoreError::MissingStore(path.to_path_buf()));
        }
        Store::open(path, options)
    }

    pub fn path(&self) -> &Path {
        &self.inner.path
    }

    pub fn session(&self, instance: InstanceId) -> StoreSession {
        StoreSession {
            store: self.clone(),
            instance,
        }
    }

    /// Forces every earlier commit to disk.
    pub fn flush(&self) -> Result<(), StoreError> {
        flush_db(&self.inner.db)
    }

    fn begin_write(&self) -> Result<redb::WriteTransaction, StoreError> {
        let mut txn = self.inner.db.begin_write()?;
        if !self.inner.options.durable_commits {
            txn.set_durability(Durability::None)?;
        }
        Ok(txn)
    }

    pub fn get(&self, id: &EepsiteId) -> Result<Option<EepsiteRecord>, StoreError> {
        let txn = self.inner.db.begin_read()?;
        let table = txn.open_table(RECORDS)?;
        let found = table.get(id.as_str())?;
        found.map(|v| decode(v.value())).transpose()
    }

    pub fn record_count(&self) -> Result<u64, StoreError> {
        let txn = self.inner.db.begin_read()?;
        Ok(txn.open_table(RECORDS)?.len()?)
    }

    /// All records, ordered by id.
    pub fn records(&self) -> Result<Vec<EepsiteRecord>, StoreError> {
        let txn = self.inner.db.begin_read()?;
        let table = txn.open_table(RECORDS)?;
        let mut out = Vec::with_capacity(table.len()? as usize);
        for entry in table.iter()? {
            let (_, v) = entry?;
            out.push(decode(v.value())?);
        }
        Ok(out)
    }

    /// All crawl results, ordered by id.
    pub fn results(&self) -> Result<Vec<CrawlResult>, StoreError> {
        let txn = self.inner.db.begin_read()?;
        let table = txn.open_table(RESULTS)?;
        let mut out = Vec::new();
        for entry in table.iter()? {
            let (_, v) = entry?;
            out.push(decode(v.value())?);
        }
        Ok(out)
    }

    pub fn result(&self, id: &EepsiteId) -> Result<Option<CrawlResult>, StoreError> {
        let txn = self.inner.db.begin_read()?;
        let table = txn.open_table(RESULTS)?;
        let found = table.get(id.as_str())?;
        found.map(|v| decode(v.value())).transpose()
    }

    /// Queued ids of `instance` in FIFO order, stale entries included.
    pub fn queued(&self, instance: InstanceId) -> Result<Vec<EepsiteId>, StoreError> {
        let txn = self.inner.db.begin_read()?;
        let table = txn.open_table(QUEUE)?;
        let mut out = Vec::new();
        for entry in table.range((instance.0, 0)..=(instance.0, u64::MAX))? {
            let (_, v) = entry?;
            out.push(v.value().parse().map_err(|e| StoreError::Corrupt(format!("{e}")))?);
        }
        Ok(out)
    }

    pub fn aggregate_source_status(&self) -> Result<StatusAggregate, StoreError> {
        Ok(StatusAggregate::from_records(&self.records()?))
    }

    pub fn daily_series(&self) -> Result<Vec<DailyPoint>, StoreError> {
        Ok(daily_series(&self.records()?))
    }
}

/// One instance's view of the store.
#[derive(Clone)]
pub struct StoreSession {
    store: Store,
    instance: InstanceId,
}

/// Whether `next` entering the store should put it in the crawl queue.
fn needs_enqueue(previous: Option<Status>, next: Status) -> bool {
    next.awaits_crawl() && previous != Some(next)
}

impl StoreSession {
    pub fn instance(&self) -> InstanceId {
        self.instance
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    /// Inserts a new record owned by this session, or updates it if this
    /// session already owns it. The stored source never changes.
    pub fn upsert_record(&self, record: &EepsiteRecord) -> Result<EepsiteRecord, StoreError> {
        record
            .validate(&self.store.inner.options.limits)
            .map_err(StoreError::InvalidRecord)?;
        let txn = self.store.begin_write()?;
        let stored = {
            let mut records = txn.open_table(RECORDS)?;
            let existing: Option<EepsiteRecord> = {
                let found = records.get(record.id.as_str())?;
                found.map(|v| decode(v.value())).transpose()?
            };
            let mut stored = record.clone();
            match &existing {
                None => stored.owner_instance = self.instance,
                Some(old) if old.owner_instance != self.instance => {
                    return Err(StoreError::OwnershipConflict {
                        id: record.id.clone(),
                        owner: old.owner_instance,
                    })
                }
                Some(old) => {
                    stored.source = old.source;
                    stored.owner_instance = old.owner_instance;
                }
            }
            records.insert(stored.id.as_str(), encode(&stored).as_slice())?;
            if needs_enqueue(existing.as_ref().map(|r| r.status), stored.status) {
                enqueue(&txn, self.instance, &stored.id)?;
            }
            stored
        };
        txn.commit()?;
        Ok(stored)
    }

    /// Inserts `record` under this session's ownership unless the id is
    /// already known. Returns the stored record when inserted.
    pub fn insert_if_absent(&self, record: &EepsiteRecord) -> Result<Option<EepsiteRecord>, StoreError> {
        Ok(self.insert_many_if_absent(std::slice::from_ref(record))?.pop())
    }

    /// Batch form of [`StoreSession::insert_if_absent`] in one transaction;
    /// returns the records that were inserted, in input order.
    pub fn insert_many_if_absent(&self, batch: &[EepsiteRecord]) -> Result<Vec<EepsiteRecord>, StoreError> {
        let limits = self.store.inner.options.limits;
        for r in batch {
            r.validate(&limits).map_err(StoreError::InvalidRecord)?;
        }
        let txn = self.store.begin_write()?;
        let mut inserted = Vec::new();
        {
            let mut records = txn.open_table(RECORDS)?;
            for r in batch {
                if records.get(r.id.as_str())?.is_some() {
                    continue;
                }
                let mut stored = r.clone();
                stored.owner_instance = self.instance;
                records.insert(stored.id.as_str(), encode(&stored).as_slice())?;
                if needs_enqueue(None, stored.status) {
                    enqueue(&txn, self.instance, &stored.id)?;
                }
                inserted.push(stored);
            }
        }
        txn.commit()?;
        Ok(inserted)
    }

    /// Pops the oldest queued record of this instance that still awaits a
    /// crawl. Entries whose record moved on since enqueueing are dropped.
    pub fn dequeue_pending(&self) -> Result<Option<EepsiteId>, StoreError> {
        let txn = self.store.begin_write()?;
        let popped = {
            let mut queue = txn.open_table(QUEUE)?;
            let records = txn.open_table(RECORDS)?;
            let mut popped = None;
            loop {
                let head = {
                    let mut range = queue.range((self.instance.0, 0)..=(self.instance.0, u64::MAX))?;
                    match range.next() {
                        None => None,
                        Some(entry) => {
                            let (k, v) = entry?;
                            Some((k.value(), v.value().to_string()))
                        }
                    }
                };
                let Some((key, id)) = head else { break };
                queue.remove(key)?;
                let live = match records.get(id.as_str())? {
                    Some(v) => {
                        let r: EepsiteRecord = decode(v.value())?;
                        r.status.awaits_crawl() && r.owner_instance == self.instance
                    }
                    None => false,
                };
                if live {
                    popped = Some(id.parse().map_err(|e| StoreError::Corrupt(format!("{e}")))?);
                    break;
                }
            }
            popped
        };
        txn.commit()?;
        Ok(popped)
    }

    pub fn queue_len(&self) -> Result<usize, StoreError> {
        let txn = self.store.inner.db.begin_read()?;
        let table = txn.open_table(QUEUE)?;
        Ok(table.range((self.instance.0, 0)..=(self.instance.0, u64::MAX))?.count())
    }

    pub fn put_result(&self, result: &CrawlResult) -> Result<(), StoreError> {
        let txn = self.store.begin_write()?;
        txn.open_table(RESULTS)?
            .insert(result.id.as_str(), encode(result).as_slice())?;
        txn.commit()?;
        Ok(())
    }

    /// Records owned by this session, ordered by id.
    pub fn owned_records(&self) -> Result<Vec<EepsiteRecord>, StoreError> {
        Ok(self
            .store
            .records()?
            .into_iter()
            .filter(|r| r.owner_instance == self.instance)
            .collect())
    }
}

fn enqueue(txn: &redb::WriteTransaction, instance: InstanceId, id: &EepsiteId) -> Result<(), StoreError> {
    let mut meta = txn.open_table(META)?;
    let seq = meta.get("next_seq")?.map(|v| v.value()).unwrap_or(0);
    meta.insert("next_seq", seq + 1)?;
    txn.open_table(QUEUE)?.insert((instance.0, seq), id.as_str())?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub source: Source,
    pub status: Status,
    pub count: u64,
    pub pct_within_source: f64,
    pub pct_of_total: f64,
}

/// Record counts by source and status, with percentages rounded to two
/// decimals. Every supplied cell gets a row, empty ones included.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatusAggregate {
    pub rows: Vec<AggregateRow>,
    pub total: u64,
}

impl StatusAggregate {
    pub fn from_records<'a>(records: impl IntoIterator<Item = &'a EepsiteRecord>) -> StatusAggregate {
        StatusAggregate::from_counts(records.into_iter().map(|r| (r.source, r.status, 1)))
    }

    pub fn from_counts(cells: impl IntoIterator<Item = (Source, Status, u64)>) -> StatusAggregate {
        let mut counts: BTreeMap<(Source, usize), u64> = BTreeMap::new();
        for (source, status, c) in cells {
            let rank = Status::ALL.iter().position(|&s| s == status).expect("listed");
            *counts.entry((source, rank)).or_default() += c;
        }
        let total: u64 = counts.values().sum();
        let mut per_source: BTreeMap<Source, u64> = BTreeMap::new();
        for ((source, _), c) in &counts {
            *per_source.entry(*source).or_default() += c;
        }
        let pct = |part: u64, whole: u64| if whole == 0 { 0.0 } else { round2(100.0 * part as f64 / whole as f64) };
        let rows = counts
            .into_iter()
            .map(|((source, rank), count)| AggregateRow {
                source,
                status: Status::ALL[rank],
                count,
                pct_within_source: pct(count, per_source[&source]),
                pct_of_total: pct(count, total),
            })
            .collect();
        StatusAggregate { rows, total }
    }

    pub fn row(&self, source: Source, status: Status) -> Option<&AggregateRow> {
        self.rows.iter().find(|r| r.source == source && r.status == status)
    }

    pub fn source_total(&self, source: Source) -> u64 {
        self.rows.iter().filter(|r| r.source == source).map(|r| r.count).sum()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), StoreError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["source", "status", "count", "pct_within_source", "pct_of_total"])?;
        for r in &self.rows {
            w.write_record([
                r.source.as_str().to_string(),
                r.status.as_str().to_string(),
                r.count.to_string(),
                format!("{:.2}", r.pct_within_source),
                format!("{:.2}", r.pct_of_total),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DailyPoint {
    pub date: NaiveDate,
    pub services_observed: u64,
    pub eepsites_finished: u64,
}

pub fn utc_day(t: Timestamp) -> NaiveDate {
    DateTime::from_timestamp(t, 0)
        .map(|d| d.date_naive())
        .unwrap_or(NaiveDate::MIN)
}

/// Services by UTC day of first sighting and eepsites by UTC day of
/// finishing, with zero-filled gaps between the first and last active day.
pub fn daily_series<'a>(records: impl IntoIterator<Item = &'a EepsiteRecord>) -> Vec<DailyPoint> {
    let mut days: BTreeMap<NaiveDate, (u64, u64)> = BTreeMap::new();
    for r in records {
        days.entry(utc_day(r.first_seen)).or_default().0 += 1;
        if r.status == Status::Finished {
            days.entry(utc_day(r.last_transition)).or_default().1 += 1;
        }
    }
    let (Some((&first, _)), Some((&last, _))) = (days.first_key_value(), days.last_key_value()) else {
        return Vec::new();
    };
    first
        .iter_days()
        .take_while(|d| *d <= last)
        .map(|date| {
            let (s, f) = days.get(&date).copied().unwrap_or_default();
            DailyPoint {
                date,
                services_observed: s,
                eepsites_finished: f,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn open() -> (tempfile::TempDir, Store) {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(&dir.path().join("crawl.redb"), StoreOptions::default()).unwrap();
        (dir, store)
    }

    fn rec(host: &str, source: Source, status: Status) -> EepsiteRecord {
        let mut r = EepsiteRecord::new(host.parse().unwrap(), source, 1_000, InstanceId(0));
        r.status = status;
        r
    }

    #[test]
    fn new_ids_are_claimed_by_the_writer() {
        let (_d, store) = open();
        let a = store.session(InstanceId(7));
        let stored = a.upsert_record(&rec("x.i2p", Source::Seed, Status::Discovering)).unwrap();
        assert_eq!(stored.owner_instance, InstanceId(7));
    }

    #[test]
    fn first_origin_wins() {
        let (_d, store) = open();
        let a = store.session(InstanceId(0));
        let b = store.session(InstanceId(1));
        a.upsert_record(&rec("x.i2p", Source::Seed, Status::Discovering)).unwrap();
        let err = b.upsert_record(&rec("x.i2p", Source::Floodfill, Status::Discovering));
        assert!(matches!(err, Err(StoreError::OwnershipConflict { owner: InstanceId(0), .. })));
        let updated = a.upsert_record(&rec("x.i2p", Source::Floodfill, Status::Pending)).unwrap();
        assert_eq!(updated.source, Source::Seed);
        assert_eq!(store.get(&"x.i2p".parse().unwrap()).unwrap().unwrap().source, Source::Seed);
        assert_eq!(b.insert_if_absent(&rec("x.i2p", Source::Floodfill, Status::Discovering)).unwrap(), None);
    }

    #[test]
    fn invalid_records_are_refused() {
        let (_d, store) = open();
        let mut r = rec("x.i2p", Source::Seed, Status::Discovering);
        r.discovery_attempts = 10_000;
        assert!(matches!(store.session(InstanceId(0)).upsert_record(&r), Err(StoreError::InvalidRecord(_))));
    }

    #[test]
    fn queue_is_fifo_and_per_instance() {
        let (_d, store) = open();
        let s = store.session(InstanceId(0));
        let other = store.session(InstanceId(1));
        for h in ["a.i2p", "b.i2p", "c.i2p"] {
            s.upsert_record(&rec(h, Source::Seed, Status::Pending)).unwrap();
        }
        assert_eq!(other.dequeue_pending().unwrap(), None);
        let got: Vec<String> = (0..3).map(|_| s.dequeue_pending().unwrap().unwrap().to_string()).collect();
        assert_eq!(got, ["a.i2p", "b.i2p", "c.i2p"]);
        assert_eq!(s.dequeue_pending().unwrap(), None);
    }

    #[test]
    fn stale_queue_entries_are_skipped() {
        let (_d, store) = open();
        let s = store.session(InstanceId(0));
        s.upsert_record(&rec("a.i2p", Source::Seed, Status::Pending)).unwrap();
        s.upsert_record(&rec("b.i2p", Source::Seed, Status::Pending)).unwrap();
        s.upsert_record(&rec("a.i2p", Source::Seed, Status::Ongoing)).unwrap();
        assert_eq!(s.dequeue_pending().unwrap().unwrap().as_str(), "b.i2p");
        assert_eq!(s.dequeue_pending().unwrap(), None);
        // re-entering PENDING queues it again
        s.upsert_record(&rec("a.i2p", Source::Seed, Status::Error)).unwrap();
        assert_eq!(s.dequeue_pending().unwrap().unwrap().as_str(), "a.i2p");
    }

    #[test]
    fn aggregate_of_one_record() {
        let (_d, store) = open();
        assert_eq!(store.aggregate_source_status().unwrap().rows, vec![]);
        store
            .session(InstanceId(0))
            .upsert_record(&rec("a.i2p", Source::Seed, Status::Finished))
            .unwrap();
        let agg = store.aggregate_source_status().unwrap();
        assert_eq!(
            agg.rows,
            vec![AggregateRow {
                source: Source::Seed,
                status: Status::Finished,
                count: 1,
                pct_within_source: 100.0,
                pct_of_total: 100.0
            }]
        );
        let mut csv = Vec::new();
        agg.write_csv(&mut csv).unwrap();
        assert_eq!(
            String::from_utf8(csv).unwrap(),
            "source,status,count,pct_within_source,pct_of_total\nSEED,FINISHED,1,100.00,100.00\n"
        );
    }

    #[test]
    fn daily_series_fills_gaps() {
        let day = 86_400;
        let mut records = vec![];
        for (i, t) in [0, 10, 20, 3 * day + 5].into_iter().enumerate() {
            let mut r = rec(&format!("s{i}.i2p"), Source::Seed, Status::Discovering);
            r.first_seen = 1_546_300_800 + t;
            r.last_transition = r.first_seen;
            records.push(r);
        }
        records[0].status = Status::Finished;
        records[0].last_transition += day;
        let series = daily_series(&records);
        assert_eq!(series.len(), 4);
        assert_eq!(series[0].services_observed, 3);
        assert_eq!(series[1].eepsites_finished, 1);
        assert_eq!(series[2], DailyPoint { date: series[2].date, services_observed: 0, eepsites_finished: 0 });
        assert_eq!(series.iter().map(|p| p.services_observed).sum::<u64>(), 4);
        assert!(daily_series(&[]).is_empty());
    }

    #[test]
    fn reopen_keeps_data_and_missing_store_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.redb");
        assert!(matches!(
            Store::open_existing(&path, StoreOptions::default()),
            Err(StoreError::MissingStore(_))
        ));
        {
            let store = Store::open(&path, StoreOptions::default()).unwrap();
            store
                .session(InstanceId(0))
                .upsert_record(&rec("a.i2p", Source::Seed, Status::Pending))
                .unwrap();
        }
        let store = Store::open_existing(&path, StoreOptions::default()).unwrap();
        assert_eq!(store.record_count().unwrap(), 1);
        assert_eq!(store.session(InstanceId(0)).dequeue_pending().unwrap().unwrap().as_str(), "a.i2p");
    }
}
