//! Reachability probes and the schedule that paces them.

use std::collections::{BTreeSet, HashMap};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::model::{EepsiteId, EepsiteRecord, LifecycleEvent, Status, Timestamp};
use crate::transport::{FetchFault, Transport};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DiscoverySchedule {
    pub interval_secs: i64,
    pub max_attempts: u32,
    pub max_duration_secs: i64,
    pub max_parallel_probes: usize,
}

impl Default for DiscoverySchedule {
    fn default() -> Self {
        DiscoverySchedule {
            interval_secs: 3_600,
            max_attempts: 720,
            max_duration_secs: 43_200 * 60,
            max_parallel_probes: 50,
        }
    }
}

impl DiscoverySchedule {
    pub fn validate(&self) -> Result<(), String> {
        if self.interval_secs <= 0 {
            return Err("probe interval must be positive".into());
        }
        if self.max_attempts == 0 {
            return Err("max_attempts must be at least 1".into());
        }
        if self.max_parallel_probes == 0 {
            return Err("max_parallel_probes must be at least 1".into());
        }
        Ok(())
    }
}

/// Why a probe failed. Recorded in the probe log, ignored by the lifecycle.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FailReason {
    Timeout,
    Refused,
    ProxyDown,
    /// The home page answered with a non-success status.
    BadStatus,
}

impl From<FetchFault> for FailReason {
    fn from(f: FetchFault) -> Self {
        match f {
            FetchFault::Timeout => FailReason::Timeout,
            FetchFault::Refused => FailReason::Refused,
            FetchFault::ProxyDown => FailReason::ProxyDown,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProbeOutcome {
    ContactOk,
    ContactFail(FailReason),
}

impl ProbeOutcome {
    pub fn event(self) -> LifecycleEvent {
        match self {
            ProbeOutcome::ContactOk => LifecycleEvent::ContactOk,
            ProbeOutcome::ContactFail(_) => LifecycleEvent::ContactFail,
        }
    }

    pub fn reason(self) -> Option<FailReason> {
        match self {
            ProbeOutcome::ContactOk => None,
            ProbeOutcome::ContactFail(r) => Some(r),
        }
    }
}

/// One home-page fetch. Network trouble is an outcome, never an error.
pub fn probe(id: &EepsiteId, transport: &dyn Transport, timeout: Duration) -> ProbeOutcome {
    match transport.fetch(id, "/", timeout) {
        Ok(r) if r.is_success() => ProbeOutcome::ContactOk,
        Ok(_) => ProbeOutcome::ContactFail(FailReason::BadStatus),
        Err(fault) => ProbeOutcome::ContactFail(fault.into()),
    }
}

/// Records due for a probe at `now`: never probed first, then oldest probe
/// first, ties by id; at most `max_parallel_probes - in_flight` of them.
pub fn next_due(
    records: &[EepsiteRecord],
    now: Timestamp,
    schedule: &DiscoverySchedule,
    in_flight: usize,
) -> Vec<EepsiteId> {
    let capacity = schedule.max_parallel_probes.saturating_sub(in_flight);
    let mut due: Vec<(Option<Timestamp>, &EepsiteId)> = records
        .iter()
        .filter(|r| r.status == Status::Discovering)
        .filter(|r| r.last_probe.is_none_or(|t| now - t >= schedule.interval_secs))
        .map(|r| (r.last_probe, &r.id))
        .collect();
    due.sort();
    due.into_iter().take(capacity).map(|(_, id)| id.clone()).collect()
}

/// Incremental index answering [`next_due`] for a changing record set
/// without rescanning it.
#[derive(Debug, Default, Clone)]
pub struct DueQueue {
    order: BTreeSet<(Option<Timestamp>, EepsiteId)>,
    last_probe: HashMap<EepsiteId, Option<Timestamp>>,
}

impl DueQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn contains(&self, id: &EepsiteId) -> bool {
        self.last_probe.contains_key(id)
    }

    /// Adds or repositions `id`.
    pub fn insert(&mut self, id: EepsiteId, last_probe: Option<Timestamp>) {
        if let Some(old) = self.last_probe.insert(id.clone(), last_probe) {
            self.order.remove(&(old, id.clone()));
        }
        self.order.insert((last_probe, id));
    }

    pub fn remove(&mut self, id: &EepsiteId) {
        if let Some(old) = self.last_probe.remove(id) {
            self.order.remove(&(old, id.clone()));
        }
    }

    /// Removes and returns up to `capacity` due ids in [`next_due`] order.
    pub fn take_due(&mut self, now: Timestamp, interval_secs: i64, capacity: usize) -> Vec<EepsiteId> {
        let mut taken = Vec::new();
        while taken.len() < capacity {
            let Some((last, _)) = self.order.first() else { break };
            if last.is_some_and(|t| now - t < interval_secs) {
                break;
            }
            let (_, id) = self.order.pop_first().expect("checked non-empty");
            self.last_probe.remove(&id);
            taken.push(id);
        }
        taken
    }

    /// Earliest time at which some queued id is due.
    pub fn next_due_time(&self, interval_secs: i64) -> Option<Timestamp> {
        self.order.first().map(|(last, _)| match last {
            None => Timestamp::MIN,
            Some(t) => t + interval_secs,
        })
    }
}

/// One line of the probe log.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeLogLine {
    pub timestamp: Timestamp,
    pub id: EepsiteId,
    pub outcome: LifecycleEvent,
    pub reason: Option<FailReason>,
    pub attempt: u32,
}
