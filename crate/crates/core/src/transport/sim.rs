use std::sync::Arc;
use std::time::Duration;

use super::{FetchFault, FetchResponse, FloodfillFeed, Transport};
use crate::clock::Clock;
use crate::model::{EepsiteId, Timestamp};
use crate::simnet::SimNet;

/// Transport backed by a generated net, answering as of the clock's
/// current reading.
#[derive(Clone)]
pub struct SimTransport {
    net: Arc<SimNet>,
    clock: Arc<dyn Clock>,
    announcements: Arc<Vec<(EepsiteId, Timestamp)>>,
}

impl SimTransport {
    pub fn new(net: Arc<SimNet>, clock: Arc<dyn Clock>) -> Self {
        let announcements = Arc::new(net.announcements());
        SimTransport {
            net,
            clock,
            announcements,
        }
    }

    pub fn net(&self) -> &Arc<SimNet> {
        &self.net
    }
}

impl Transport for SimTransport {
    fn fetch(&self, id: &EepsiteId, path: &str, deadline: Duration) -> Result<FetchResponse, FetchFault> {
        self.net.fetch_at(id, path, self.clock.now(), deadline)
    }
}

impl FloodfillFeed for SimTransport {
    fn announced_until(&self, now: Timestamp) -> Vec<(EepsiteId, Timestamp)> {
        let end = self.announcements.partition_point(|(_, t)| *t <= now);
        self.announcements[..end].to_vec()
    }

    fn announced_since(&self, skip: usize, now: Timestamp) -> Vec<(EepsiteId, Timestamp)> {
        let end = self.announcements.partition_point(|(_, t)| *t <= now);
        self.announcements.get(skip.min(end)..end).unwrap_or_default().to_vec()
    }

    fn next_announcement_after(&self, now: Timestamp) -> Option<Timestamp> {
        let i = self.announcements.partition_point(|(_, t)| *t <= now);
        self.announcements.get(i).map(|(_, t)| *t)
    }
}
