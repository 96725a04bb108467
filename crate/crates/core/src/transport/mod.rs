//! Uniform page-fetch interface.
//!
//! Two backends: [`SimTransport`] answers from a generated [`SimNet`]
//! (deterministic, driven by a logical clock) and [`ProxyTransport`] goes
//! through a local I2P router's HTTP proxy.
//!
//! [`SimNet`]: crate::simnet::SimNet

mod proxy;
mod sim;

use std::fmt;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{EepsiteId, Timestamp};

pub use proxy::{HostListFeed, ProxyTransport};
pub use sim::SimTransport;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FetchResponse {
    pub status: u16,
    pub body: String,
    pub elapsed: Duration,
}

impl FetchResponse {
    pub fn is_success(&self) -> bool {
        (200..300).contains(&self.status)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Error, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FetchFault {
    #[error("deadline exceeded")]
    Timeout,
    #[error("connection refused")]
    Refused,
    #[error("proxy unreachable")]
    ProxyDown,
}

impl FetchFault {
    pub fn as_str(self) -> &'static str {
        match self {
            FetchFault::Timeout => "TIMEOUT",
            FetchFault::Refused => "REFUSED",
            FetchFault::ProxyDown => "PROXY_DOWN",
        }
    }
}

/// Fetches one path of one eepsite. Implementations must be callable from
/// many threads at once.
pub trait Transport: Send + Sync {
    fn fetch(&self, id: &EepsiteId, path: &str, deadline: Duration) -> Result<FetchResponse, FetchFault>;
}

/// Stream of eepsite hosts announced by floodfill routers.
pub trait FloodfillFeed: Send + Sync {
    /// Every host announced at or before `now`, with its announce time.
    fn announced_until(&self, now: Timestamp) -> Vec<(EepsiteId, Timestamp)>;

    /// `announced_until(now)` without its first `skip` entries.
    fn announced_since(&self, skip: usize, now: Timestamp) -> Vec<(EepsiteId, Timestamp)> {
        self.announced_until(now).into_iter().skip(skip).collect()
    }

    /// Next announce time strictly after `now`, if any.
    fn next_announcement_after(&self, _now: Timestamp) -> Option<Timestamp> {
        None
    }
}

/// Feed that never announces anything.
#[derive(Debug, Default, Clone, Copy)]
pub struct NoFloodfill;

impl FloodfillFeed for NoFloodfill {
    fn announced_until(&self, _now: Timestamp) -> Vec<(EepsiteId, Timestamp)> {
        Vec::new()
    }
}

impl fmt::Debug for dyn Transport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("dyn Transport")
    }
}
