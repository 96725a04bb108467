use std::io;
use std::path::Path;
use std::time::{Duration, Instant};

use tracing::warn;

use super::{FetchFault, FetchResponse, FloodfillFeed, Transport};
use crate::model::{normalize_url, EepsiteId, Timestamp};

const MAX_BODY_BYTES: u64 = 16 * 1024 * 1024;

/// Live backend: plain HTTP through the router's HTTP proxy (usually
/// `127.0.0.1:4444`).
pub struct ProxyTransport {
    agent: ureq::Agent,
    proxy: String,
}

impl ProxyTransport {
    pub fn new(proxy_addr: &str) -> Result<Self, ureq::Error> {
        let proxy_url = if proxy_addr.contains("://") {
            proxy_addr.to_string()
        } else {
            format!("http://{proxy_addr}")
        };
        let proxy = ureq::Proxy::new(&proxy_url)?;
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .proxy(Some(proxy))
            .http_status_as_error(false)
            .max_redirects(0)
            .build()
            .into();
        Ok(ProxyTransport {
            agent,
            proxy: proxy_url,
        })
    }

    pub fn proxy(&self) -> &str {
        &self.proxy
    }
}

fn map_error(err: ureq::Error) -> FetchFault {
    match err {
        ureq::Error::Timeout(_) => FetchFault::Timeout,
        // every connection goes to the proxy, so failing to open one means
        // the proxy itself is unreachable
        ureq::Error::ConnectionFailed
        | ureq::Error::HostNotFound
        | ureq::Error::ConnectProxyFailed(_)
        | ureq::Error::InvalidProxyUrl => FetchFault::ProxyDown,
        ureq::Error::Io(e) => match e.kind() {
            io::ErrorKind::ConnectionRefused | io::ErrorKind::AddrNotAvailable => FetchFault::ProxyDown,
            io::ErrorKind::TimedOut | io::ErrorKind::WouldBlock => FetchFault::Timeout,
            _ => FetchFault::Refused,
        },
        _ => FetchFault::Refused,
    }
}

impl Transport for ProxyTransport {
    fn fetch(&self, id: &EepsiteId, path: &str, deadline: Duration) -> Result<FetchResponse, FetchFault> {
        let url = format!("http://{}{}", id.as_str(), path);
        let started = Instant::now();
        let mut response = self
            .agent
            .get(&url)
            .config()
            .timeout_global(Some(deadline))
            .build()
            .call()
            .map_err(map_error)?;
        let status = response.status().as_u16();
        let bytes = response
            .body_mut()
            .with_config()
            .limit(MAX_BODY_BYTES)
            .read_to_vec()
            .map_err(map_error)?;
        Ok(FetchResponse {
            status,
            body: String::from_utf8_lossy(&bytes).into_owned(),
            elapsed: started.elapsed(),
        })
    }
}

/// Floodfill feed for live runs: a host-list file exported from the
/// router, all entries announced at load time.
#[derive(Debug, Clone)]
pub struct HostListFeed {
    hosts: Vec<EepsiteId>,
    loaded_at: Timestamp,
}

impl HostListFeed {
    pub fn load(path: &Path, loaded_at: Timestamp) -> io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut hosts = Vec::new();
        for line in text.lines() {
            // hosts.txt lines look like `name.i2p=<destination>`
            let entry = line.split(['#', '=']).next().unwrap_or("").trim();
            if entry.is_empty() {
                continue;
            }
            match normalize_url(entry) {
                Ok(id) => hosts.push(id),
                Err(e) => warn!(line = entry, error = %e, "skipping host-list entry"),
            }
        }
        hosts.sort();
        hosts.dedup();
        Ok(HostListFeed { hosts, loaded_at })
    }
}

impl FloodfillFeed for HostListFeed {
    fn announced_until(&self, now: Timestamp) -> Vec<(EepsiteId, Timestamp)> {
        if now < self.loaded_at {
            return Vec::new();
        }
        self.hosts.iter().map(|h| (h.clone(), self.loaded_at)).collect()
    }
}
