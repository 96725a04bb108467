//! Crawler configuration, seed files and seed partitioning.
//!
//! The config file is TOML. Crawl parameters use their classic upper-case
//! names lower-cased (`max_ongoing_spiders`, `http_timeout`, ...). Any
//! top-level key can be overridden by an `EEPCRAWL_<KEY>` environment
//! variable, e.g. `EEPCRAWL_MAX_ONGOING_SPIDERS=4`.

use std::collections::HashSet;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::warn;

use crate::discovery::DiscoverySchedule;
use crate::model::{normalize_url, EepsiteId, LifecycleLimits};
use crate::spider::CrawlLimits;

pub const ENV_PREFIX: &str = "EEPCRAWL_";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("file not found: {0}")]
    FileNotFound(PathBuf),
    #[error("reading {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("parsing config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("writing config: {0}")]
    Serialize(#[from] toml::ser::Error),
    #[error("environment override {key}: {reason}")]
    Env { key: String, reason: String },
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("no valid seeds in {0}")]
    EmptySeeds(PathBuf),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TransportConfig {
    /// Simulated darknet described by a spec file.
    Simnet { spec: PathBuf },
    /// Local I2P router HTTP proxy; `hostlist` lists floodfill-announced
    /// hosts as `name.i2p=destination` lines.
    Proxy {
        proxy: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        hostlist: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorChoice {
    Stopword,
    /// Ground-truth labels of the simulated net (simnet transport only).
    Simnet,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CrawlConfig {
    pub max_ongoing_spiders: usize,
    pub max_crawling_attempts_on_error: u32,
    pub max_discovery_attempts: u32,
    /// Minutes.
    pub max_discovery_duration: u64,
    pub max_discovery_single_threads: usize,
    /// Seconds.
    pub http_timeout: u64,
    pub initial_seeds: PathBuf,
    /// Most seeds a single instance takes from its share.
    pub initial_seeds_batch_size: usize,
    pub instance_id: u32,
    pub instances: u32,
    pub store: PathBuf,
    /// Seconds between two probes of the same eepsite.
    pub discovery_interval: u64,
    pub max_pages: usize,
    pub max_depth: u32,
    /// Simulated days before a run stops.
    pub horizon_days: u32,
    /// Seconds between loop iterations while work is queued.
    pub tick: u64,
    pub detector: DetectorChoice,
    /// Directory for the probe and fetch JSON-lines logs.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub log_dir: Option<PathBuf>,
    pub transport: TransportConfig,
}

impl Default for CrawlConfig {
    fn default() -> Self {
        CrawlConfig {
            max_ongoing_spiders: 10,
            max_crawling_attempts_on_error: 2,
            max_discovery_attempts: 30 * 24,
            max_discovery_duration: 30 * 24 * 60,
            max_discovery_single_threads: 50,
            http_timeout: 30,
            initial_seeds: PathBuf::from("seeds.txt"),
            initial_seeds_batch_size: 394,
            instance_id: 0,
            instances: 1,
            store: PathBuf::from("crawl.redb"),
            discovery_interval: 3_600,
            max_pages: 25_000,
            max_depth: 50,
            horizon_days: 111,
            tick: 60,
            detector: DetectorChoice::Stopword,
            log_dir: None,
            transport: TransportConfig::Proxy {
                proxy: "127.0.0.1:4444".into(),
                hostlist: None,
            },
        }
    }
}

fn read(path: &Path) -> Result<String, ConfigError> {
    fs::read_to_string(path).map_err(|e| match e.kind() {
        io::ErrorKind::NotFound => ConfigError::FileNotFound(path.to_path_buf()),
        _ => ConfigError::Io {
            path: path.to_path_buf(),
            source: e,
        },
    })
}

/// Parses an override the way TOML would, falling back to a plain string.
fn env_value(raw: &str) -> toml::Value {
    if let Ok(i) = raw.parse::<i64>() {
        return toml::Value::Integer(i);
    }
    if let Ok(b) = raw.parse::<bool>() {
        return toml::Value::Boolean(b);
    }
    toml::Value::String(raw.to_string())
}

impl CrawlConfig {
    /// Loads `path` with overrides from the process environment. Relative
    /// paths inside the file are taken relative to the file's directory.
    pub fn load(path: &Path) -> Result<CrawlConfig, ConfigError> {
        Self::load_with_env(path, std::env::vars())
    }

    pub fn load_with_env(
        path: &Path,
        env: impl IntoIterator<Item = (String, String)>,
    ) -> Result<CrawlConfig, ConfigError> {
        let text = read(path)?;
        let mut config = Self::parse(&text, env)?;
        config.resolve_paths(path.parent().unwrap_or(Path::new("")));
        config.validate()?;
        Ok(config)
    }

    /// Parses TOML text and applies `EEPCRAWL_*` overrides; no path
    /// resolution or validation.
    pub fn parse(text: &str, env: impl IntoIterator<Item = (String, String)>) -> Result<CrawlConfig, ConfigError> {
        let mut table: toml::Table = text.parse()?;
        for (key, value) in env {
            let Some(name) = key.strip_prefix(ENV_PREFIX) else { continue };
            let name = name.to_ascii_lowercase();
            if name == "transport" || name.is_empty() {
                return Err(ConfigError::Env {
                    key,
                    reason: "not a scalar setting".into(),
                });
            }
            table.insert(name, env_value(&value));
        }
        Ok(toml::Value::Table(table).try_into()?)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.initial_seeds);
        fix(&mut self.store);
        if let Some(d) = &mut self.log_dir {
            fix(d);
        }
        match &mut self.transport {
            TransportConfig::Simnet { spec } => fix(spec),
            TransportConfig::Proxy { hostlist, .. } => {
                if let Some(h) = hostlist {
                    fix(h);
                }
            }
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = [
            ("max_ongoing_spiders", self.max_ongoing_spiders as u64),
            ("max_crawling_attempts_on_error", self.max_crawling_attempts_on_error as u64),
            ("max_discovery_attempts", self.max_discovery_attempts as u64),
            ("max_discovery_duration", self.max_discovery_duration),
            ("max_discovery_single_threads", self.max_discovery_single_threads as u64),
            ("http_timeout", self.http_timeout),
            ("initial_seeds_batch_size", self.initial_seeds_batch_size as u64),
            ("instances", self.instances as u64),
            ("discovery_interval", self.discovery_interval),
            ("max_pages", self.max_pages as u64),
            ("tick", self.tick),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(ConfigError::Invalid(format!("{name} must be at least 1")));
        }
        if self.instance_id >= self.instances {
            return Err(ConfigError::Invalid(format!(
                "instance_id {} out of range for {} instances",
                self.instance_id, self.instances
            )));
        }
        if self.detector == DetectorChoice::Simnet && !matches!(self.transport, TransportConfig::Simnet { .. }) {
            return Err(ConfigError::Invalid("the simnet detector needs the simnet transport".into()));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String, ConfigError> {
        Ok(toml::to_string(self)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), ConfigError> {
        fs::write(path, self.to_toml()?).map_err(|e| ConfigError::Io {
            path: path.to_path_buf(),
            source: e,
        })
    }

    pub fn lifecycle_limits(&self) -> LifecycleLimits {
        LifecycleLimits {
            max_discovery_attempts: self.max_discovery_attempts,
            max_discovery_duration_secs: self.max_discovery_duration as i64 * 60,
            max_crawling_attempts_on_error: self.max_crawling_attempts_on_error,
        }
    }

    pub fn schedule(&self) -> DiscoverySchedule {
        DiscoverySchedule {
            interval_secs: self.discovery_interval as i64,
            max_attempts: self.max_discovery_attempts,
            max_duration_secs: self.max_discovery_duration as i64 * 60,
            max_parallel_probes: self.max_discovery_single_threads,
        }
    }

    pub fn crawl_limits(&self) -> CrawlLimits {
        CrawlLimits {
            max_pages: self.max_pages,
            max_depth: self.max_depth,
            request_timeout: Duration::from_secs(self.http_timeout),
        }
    }
}

/// Reads one URL per line, skipping blanks and `#` comments. Lines that do
/// not normalize to an eepsite are logged and skipped; repeats keep their
/// first position.
pub fn load_seeds(path: &Path) -> Result<Vec<EepsiteId>, ConfigError> {
    let text = read(path)?;
    let mut seen = HashSet::new();
    let mut seeds = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        match normalize_url(line) {
            Ok(id) => {
                if seen.insert(id.clone()) {
                    seeds.push(id);
                }
            }
            Err(e) => warn!("{}:{}: skipping seed: {e}", path.display(), n + 1),
        }
    }
    if seeds.is_empty() {
        return Err(ConfigError::EmptySeeds(path.to_path_buf()));
    }
    Ok(seeds)
}

/// Deals `seeds` round-robin into `n_instances` batches.
pub fn partition_seeds<T: Clone>(seeds: &[T], n_instances: usize) -> Vec<Vec<T>> {
    let n = n_instances.max(1);
    let mut batches: Vec<Vec<T>> = (0..n).map(|_| Vec::with_capacity(seeds.len() / n + 1)).collect();
    for (i, s) in seeds.iter().enumerate() {
        batches[i % n].push(s.clone());
    }
    batches
}
