//! Synthetic darknets with known ground truth.
//!
//! A [`SimNetSpec`] describes topology, availability, site sizes and
//! languages; [`SimNet::generate`] materializes it deterministically from the
//! seed. The crawler then talks to it through
//! [`SimTransport`](crate::transport::SimTransport) and its output can be
//! compared with [`SimNet::ground_truth`].

mod churn;
mod content;
mod spec;
mod topology;

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fs;
use std::io;
use std::path::Path;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::graphlab::NodeClass;
use crate::model::{EepsiteId, Timestamp};
use crate::spider::{Language, LanguageDetector, DetectorFault, PageStats};
use crate::transport::{FetchFault, FetchResponse};

pub use churn::{model_state, SiteState};
pub use spec::{
    default_languages, AvailabilityModel, AvailabilitySpec, HomeStatsDist, PageCountDist, Seeding,
    SimNetSpec, SiteOverride, SiteProfile, Topology, DEFAULT_START_TIME, SPEC_VERSION,
};

use churn::{stream_rng, ChurnTrace};
use content::HomeShape;

#[derive(Debug, Error)]
pub enum SimNetError {
    #[error("invalid simnet spec: {0}")]
    InvalidSpec(String),
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// One materialized site.
pub struct SimSite {
    pub index: usize,
    pub host: EepsiteId,
    pub pages: u32,
    pub language: String,
    /// Ground-truth home page statistics.
    pub home: PageStats,
    /// Targets of outgoing edges, ascending.
    pub out: Vec<usize>,
    pub surface: Vec<String>,
    pub availability: AvailabilityModel,
    pub latency_secs: f64,
    pub seeded: bool,
    pub announced_at: Option<Timestamp>,
    pub(crate) home_shape: HomeShape,
    pub(crate) broken_link: bool,
}

pub struct SimNet {
    spec: SimNetSpec,
    sites: Vec<SimSite>,
    by_host: HashMap<EepsiteId, usize>,
    edges: Vec<(usize, usize)>,
    directory: Option<(usize, usize)>,
    traces: Vec<Option<Mutex<ChurnTrace>>>,
}

const NAMED_PREFIXES: [&str; 10] = [
    "forum", "wiki", "stats", "blog", "tracker", "paste", "mail", "search", "news", "git",
];

fn base32(bytes: &[u8]) -> String {
    const ALPHABET: &[u8; 32] = b"abcdefghijklmnopqrstuvwxyz234567";
    let mut out = String::with_capacity(bytes.len() * 8 / 5 + 1);
    let mut buffer: u32 = 0;
    let mut bits = 0;
    for &b in bytes {
        buffer = (buffer << 8) | b as u32;
        bits += 8;
        while bits >= 5 {
            out.push(ALPHABET[((buffer >> (bits - 5)) & 31) as usize] as char);
            bits -= 5;
        }
    }
    if bits > 0 {
        out.push(ALPHABET[((buffer << (5 - bits)) & 31) as usize] as char);
    }
    out
}

fn host_for(seed: u64, index: usize) -> String {
    if index % 3 == 0 {
        format!("{}{}.i2p", NAMED_PREFIXES[(index / 3) % NAMED_PREFIXES.len()], index)
    } else {
        let mut h = Sha256::new();
        h.update(seed.to_le_bytes());
        h.update((index as u64).to_le_bytes());
        let digest: [u8; 32] = h.finalize().into();
        format!("{}.b32.i2p", base32(&digest))
    }
}

fn sample_quota(rng: &mut impl Rng, pool: &[usize], fraction: f64) -> Vec<usize> {
    let k = ((fraction * pool.len() as f64).round() as usize).min(pool.len());
    let mut picked: Vec<usize> = index::sample(rng, pool.len(), k).into_iter().map(|i| pool[i]).collect();
    picked.sort_unstable();
    picked
}

impl SimNet {
    pub fn generate(spec: &SimNetSpec) -> Result<SimNet, SimNetError> {
        spec.validate()?;
        let n = spec.n_sites;
        let seed = spec.seed;
        let topo = topology::generate(spec);

        let mut out: Vec<Vec<usize>> = vec![Vec::new(); n];
        for &(u, v) in &topo.edges {
            out[u].push(v);
        }

        // page counts: exact small/large quota
        let dist = spec.site_profile.pages;
        let mut rng = stream_rng(seed, "pages", 0);
        let all: Vec<usize> = (0..n).collect();
        let small: BTreeSet<usize> = sample_quota(&mut rng, &all, dist.small_fraction).into_iter().collect();
        let mut pages = vec![1u32; n];
        let (lo, hi) = ((dist.small_max + 1) as f64, dist.large_max as f64);
        for (i, p) in pages.iter_mut().enumerate() {
            *p = if small.contains(&i) {
                rng.random_range(1..=dist.small_max)
            } else {
                let x = (lo.ln() + rng.random::<f64>() * (hi.ln() - lo.ln())).exp();
                (x.round() as u32).clamp(dist.small_max + 1, dist.large_max)
            };
        }

        let weights = &spec.site_profile.languages;
        let total: f64 = weights.iter().map(|(_, w)| w).sum();
        let mut rng = stream_rng(seed, "language", 0);
        let mut languages: Vec<String> = (0..n)
            .map(|_| {
                let mut x = rng.random::<f64>() * total;
                for (code, w) in weights {
                    if x < *w {
                        return code.clone();
                    }
                    x -= w;
                }
                weights.last().map(|(c, _)| c.clone()).unwrap_or_else(|| "en".into())
            })
            .collect();

        let mut availability = vec![spec.availability.default; n];
        let mut latency = vec![0.0; n];
        for o in &spec.availability.overrides {
            if let Some(m) = o.model {
                availability[o.site] = m;
            }
            if let Some(l) = o.latency_secs {
                latency[o.site] = l;
            }
            if let Some(p) = o.pages {
                pages[o.site] = p;
            }
            if let Some(lang) = &o.language {
                languages[o.site] = lang.clone();
            }
        }

        let (seeded, announced) = Self::choose_entry_points(spec, &out);
        let mut rng = stream_rng(seed, "announce", 0);
        let spread = spec.seeding.announce_spread_days * 86_400.0;
        let announced_at: Vec<Option<Timestamp>> = (0..n)
            .map(|i| {
                let offset = (rng.random::<f64>() * spread).floor() as Timestamp;
                announced.contains(&i).then_some(spec.start_time + offset)
            })
            .collect();

        let mut home_rng = stream_rng(seed, "home", 0);
        let mut surface_rng = stream_rng(seed, "surface", 0);
        let mut sites: Vec<SimSite> = (0..n)
            .map(|i| {
                let home = &spec.site_profile.home;
                let home_shape =
                    content::sample_home_shape(&mut home_rng, home.mean_words, home.mean_images, home.mean_scripts);
                let surface = (0..surface_rng.random_range(0..3))
                    .map(|j| format!("http://www.example{}.org/ref/{j}", surface_rng.random_range(0..50)))
                    .collect();
                SimSite {
                    index: i,
                    host: host_for(seed, i).parse().expect("generated hosts are valid"),
                    pages: pages[i],
                    language: languages[i].clone(),
                    home: PageStats::default(),
                    out: std::mem::take(&mut out[i]),
                    surface,
                    availability: availability[i],
                    latency_secs: latency[i],
                    seeded: seeded.contains(&i),
                    announced_at: announced_at[i],
                    home_shape,
                    broken_link: i % 5 == 0,
                }
            })
            .collect();

        let hosts: Vec<String> = sites.iter().map(|s| s.host.as_str().to_string()).collect();
        let lookup = |i: usize| hosts[i].clone();
        for site in sites.iter_mut() {
            site.home = content::render(seed, site, 0, &lookup).1;
        }

        let by_host = sites.iter().map(|s| (s.host.clone(), s.index)).collect();
        let traces = sites
            .iter()
            .map(|s| match s.availability {
                AvailabilityModel::Churn {
                    mean_online_secs,
                    mean_offline_secs,
                } if mean_online_secs > 0.0 && mean_offline_secs > 0.0 => Some(Mutex::new(ChurnTrace::new(
                    seed,
                    s.index,
                    mean_online_secs,
                    mean_offline_secs,
                ))),
                _ => None,
            })
            .collect();

        Ok(SimNet {
            spec: spec.clone(),
            sites,
            by_host,
            edges: topo.edges,
            directory: topo.directory,
            traces,
        })
    }

    fn choose_entry_points(spec: &SimNetSpec, out: &[Vec<usize>]) -> (BTreeSet<usize>, BTreeSet<usize>) {
        let n = spec.n_sites;
        let s = &spec.seeding;
        let mut rng = stream_rng(spec.seed, "seeding", 0);
        let all: Vec<usize> = (0..n).collect();
        let seeded: BTreeSet<usize> = match &s.seeded {
            Some(list) => list.iter().copied().collect(),
            None => sample_quota(&mut rng, &all, s.seed_fraction).into_iter().collect(),
        };
        let mut announced: BTreeSet<usize> = match &s.announced {
            Some(list) => list.iter().copied().collect(),
            None => {
                let rest: Vec<usize> = all.iter().copied().filter(|i| !seeded.contains(i)).collect();
                sample_quota(&mut rng, &rest, s.announce_fraction).into_iter().collect()
            }
        };
        if s.ensure_reachable {
            let mut reached = vec![false; n];
            let mut queue: VecDeque<usize> = VecDeque::new();
            let visit = |start: usize, reached: &mut Vec<bool>, queue: &mut VecDeque<usize>| {
                if reached[start] {
                    return;
                }
                reached[start] = true;
                queue.push_back(start);
                while let Some(u) = queue.pop_front() {
                    for &v in &out[u] {
                        if !reached[v] {
                            reached[v] = true;
                            queue.push_back(v);
                        }
                    }
                }
            };
            for &i in seeded.iter().chain(announced.iter()) {
                visit(i, &mut reached, &mut queue);
            }
            for i in 0..n {
                if !reached[i] {
                    announced.insert(i);
                    visit(i, &mut reached, &mut queue);
                }
            }
        }
        (seeded, announced)
    }

    pub fn spec(&self) -> &SimNetSpec {
        &self.spec
    }

    pub fn sites(&self) -> &[SimSite] {
        &self.sites
    }

    pub fn site(&self, index: usize) -> &SimSite {
        &self.sites[index]
    }

    pub fn lookup(&self, host: &EepsiteId) -> Option<&SimSite> {
        self.by_host.get(host).map(|&i| &self.sites[i])
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Ground-truth edges as host pairs.
    pub fn edge_hosts(&self) -> BTreeSet<(EepsiteId, EepsiteId)> {
        self.edges
            .iter()
            .map(|&(u, v)| (self.sites[u].host.clone(), self.sites[v].host.clone()))
            .collect()
    }

    /// Planted directory site and its out-degree (paper-shape topology only).
    pub fn directory(&self) -> Option<(&EepsiteId, usize)> {
        self.directory.map(|(i, d)| (&self.sites[i].host, d))
    }

    pub fn start_time(&self) -> Timestamp {
        self.spec.start_time
    }

    pub fn seeds(&self) -> Vec<EepsiteId> {
        self.sites.iter().filter(|s| s.seeded).map(|s| s.host.clone()).collect()
    }

    /// All floodfill announcements, sorted by time then host.
    pub fn announcements(&self) -> Vec<(EepsiteId, Timestamp)> {
        let mut v: Vec<(EepsiteId, Timestamp)> = self
            .sites
            .iter()
            .filter_map(|s| s.announced_at.map(|t| (s.host.clone(), t)))
            .collect();
        v.sort_by(|a, b| a.1.cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
        v
    }

    /// Availability of `site` at absolute time `t`.
    pub fn state_at(&self, site: usize, t: Timestamp) -> SiteState {
        let rel = (t - self.spec.start_time).max(0) as f64;
        match &self.traces[site] {
            Some(trace) => trace.lock().expect("churn trace lock").state_at(rel),
            None => model_state(&self.sites[site].availability, self.spec.seed, site, rel),
        }
    }

    /// Body of `path` on `site`, `None` when the page does not exist.
    pub fn render_page(&self, site: usize, path: &str) -> Option<String> {
        let s = &self.sites[site];
        let page = content::parse_page_path(path, s.pages)?;
        let lookup = |i: usize| self.sites[i].host.as_str().to_string();
        Some(content::render(self.spec.seed, s, page, &lookup).0)
    }

    /// Pure fetch: depends only on the spec, the request and `t`.
    pub fn fetch_at(
        &self,
        id: &EepsiteId,
        path: &str,
        t: Timestamp,
        deadline: Duration,
    ) -> Result<FetchResponse, FetchFault> {
        let Some(&index) = self.by_host.get(id) else {
            return Err(FetchFault::Refused);
        };
        let site = &self.sites[index];
        let latency = Duration::from_secs_f64(site.latency_secs);
        if latency > deadline {
            return Err(FetchFault::Timeout);
        }
        if !self.state_at(index, t).is_online() {
            return Err(FetchFault::Refused);
        }
        Ok(match self.render_page(index, path) {
            Some(body) => FetchResponse {
                status: 200,
                body,
                elapsed: latency,
            },
            None => FetchResponse {
                status: 404,
                body: "<html><body><h1>404 Not Found</h1></body></html>".to_string(),
                elapsed: latency,
            },
        })
    }

    pub fn ground_truth(&self) -> GroundTruth {
        let n = self.sites.len();
        let mut indeg = vec![0usize; n];
        let mut outdeg = vec![0usize; n];
        for &(u, v) in &self.edges {
            outdeg[u] += 1;
            indeg[v] += 1;
        }
        GroundTruth {
            spec_version: SPEC_VERSION,
            seed: self.spec.seed,
            n_sites: n,
            start_time: self.spec.start_time,
            sites: self
                .sites
                .iter()
                .map(|s| GroundTruthSite {
                    index: s.index,
                    host: s.host.clone(),
                    pages: s.pages,
                    home: s.home,
                    seeded: s.seeded,
                    announced_at: s.announced_at,
                    in_degree: indeg[s.index],
                    out_degree: outdeg[s.index],
                    class: match (indeg[s.index] > 0, outdeg[s.index] > 0) {
                        (false, true) => NodeClass::Source,
                        (true, false) => NodeClass::Sink,
                        (true, true) => NodeClass::Connected,
                        (false, false) => NodeClass::Isolated,
                    },
                })
                .collect(),
            edges: self.edges.clone(),
            availability: self.sites.iter().map(|s| s.availability).collect(),
            languages: self.sites.iter().map(|s| s.language.clone()).collect(),
            directory: self.directory.map(|(i, _)| i),
        }
    }

    pub fn write_ground_truth(&self, path: &Path) -> Result<(), SimNetError> {
        let json = serde_json::to_string_pretty(&self.ground_truth())?;
        fs::write(path, json + "\n")?;
        Ok(())
    }
}

impl SimNetSpec {
    pub fn load(path: &Path) -> Result<SimNetSpec, SimNetError> {
        let spec: SimNetSpec = serde_json::from_str(&fs::read_to_string(path)?)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn save(&self, path: &Path) -> Result<(), SimNetError> {
        fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthSite {
    pub index: usize,
    pub host: EepsiteId,
    pub pages: u32,
    pub home: PageStats,
    pub seeded: bool,
    pub announced_at: Option<Timestamp>,
    pub in_degree: usize,
    pub out_degree: usize,
    pub class: NodeClass,
}

/// Machine-readable truth for oracle comparisons.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub spec_version: u32,
    pub seed: u64,
    pub n_sites: usize,
    pub start_time: Timestamp,
    pub sites: Vec<GroundTruthSite>,
    pub edges: Vec<(usize, usize)>,
    pub availability: Vec<AvailabilityModel>,
    pub languages: Vec<String>,
    pub directory: Option<usize>,
}

/// Detector that answers with the simulated site's configured language.
#[derive(Clone)]
pub struct SimNetDetector {
    net: Arc<SimNet>,
}

impl SimNetDetector {
    pub fn new(net: Arc<SimNet>) -> Self {
        SimNetDetector { net }
    }
}

impl LanguageDetector for SimNetDetector {
    fn detect(&self, site: &EepsiteId, _text: &str) -> Result<Language, DetectorFault> {
        self.net
            .lookup(site)
            .map(|s| Language::code(&s.language))
            .ok_or_else(|| DetectorFault(format!("{site} is not part of the simulated net")))
    }
}
