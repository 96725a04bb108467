//! Per-eepsite crawler: breadth-first over same-host pages, collecting
//! outgoing eepsite links and home-page content statistics.

mod html;
mod lang;

use std::collections::{BTreeSet, HashSet, VecDeque};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{EepsiteId, Timestamp};
use crate::transport::{FetchFault, Transport};

pub use html::{extract_links, page_stats, ExtractedLinks, PageStats, ParsedPage};
pub use lang::{
    detect_language, stopwords, DetectorFault, Language, LanguageDetector, StopwordDetector,
    SUPPORTED_LANGUAGES,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CrawlLimits {
    pub max_pages: usize,
    pub max_depth: u32,
    pub request_timeout: Duration,
}

impl Default for CrawlLimits {
    fn default() -> Self {
        CrawlLimits {
            max_pages: 25_000,
            max_depth: 50,
            request_timeout: Duration::from_secs(30),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrawlResult {
    pub id: EepsiteId,
    pub page_count: u32,
    pub home_stats: PageStats,
    pub out_links: BTreeSet<EepsiteId>,
    /// Distinct clearnet URLs seen anywhere on the site.
    pub surface_links: u32,
    pub language: Language,
    pub crawled_at: Timestamp,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CrawlFailure {
    #[error("home page unreachable: {0}")]
    HomeFault(FetchFault),
    #[error("home page answered with status {0}")]
    HomeStatus(u16),
    #[error("traversal aborted: {0}")]
    Aborted(FetchFault),
}

/// One line of the per-page fetch log.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FetchLogLine {
    pub timestamp: Timestamp,
    pub site: EepsiteId,
    pub path: String,
    pub bytes: usize,
    pub status: Option<u16>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fault: Option<FetchFault>,
}

/// Crawls one site.
///
/// Only same-host pages are fetched and each at most once. A failed home
/// page fails the crawl; after that, missing pages and timeouts are skipped,
/// a refused connection ends the traversal early with what was gathered,
/// and a dead proxy aborts it.
pub fn crawl_site(
    id: &EepsiteId,
    transport: &dyn Transport,
    limits: &CrawlLimits,
    detector: &dyn LanguageDetector,
    now: Timestamp,
    fetch_log: &mut Vec<FetchLogLine>,
) -> Result<CrawlResult, CrawlFailure> {
    let mut queue: VecDeque<(String, u32)> = VecDeque::from([("/".to_string(), 0)]);
    let mut seen: HashSet<String> = HashSet::from(["/".to_string()]);
    let mut out_links = BTreeSet::new();
    let mut surface = BTreeSet::new();
    let mut page_count: u32 = 0;
    let mut home: Option<(PageStats, Language)> = None;

    while let Some((path, depth)) = queue.pop_front() {
        if page_count as usize >= limits.max_pages {
            break;
        }
        let is_home = home.is_none();
        let response = transport.fetch(id, &path, limits.request_timeout);
        fetch_log.push(FetchLogLine {
            timestamp: now,
            site: id.clone(),
            path: path.clone(),
            bytes: response.as_ref().map(|r| r.body.len()).unwrap_or(0),
            status: response.as_ref().ok().map(|r| r.status),
            fault: response.as_ref().err().copied(),
        });
        let response = match response {
            Ok(r) if r.is_success() => r,
            Ok(r) if is_home => return Err(CrawlFailure::HomeStatus(r.status)),
            Ok(_) => continue,
            Err(fault) if is_home => return Err(CrawlFailure::HomeFault(fault)),
            Err(FetchFault::Timeout) => continue,
            Err(FetchFault::Refused) => break,
            Err(fault @ FetchFault::ProxyDown) => return Err(CrawlFailure::Aborted(fault)),
        };
        page_count += 1;

        let page = ParsedPage::parse(&response.body);
        if is_home {
            let stats = page.stats();
            let language = detect_language(detector, id, &page.visible_text());
            home = Some((stats, language));
        }
        let links = page.links(id, &path);
        out_links.extend(links.external);
        surface.extend(links.surface);
        if depth < limits.max_depth {
            for next in links.internal {
                if seen.insert(next.clone()) {
                    queue.push_back((next, depth + 1));
                }
            }
        }
    }

    let (home_stats, language) = home.unwrap_or((PageStats::default(), Language::Unknown));
    out_links.remove(id);
    Ok(CrawlResult {
        id: id.clone(),
        page_count,
        home_stats,
        out_links,
        surface_links: surface.len() as u32,
        language,
        crawled_at: now,
    })
}
