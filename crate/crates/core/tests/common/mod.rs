//! Fixtures, brute-force oracles and simulation helpers shared by the
//! integration test targets.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::path::PathBuf;
use std::sync::Arc;

use rand::Rng;
use serde::Deserialize;

use eepcrawl::config::DetectorChoice;
use eepcrawl::graphlab::{LinkGraph, NodeClass, NodeInfo};
use eepcrawl::manager::{run_simulation, RunSettings, RunSummary};
use eepcrawl::model::{EepsiteId, Source, Status};
use eepcrawl::simnet::SimNet;
use eepcrawl::spider::{CrawlResult, Language, PageStats};
use eepcrawl::store::{Store, StoreOptions};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn read_csv<T: for<'de> Deserialize<'de>>(name: &str) -> Vec<T> {
    let mut r = csv::Reader::from_path(fixture(name)).unwrap();
    r.deserialize().collect::<Result<_, _>>().unwrap()
}

pub fn id(s: &str) -> EepsiteId {
    s.parse().unwrap()
}

#[derive(Debug, Deserialize)]
pub struct SourceStatusRow {
    pub source: Source,
    pub source_total: u64,
    pub status: Status,
    pub count: u64,
    pub pct_by_status: f64,
    pub pct_of_total: f64,
}

pub fn table2() -> Vec<SourceStatusRow> {
    read_csv("table2_source_status.csv")
}

/// Table cells plus, per source, the records the table leaves out (its
/// listed statuses do not add up to the source totals). Those are put in
/// `PENDING`, a status the table has no row for.
pub fn table2_cells() -> Vec<(Source, Status, u64)> {
    let rows = table2();
    let mut cells: Vec<(Source, Status, u64)> = rows.iter().map(|r| (r.source, r.status, r.count)).collect();
    for source in Source::ALL {
        let listed: u64 = rows.iter().filter(|r| r.source == source).map(|r| r.count).sum();
        let total = rows.iter().find(|r| r.source == source).unwrap().source_total;
        if total > listed {
            cells.push((source, Status::Pending, total - listed));
        }
    }
    cells
}

#[derive(Debug, Clone, Deserialize)]
pub struct TopRow {
    pub degree: usize,
    pub id: String,
    pub status: Status,
    pub source: Source,
}

pub fn table4() -> Vec<TopRow> {
    read_csv("table4_top_out_degree.csv")
}

pub fn table5() -> Vec<TopRow> {
    read_csv("table5_top_in_degree.csv")
}

/// A graph in which the listed out-degrees and in-degrees hold exactly:
/// every listed site links to (or is linked from) its own set of filler
/// sites of degree one.
pub fn top_degree_graph() -> LinkGraph {
    let mut nodes = BTreeMap::new();
    let mut edges = Vec::new();
    for (row_no, row) in table4().iter().enumerate() {
        let hub = id(&row.id);
        nodes.insert(hub.clone(), NodeInfo { status: row.status, source: row.source });
        for k in 0..row.degree {
            let target = id(&format!("out-{row_no}-{k}.i2p"));
            nodes.insert(target.clone(), NodeInfo { status: Status::Discarded, source: Source::Discovered });
            edges.push((hub.clone(), target));
        }
    }
    for (row_no, row) in table5().iter().enumerate() {
        let hub = id(&row.id);
        nodes.insert(hub.clone(), NodeInfo { status: row.status, source: row.source });
        for k in 0..row.degree {
            let from = id(&format!("in-{row_no}-{k}.i2p"));
            nodes.insert(from.clone(), NodeInfo { status: Status::Finished, source: Source::Floodfill });
            edges.push((from, hub.clone()));
        }
    }
    LinkGraph::from_parts(nodes, edges)
}

#[derive(Debug, Deserialize)]
pub struct LanguageRowFixture {
    pub language: String,
    pub count: usize,
    pub pct: f64,
}

pub fn table6() -> Vec<LanguageRowFixture> {
    read_csv("table6_languages.csv")
}

pub fn result_with(host: &str, pages: u32, language: Language) -> CrawlResult {
    CrawlResult {
        id: id(host),
        page_count: pages,
        home_stats: PageStats::default(),
        out_links: BTreeSet::new(),
        surface_links: 0,
        language,
        crawled_at: 0,
    }
}

/// One crawl result per counted site of the language fixture.
pub fn language_results() -> Vec<CrawlResult> {
    let mut out = Vec::new();
    for row in table6() {
        for k in 0..row.count {
            out.push(result_with(&format!("{}{k}.i2p", row.language), 1, Language::code(&row.language)));
        }
    }
    out
}

// ---- oracles ----

/// Nodes at distance 1..=k from `root` along edge direction.
pub fn bfs_khop(edges: &[(usize, usize)], n: usize, root: usize, k: u32) -> BTreeSet<usize> {
    let mut adj: HashMap<usize, Vec<usize>> = HashMap::new();
    for &(u, v) in edges {
        adj.entry(u).or_default().push(v);
    }
    let mut dist = vec![u32::MAX; n];
    dist[root] = 0;
    let mut q = VecDeque::from([root]);
    while let Some(u) = q.pop_front() {
        if dist[u] == k {
            continue;
        }
        for &v in adj.get(&u).map(Vec::as_slice).unwrap_or(&[]) {
            if dist[v] == u32::MAX {
                dist[v] = dist[u] + 1;
                q.push_back(v);
            }
        }
    }
    (0..n).filter(|&i| i != root && dist[i] <= k).collect()
}

pub fn naive_sma(series: &[f64], window: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(series.len());
    for i in 0..series.len() {
        let start = if i + 1 >= window { i + 1 - window } else { 0 };
        let mut sum = 0.0;
        let mut n = 0.0;
        for x in &series[start..=i] {
            sum += x;
            n += 1.0;
        }
        out.push(sum / n);
    }
    out
}

/// Degree and class of every node, recounted edge by edge.
pub fn brute_force_classes(
    nodes: &BTreeSet<EepsiteId>,
    edges: &BTreeSet<(EepsiteId, EepsiteId)>,
) -> BTreeMap<EepsiteId, (usize, usize, NodeClass)> {
    nodes
        .iter()
        .map(|n| {
            let inn = edges.iter().filter(|(_, v)| v == n).count();
            let out = edges.iter().filter(|(u, _)| u == n).count();
            let class = match (inn, out) {
                (0, 0) => NodeClass::Isolated,
                (0, _) => NodeClass::Source,
                (_, 0) => NodeClass::Sink,
                _ => NodeClass::Connected,
            };
            (n.clone(), (inn, out, class))
        })
        .collect()
}

/// A random HTML document together with its expected statistics, counted
/// from the text the generator emitted rather than from the markup.
pub struct GeneratedPage {
    pub html: String,
    pub expected: PageStats,
}

const TOKENS: &[&str] = &[
    "hello", "wörld", "ÉCOLE", "данные", "中文", "42", "x1y", "...", "!", "a&b", "l'été", "i2p", "Ωmega",
];
const GAPS: &[&str] = &[" ", "  ", "\n", "\t", " \n ", ""];

struct PageGen<'a, R: Rng> {
    rng: &'a mut R,
    html: String,
    text: String,
    images: u64,
    scripts: u64,
}

impl<R: Rng> PageGen<'_, R> {
    fn text_run(&mut self) {
        for _ in 0..self.rng.random_range(1..6) {
            let t = TOKENS[self.rng.random_range(0..TOKENS.len())];
            let g = GAPS[self.rng.random_range(0..GAPS.len())];
            self.html.push_str(&t.replace('&', "&amp;"));
            self.html.push_str(g);
            self.text.push_str(t);
            self.text.push_str(g);
        }
    }

    fn attrs(&mut self) -> String {
        let mut a = vec!["class=\"c\"", "id=\"x\"", "title=\"not text\"", "data-v='1 2'"];
        let keep = self.rng.random_range(0..=a.len());
        for i in (1..a.len()).rev() {
            let j = self.rng.random_range(0..=i);
            a.swap(i, j);
        }
        a.truncate(keep);
        a.iter().map(|s| format!(" {s}")).collect()
    }

    fn inline(&mut self, depth: u32) {
        match self.rng.random_range(0..6) {
            0 | 1 => self.text_run(),
            2 => {
                self.html.push_str("<img src=\"p.png\" alt=\"an image\">");
                self.images += 1;
            }
            3 => {
                self.html.push_str("<script>var s = \"<b>hidden words</b>\";</script>");
                self.scripts += 1;
            }
            4 => self.html.push_str("<!-- comment words --><style>p { color: red }</style>"),
            _ => {
                let tag = ["span", "b", "em", "i", "code"][self.rng.random_range(0..5)];
                let attrs = self.attrs();
                self.html.push_str(&format!("<{tag}{attrs}>"));
                if depth < 4 {
                    for _ in 0..self.rng.random_range(0..3) {
                        self.inline(depth + 1);
                    }
                } else {
                    self.text_run();
                }
                self.html.push_str(&format!("</{tag}>"));
            }
        }
    }

    fn block(&mut self, depth: u32) {
        match self.rng.random_range(0..5) {
            0 => {
                let attrs = self.attrs();
                self.html.push_str(&format!("<p{attrs}>"));
                self.text.push(' ');
                for _ in 0..self.rng.random_range(0..4) {
                    self.inline(depth + 1);
                }
                self.html.push_str("</p>");
                self.text.push(' ');
            }
            1 => {
                self.html.push_str("<br>");
                self.text.push(' ');
            }
            2 => {
                self.html.push_str("<a href=\"/x\">");
                self.text_run();
                self.html.push_str("</a>");
            }
            3 if depth < 5 => {
                let tag = ["div", "section", "blockquote", "article", "footer"][self.rng.random_range(0..5)];
                self.html.push_str(&format!("<{tag}>"));
                self.text.push(' ');
                for _ in 0..self.rng.random_range(0..4) {
                    self.block(depth + 1);
                }
                self.html.push_str(&format!("</{tag}>"));
                self.text.push(' ');
            }
            _ => self.inline(depth),
        }
    }
}

pub fn random_page<R: Rng>(rng: &mut R) -> GeneratedPage {
    let mut g = PageGen {
        rng,
        html: String::from("<!DOCTYPE html><html><head><title>"),
        text: String::from(" "),
        images: 0,
        scripts: 0,
    };
    g.text_run();
    g.html.push_str("</title></head><body>");
    g.text.push(' ');
    for _ in 0..g.rng.random_range(0..8) {
        g.block(0);
    }
    g.html.push_str("</body></html>");
    let expected = PageStats {
        letters: g.text.chars().filter(|c| c.is_alphabetic()).count() as u64,
        words: g.text.split_whitespace().count() as u64,
        images: g.images,
        scripts: g.scripts,
    };
    GeneratedPage { html: g.html, expected }
}

// ---- simulation ----

/// Defaults, except every seed of an instance is used.
pub fn sim_settings() -> RunSettings {
    RunSettings {
        seed_batch_size: usize::MAX,
        ..RunSettings::default()
    }
}

pub struct SimRun {
    pub dir: tempfile::TempDir,
    pub store: Store,
    pub net: Arc<SimNet>,
    pub summary: RunSummary,
}

pub fn run_net(net: SimNet, instances: usize, settings: &RunSettings) -> SimRun {
    let dir = tempfile::tempdir().unwrap();
    let store = Store::open(&dir.path().join("crawl.redb"), StoreOptions::default()).unwrap();
    let net = Arc::new(net);
    let summary = run_simulation(net.clone(), &store, settings, instances, DetectorChoice::Simnet, None).unwrap();
    SimRun { dir, store, net, summary }
}
