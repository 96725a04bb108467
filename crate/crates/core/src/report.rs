//! Offline analysis of a store: one CSV per table or figure, the link graph
//! as GraphML and DOT, raw dumps and a plain-text summary.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::graphlab::{
    build_graph, language_table, size_histogram, sma, to_dot, to_graphml, Direction, GraphError, Histogram, LinkGraph,
    NodeClass, TopEntry,
};
use crate::model::{EepsiteRecord, Status};
use crate::spider::CrawlResult;
use crate::store::{daily_series, StatusAggregate, Store, StoreError, StoreOptions};

pub const SMA_WINDOW: usize = 5;
pub const TOP_K: usize = 10;
pub const NEIGHBORHOOD_HOPS: u32 = 3;

/// Files written by [`analyze`], in write order.
pub const BUNDLE: &[&str] = &[
    "table2_source_status.csv",
    "fig4_daily_services.csv",
    "fig5_discovery_attempts.csv",
    "fig6_content_hist.csv",
    "fig7_pages_hist.csv",
    "fig7_pages_cdf.csv",
    "fig8_degree_distribution.csv",
    "table3_largest_sites.csv",
    "table4_top_out_degree.csv",
    "table5_top_in_degree.csv",
    "table6_languages.csv",
    "node_classes.csv",
    "class_shares.csv",
    "fig9_neighborhood.csv",
    "graph.graphml",
    "graph.dot",
    "records.jsonl",
    "crawl_results.jsonl",
    "summary.txt",
];

#[derive(Debug, Error)]
pub enum ReportError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
    #[error("json output: {0}")]
    Json(#[from] serde_json::Error),
}

/// Everything the analysis reads, loaded once.
pub struct Snapshot {
    pub records: Vec<EepsiteRecord>,
    pub results: Vec<CrawlResult>,
    pub graph: LinkGraph,
}

impl Snapshot {
    pub fn load(store_path: &Path) -> Result<Snapshot, ReportError> {
        let store = Store::open_existing(store_path, StoreOptions::default())?;
        Snapshot::from_store(&store)
    }

    pub fn from_store(store: &Store) -> Result<Snapshot, ReportError> {
        let records = store.records()?;
        let results = store.results()?;
        let graph = build_graph(&results, &records)?;
        Ok(Snapshot { records, results, graph })
    }
}

struct Out<'a> {
    dir: &'a Path,
}

impl Out<'_> {
    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn io<T>(&self, name: &str, r: io::Result<T>) -> Result<T, ReportError> {
        r.map_err(|source| ReportError::Io { path: self.path(name), source })
    }

    fn csv(&self, name: &str) -> Result<csv::Writer<File>, ReportError> {
        let f = self.io(name, File::create(self.path(name)))?;
        Ok(csv::Writer::from_writer(f))
    }

    fn text(&self, name: &str, body: &str) -> Result<(), ReportError> {
        self.io(name, fs::write(self.path(name), body))
    }

    fn jsonl<T: serde::Serialize>(&self, name: &str, items: &[T]) -> Result<(), ReportError> {
        let mut w = BufWriter::new(self.io(name, File::create(self.path(name)))?);
        for item in items {
            serde_json::to_writer(&mut w, item)?;
            self.io(name, w.write_all(b"\n"))?;
        }
        self.io(name, w.flush())
    }
}

fn opt(x: Option<u64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn write_hist(w: &mut csv::Writer<File>, metric: &str, h: &Histogram) -> Result<(), ReportError> {
    for b in &h.buckets {
        w.write_record([metric.to_string(), opt(b.above), opt(b.up_to), b.count.to_string()])?;
    }
    Ok(())
}

fn write_top(out: &Out, name: &str, rows: &[TopEntry]) -> Result<(), ReportError> {
    let mut w = out.csv(name)?;
    w.write_record(["rank", "id", "degree", "status", "source"])?;
    for (i, e) in rows.iter().enumerate() {
        w.write_record([
            (i + 1).to_string(),
            e.id.to_string(),
            e.degree.to_string(),
            e.status.as_str().to_string(),
            e.source.as_str().to_string(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Writes the full bundle for the store at `store_path` into `out_dir`.
pub fn analyze(store_path: &Path, out_dir: &Path) -> Result<Snapshot, ReportError> {
    let snap = Snapshot::load(store_path)?;
    write_bundle(&snap, out_dir)?;
    Ok(snap)
}

pub fn write_bundle(snap: &Snapshot, out_dir: &Path) -> Result<(), ReportError> {
    let out = Out { dir: out_dir };
    out.io("", fs::create_dir_all(out_dir))?;
    let Snapshot { records, results, graph } = snap;

    let aggregate = StatusAggregate::from_records(records);
    let f = out.io(BUNDLE[0], File::create(out.path(BUNDLE[0])))?;
    aggregate.write_csv(f)?;

    let mut w = out.csv("fig4_daily_services.csv")?;
    w.write_record(["date", "services_observed", "services_sma5", "eepsites_finished", "eepsites_sma5"])?;
    let daily = daily_series(records);
    if !daily.is_empty() {
        let observed: Vec<f64> = daily.iter().map(|d| d.services_observed as f64).collect();
        let finished: Vec<f64> = daily.iter().map(|d| d.eepsites_finished as f64).collect();
        let (so, sf) = (sma(&observed, SMA_WINDOW)?, sma(&finished, SMA_WINDOW)?);
        for (i, d) in daily.iter().enumerate() {
            w.write_record([
                d.date.to_string(),
                d.services_observed.to_string(),
                format!("{:.3}", so[i]),
                d.eepsites_finished.to_string(),
                format!("{:.3}", sf[i]),
            ])?;
        }
    }
    w.flush().map_err(csv::Error::from)?;

    let mut w = out.csv("fig5_discovery_attempts.csv")?;
    w.write_record(["attempts", "count"])?;
    let mut attempts = std::collections::BTreeMap::<u32, usize>::new();
    for r in records.iter().filter(|r| r.status == Status::Finished) {
        *attempts.entry(r.discovery_attempts).or_default() += 1;
    }
    for (a, n) in attempts {
        w.write_record([a.to_string(), n.to_string()])?;
    }
    w.flush().map_err(csv::Error::from)?;

    let sizes = size_histogram(results);
    let mut w = out.csv("fig6_content_hist.csv")?;
    w.write_record(["metric", "bucket_above", "bucket_up_to", "count"])?;
    write_hist(&mut w, "letters", &sizes.letters)?;
    write_hist(&mut w, "words", &sizes.words)?;
    write_hist(&mut w, "images", &sizes.images)?;
    write_hist(&mut w, "scripts", &sizes.scripts)?;
    w.flush().map_err(csv::Error::from)?;

    let mut w = out.csv("fig7_pages_hist.csv")?;
    w.write_record(["bucket_above", "bucket_up_to", "count", "cdf_at_upper"])?;
    for b in &sizes.pages.buckets {
        let cdf = b.up_to.map_or(1.0, |u| sizes.pages.cdf_at(u));
        let cdf = if sizes.pages.total == 0 { 0.0 } else { cdf };
        w.write_record([opt(b.above), opt(b.up_to), b.count.to_string(), format!("{cdf:.6}")])?;
    }
    w.flush().map_err(csv::Error::from)?;

    let mut w = out.csv("fig7_pages_cdf.csv")?;
    w.write_record(["pages", "cdf"])?;
    for (v, c) in &sizes.pages.cdf {
        w.write_record([v.to_string(), format!("{c:.6}")])?;
    }
    w.flush().map_err(csv::Error::from)?;

    let mut w = out.csv("fig8_degree_distribution.csv")?;
    w.write_record(["direction", "degree", "nodes"])?;
    for (label, dir) in [("out", Direction::Out), ("in", Direction::In)] {
        for (d, n) in graph.degree_distribution(dir) {
            w.write_record([label.to_string(), d.to_string(), n.to_string()])?;
        }
    }
    w.flush().map_err(csv::Error::from)?;

    let mut largest: Vec<&CrawlResult> = results.iter().collect();
    largest.sort_by(|a, b| b.page_count.cmp(&a.page_count).then_with(|| a.id.cmp(&b.id)));
    let mut w = out.csv("table3_largest_sites.csv")?;
    w.write_record(["rank", "id", "pages", "language"])?;
    for (i, r) in largest.iter().take(TOP_K).enumerate() {
        w.write_record([(i + 1).to_string(), r.id.to_string(), r.page_count.to_string(), r.language.as_str().to_string()])?;
    }
    w.flush().map_err(csv::Error::from)?;

    let top_out = graph.top_k(Direction::Out, TOP_K);
    let top_in = graph.top_k(Direction::In, TOP_K);
    write_top(&out, "table4_top_out_degree.csv", &top_out)?;
    write_top(&out, "table5_top_in_degree.csv", &top_in)?;

    let languages = language_table(results);
    let mut w = out.csv("table6_languages.csv")?;
    w.write_record(["language", "count", "pct"])?;
    for row in &languages.rows {
        w.write_record([row.language.clone(), row.count.to_string(), format!("{:.2}", row.pct)])?;
    }
    if languages.unknown > 0 {
        w.write_record(["UNKNOWN".to_string(), languages.unknown.to_string(), String::new()])?;
    }
    w.flush().map_err(csv::Error::from)?;

    let classes = graph.classify();
    let mut w = out.csv("node_classes.csv")?;
    w.write_record(["id", "in", "out", "class", "status", "source"])?;
    for (id, i, o) in graph.degrees() {
        let info = graph.info(id).expect("node of this graph");
        w.write_record([
            id.to_string(),
            i.to_string(),
            o.to_string(),
            classes.classes[id].as_str().to_string(),
            info.status.as_str().to_string(),
            info.source.as_str().to_string(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;

    let mut w = out.csv("class_shares.csv")?;
    w.write_record(["class", "nodes", "pct"])?;
    for c in NodeClass::ALL {
        w.write_record([c.as_str().to_string(), classes.count(c).to_string(), format!("{:.2}", classes.share(c))])?;
    }
    w.flush().map_err(csv::Error::from)?;

    let mut w = out.csv("fig9_neighborhood.csv")?;
    w.write_record(["root", "id", "hops", "status", "source"])?;
    if let Some(root) = top_out.first().filter(|e| e.degree > 0) {
        for (id, hops) in graph.khop_layers(&root.id, NEIGHBORHOOD_HOPS)? {
            let info = graph.info(&id).expect("node of this graph");
            w.write_record([
                root.id.to_string(),
                id.to_string(),
                hops.to_string(),
                info.status.as_str().to_string(),
                info.source.as_str().to_string(),
            ])?;
        }
    }
    w.flush().map_err(csv::Error::from)?;

    out.text("graph.graphml", &to_graphml(graph))?;
    out.text("graph.dot", &to_dot(graph))?;
    out.jsonl("records.jsonl", records)?;
    out.jsonl("crawl_results.jsonl", results)?;

    let mut s = String::new();
    let _ = writeln!(s, "services: {}", records.len());
    let _ = writeln!(s, "crawled eepsites: {}", results.len());
    let _ = writeln!(s, "links: {}", graph.edge_count());
    let _ = writeln!(s, "pages <= 30: {:.2}%", 100.0 * sizes.pages.cdf_at(30));
    let _ = writeln!(s, "\nsource/status");
    for r in &aggregate.rows {
        let _ = writeln!(
            s,
            "  {:<10} {:<12} {:>8} {:>7.2}% {:>7.2}%",
            r.source.as_str(),
            r.status.as_str(),
            r.count,
            r.pct_within_source,
            r.pct_of_total
        );
    }
    let _ = writeln!(s, "\nnode classes");
    for c in NodeClass::ALL {
        let _ = writeln!(s, "  {:<10} {:>8} {:>7.2}%", c.as_str(), classes.count(c), classes.share(c));
    }
    for (title, rows) in [("largest out-degree", &top_out), ("largest in-degree", &top_in)] {
        let _ = writeln!(s, "\n{title}");
        for e in rows.iter() {
            let _ = writeln!(s, "  {:<60} {:>6} {} {}", e.id, e.degree, e.status.as_str(), e.source.as_str());
        }
    }
    let _ = writeln!(s, "\nlanguages");
    for row in &languages.rows {
        let _ = writeln!(s, "  {:<8} {:>6} {:>7.2}%", row.language, row.count, row.pct);
    }
    if languages.unknown > 0 {
        let _ = writeln!(s, "  {:<8} {:>6}", "UNKNOWN", languages.unknown);
    }
    out.text("summary.txt", &s)
}

/// Writes only `graph.graphml` and `graph.dot`.
pub fn export_graph(store_path: &Path, out_dir: &Path) -> Result<LinkGraph, ReportError> {
    let snap = Snapshot::load(store_path)?;
    let out = Out { dir: out_dir };
    out.io("", fs::create_dir_all(out_dir))?;
    out.text("graph.graphml", &to_graphml(&snap.graph))?;
    out.text("graph.dot", &to_dot(&snap.graph))?;
    Ok(snap.graph)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_store_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let err = analyze(&dir.path().join("nope.redb"), dir.path()).err().unwrap();
        assert!(matches!(err, ReportError::Store(StoreError::MissingStore(_))));
    }

    #[test]
    fn empty_store_gives_header_only_csvs() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.redb");
        drop(Store::open(&path, StoreOptions::default()).unwrap());
        let out = dir.path().join("out");
        analyze(&path, &out).unwrap();
        for name in BUNDLE {
            assert!(out.join(name).exists(), "{name}");
        }
        let t2 = fs::read_to_string(out.join("table2_source_status.csv")).unwrap();
        assert_eq!(t2.lines().count(), 1);
        let t4 = fs::read_to_string(out.join("table4_top_out_degree.csv")).unwrap();
        assert_eq!(t4, "rank,id,degree,status,source\n");
    }
}
