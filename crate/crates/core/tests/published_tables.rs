mod common;

use std::fs;

use eepcrawl::config::{load_seeds, partition_seeds, CrawlConfig};
use eepcrawl::graphlab::{language_table, Direction};
use eepcrawl::model::{Source, Status};
use eepcrawl::store::StatusAggregate;

use common::*;

#[test]
fn source_status_csv_reproduces_table_cells() {
    let agg = StatusAggregate::from_counts(table2_cells());
    assert_eq!(agg.total, 54_974);
    assert_eq!(agg.source_total(Source::Seed), 3_898);
    assert_eq!(agg.source_total(Source::Floodfill), 50_784);
    assert_eq!(agg.source_total(Source::Discovered), 292);
    let mut csv = Vec::new();
    agg.write_csv(&mut csv).unwrap();
    let csv = String::from_utf8(csv).unwrap();
    assert!(csv.contains("FLOODFILL,DISCARDED,38012,74.85,69.15\n"), "{csv}");
    assert!(csv.contains("SEED,DISCARDED,3768,96.66,6.85\n"), "{csv}");
    assert!(csv.contains("SEED,DISCOVERING,0,0.00,0.00\n"), "{csv}");
}

#[test]
fn finished_share_of_all_services_is_about_one_and_a_half_percent() {
    let agg = StatusAggregate::from_counts(table2_cells());
    let finished: u64 = agg.rows.iter().filter(|r| r.status == Status::Finished).map(|r| r.count).sum();
    assert_eq!(finished, 787);
    assert!((100.0 * finished as f64 / agg.total as f64 - 1.43).abs() < 0.01);
}

#[test]
fn top_k_lists_follow_the_tables() {
    let g = top_degree_graph();
    for (rows, dir) in [(table4(), Direction::Out), (table5(), Direction::In)] {
        let got = g.top_k(dir, rows.len());
        let got_degrees: Vec<usize> = got.iter().map(|e| e.degree).collect();
        let want_degrees: Vec<usize> = rows.iter().map(|r| r.degree).collect();
        assert_eq!(got_degrees, want_degrees);
        for e in &got {
            let row = rows.iter().find(|r| r.id == e.id.as_str()).expect("listed site");
            assert_eq!((e.status, e.source), (row.status, row.source), "{}", row.id);
        }
        // ties come out by id
        for w in got.windows(2) {
            assert!(w[0].degree > w[1].degree || w[0].id < w[1].id);
        }
    }
}

#[test]
fn top_k_larger_than_graph_returns_everything_sorted() {
    let g = top_degree_graph();
    let all = g.top_k(Direction::Out, g.node_count() + 10);
    assert_eq!(all.len(), g.node_count());
    assert!(all.windows(2).all(|w| w[0].degree >= w[1].degree));
}

#[test]
fn language_table_matches_published_percentages() {
    let table = language_table(&language_results());
    assert_eq!(table.rows[0].language, "en");
    assert!((table.rows[0].pct - 96.31).abs() <= 0.01);
    for row in table6() {
        let got = table.rows.iter().find(|r| r.language == row.language).unwrap();
        assert_eq!(got.count, row.count);
        assert!((got.pct - row.pct).abs() <= 0.01, "{}: {} vs {}", row.language, got.pct, row.pct);
    }
    let sum: f64 = table.rows.iter().map(|r| r.pct).sum();
    assert!((sum - 100.0).abs() <= 0.1);
    assert_eq!(table.unknown, 0);
}

#[test]
fn ten_instances_split_the_seed_list_evenly() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("seeds.txt");
    let mut text = String::from("# seed list\n\n");
    for i in 0..3_938 {
        text.push_str(&format!("http://site{i}.i2p/\n"));
    }
    text.push_str("http://site7.i2p/index.html\nhttp://example.com/\n");
    fs::write(&path, text).unwrap();
    let seeds = load_seeds(&path).unwrap();
    assert_eq!(seeds.len(), 3_938);
    let mut sizes: Vec<usize> = partition_seeds(&seeds, 10).iter().map(Vec::len).collect();
    sizes.sort_unstable();
    assert_eq!(sizes, [393, 393, 394, 394, 394, 394, 394, 394, 394, 394]);
}

#[test]
fn defaults_are_the_configuration_table() {
    let c = CrawlConfig::default();
    assert_eq!(c.max_ongoing_spiders, 10);
    assert_eq!(c.max_crawling_attempts_on_error, 2);
    assert_eq!(c.max_discovery_attempts, 720);
    assert_eq!(c.max_discovery_duration, 43_200);
    assert_eq!(c.max_discovery_single_threads, 50);
    assert_eq!(c.http_timeout, 30);
    assert_eq!(c.initial_seeds.to_str(), Some("seeds.txt"));
    assert_eq!(c.initial_seeds_batch_size, 394);
    let text = c.to_toml().unwrap();
    assert_eq!(CrawlConfig::parse(&text, []).unwrap(), c);
    for key in ["max_ongoing_spiders = 10", "max_discovery_attempts = 720", "max_discovery_duration = 43200"] {
        assert!(text.contains(key), "{text}");
    }
}
