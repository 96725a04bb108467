use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::GraphError;
use crate::spider::CrawlResult;

/// Simple moving average. Positions before the first full window get the
/// mean of the prefix seen so far.
pub fn sma(series: &[f64], window: usize) -> Result<Vec<f64>, GraphError> {
    if window == 0 {
        return Err(GraphError::InvalidWindow);
    }
    if series.is_empty() {
        return Err(GraphError::EmptySeries);
    }
    Ok((0..series.len())
        .map(|i| {
            let lo = (i + 1).saturating_sub(window);
            let slice = &series[lo..=i];
            slice.iter().sum::<f64>() / slice.len() as f64
        })
        .collect())
}

/// `0, 1, 2, 4, ..., 2^max_exp`.
pub fn default_edges(max_exp: u32) -> Vec<u64> {
    std::iter::once(0).chain((0..=max_exp).map(|e| 1u64 << e)).collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bucket {
    /// Exclusive lower bound; `None` for the first bucket.
    pub above: Option<u64>,
    /// Inclusive upper bound; `None` for the overflow bucket.
    pub up_to: Option<u64>,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub buckets: Vec<Bucket>,
    /// `(value, fraction of samples <= value)` for every distinct value.
    pub cdf: Vec<(u64, f64)>,
    pub total: usize,
}

impl Histogram {
    /// `edges` must be ascending; bucket `i` holds values in
    /// `(edges[i-1], edges[i]]` and a final bucket holds the overflow.
    pub fn new(values: &[u64], edges: &[u64]) -> Histogram {
        let mut buckets: Vec<Bucket> = edges
            .iter()
            .enumerate()
            .map(|(i, &e)| Bucket {
                above: i.checked_sub(1).map(|j| edges[j]),
                up_to: Some(e),
                count: 0,
            })
            .collect();
        buckets.push(Bucket {
            above: edges.last().copied(),
            up_to: None,
            count: 0,
        });
        let mut freq: BTreeMap<u64, usize> = BTreeMap::new();
        for &v in values {
            let b = edges.partition_point(|&e| e < v);
            buckets[b].count += 1;
            *freq.entry(v).or_default() += 1;
        }
        let total = values.len();
        let mut running = 0;
        let cdf = freq
            .into_iter()
            .map(|(v, c)| {
                running += c;
                (v, running as f64 / total as f64)
            })
            .collect();
        Histogram { buckets, cdf, total }
    }

    /// Fraction of samples `<= x`; 0 for an empty histogram.
    pub fn cdf_at(&self, x: u64) -> f64 {
        let i = self.cdf.partition_point(|&(v, _)| v <= x);
        if i == 0 {
            0.0
        } else {
            self.cdf[i - 1].1
        }
    }

    pub fn nonempty(&self) -> impl Iterator<Item = &Bucket> + '_ {
        self.buckets.iter().filter(|b| b.count > 0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SizeReport {
    pub pages: Histogram,
    pub letters: Histogram,
    pub words: Histogram,
    pub images: Histogram,
    pub scripts: Histogram,
}

/// Page counts over powers of two up to 2^15, home-page content up to 2^20.
pub fn size_histogram(results: &[CrawlResult]) -> SizeReport {
    let column = |f: &dyn Fn(&CrawlResult) -> u64| results.iter().map(f).collect::<Vec<u64>>();
    let content = default_edges(20);
    SizeReport {
        pages: Histogram::new(&column(&|r| r.page_count as u64), &default_edges(15)),
        letters: Histogram::new(&column(&|r| r.home_stats.letters), &content),
        words: Histogram::new(&column(&|r| r.home_stats.words), &content),
        images: Histogram::new(&column(&|r| r.home_stats.images), &content),
        scripts: Histogram::new(&column(&|r| r.home_stats.scripts), &content),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LanguageRow {
    pub language: String,
    pub count: usize,
    pub pct: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LanguageTable {
    /// Descending by share, ties by code.
    pub rows: Vec<LanguageRow>,
    pub unknown: usize,
}

/// Share of crawled sites per detected language. Unknown detections are
/// counted apart and left out of the percentages.
pub fn language_table(results: &[CrawlResult]) -> LanguageTable {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    let mut unknown = 0;
    for r in results {
        if r.language.is_known() {
            *counts.entry(r.language.as_str()).or_default() += 1;
        } else {
            unknown += 1;
        }
    }
    let known: usize = counts.values().sum();
    let mut rows: Vec<LanguageRow> = counts
        .into_iter()
        .map(|(language, count)| LanguageRow {
            language: language.to_string(),
            count,
            pct: round2(100.0 * count as f64 / known as f64),
        })
        .collect();
    rows.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.language.cmp(&b.language)));
    LanguageTable { rows, unknown }
}

pub(crate) fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}
