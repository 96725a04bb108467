//! Connectivity analytics over the directed eepsite graph: degrees, node
//! classes, top-k tables, k-hop neighborhoods, plus the series and
//! histogram helpers used by the reports.

mod export;
mod stats;

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{EepsiteId, EepsiteRecord, Source, Status};
use crate::spider::CrawlResult;

pub use export::{to_dot, to_graphml};
pub use stats::{
    default_edges, language_table, size_histogram, sma, Bucket, Histogram, LanguageRow, LanguageTable,
    SizeReport,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("crawl result for {0} has no matching record")]
    DanglingResult(EepsiteId),
    #[error("unknown node {0}")]
    UnknownNode(EepsiteId),
    #[error("empty series")]
    EmptySeries,
    #[error("window must be at least 1")]
    InvalidWindow,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum NodeClass {
    Source,
    Sink,
    Connected,
    Isolated,
}

impl NodeClass {
    pub const ALL: [NodeClass; 4] = [NodeClass::Source, NodeClass::Sink, NodeClass::Connected, NodeClass::Isolated];

    pub fn of(in_degree: usize, out_degree: usize) -> NodeClass {
        match (in_degree > 0, out_degree > 0) {
            (false, true) => NodeClass::Source,
            (true, false) => NodeClass::Sink,
            (true, true) => NodeClass::Connected,
            (false, false) => NodeClass::Isolated,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            NodeClass::Source => "SOURCE",
            NodeClass::Sink => "SINK",
            NodeClass::Connected => "CONNECTED",
            NodeClass::Isolated => "ISOLATED",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeInfo {
    pub status: Status,
    pub source: Source,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    In,
    Out,
}

/// Directed graph over eepsite ids. Node order is lexicographic by id and
/// edges are deduplicated, so two graphs built from the same data compare
/// equal.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LinkGraph {
    ids: Vec<EepsiteId>,
    info: Vec<NodeInfo>,
    index: HashMap<EepsiteId, usize>,
    out: Vec<Vec<usize>>,
    inn: Vec<Vec<usize>>,
    edge_count: usize,
}

/// Builds the graph from crawl output.
///
/// Every recorded id becomes a node. Link targets that were never recorded
/// (possible with hand-made inputs, never after a run) join as
/// `DISCOVERING`/`DISCOVERED`, which is how a run would have inserted them.
pub fn build_graph(results: &[CrawlResult], records: &[EepsiteRecord]) -> Result<LinkGraph, GraphError> {
    let mut nodes: BTreeMap<EepsiteId, NodeInfo> = records
        .iter()
        .map(|r| {
            (
                r.id.clone(),
                NodeInfo {
                    status: r.status,
                    source: r.source,
                },
            )
        })
        .collect();
    let mut edges = BTreeSet::new();
    for result in results {
        if !nodes.contains_key(&result.id) {
            return Err(GraphError::DanglingResult(result.id.clone()));
        }
        for v in &result.out_links {
            if *v != result.id {
                edges.insert((result.id.clone(), v.clone()));
            }
        }
    }
    for (_, v) in &edges {
        nodes.entry(v.clone()).or_insert(NodeInfo {
            status: Status::Discovering,
            source: Source::Discovered,
        });
    }
    Ok(LinkGraph::from_parts(nodes, edges))
}

impl LinkGraph {
    /// Graph from explicit nodes and edges; self-loops are dropped and
    /// endpoints missing from `nodes` are added as in [`build_graph`].
    pub fn from_parts(
        mut nodes: BTreeMap<EepsiteId, NodeInfo>,
        edges: impl IntoIterator<Item = (EepsiteId, EepsiteId)>,
    ) -> LinkGraph {
        let edges: BTreeSet<(EepsiteId, EepsiteId)> = edges.into_iter().filter(|(u, v)| u != v).collect();
        for (u, v) in &edges {
            for id in [u, v] {
                nodes.entry(id.clone()).or_insert(NodeInfo {
                    status: Status::Discovering,
                    source: Source::Discovered,
                });
            }
        }
        let ids: Vec<EepsiteId> = nodes.keys().cloned().collect();
        let info: Vec<NodeInfo> = nodes.values().copied().collect();
        let index: HashMap<EepsiteId, usize> = ids.iter().cloned().enumerate().map(|(i, id)| (id, i)).collect();
        let mut out = vec![Vec::new(); ids.len()];
        let mut inn = vec![Vec::new(); ids.len()];
        for (u, v) in &edges {
            let (u, v) = (index[u], index[v]);
            out[u].push(v);
            inn[v].push(u);
        }
        for list in inn.iter_mut() {
            list.sort_unstable();
        }
        LinkGraph {
            ids,
            info,
            index,
            out,
            inn,
            edge_count: edges.len(),
        }
    }

    pub fn node_count(&self) -> usize {
        self.ids.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn nodes(&self) -> impl Iterator<Item = (&EepsiteId, NodeInfo)> + '_ {
        self.ids.iter().zip(self.info.iter().copied())
    }

    pub fn contains(&self, id: &EepsiteId) -> bool {
        self.index.contains_key(id)
    }

    pub fn info(&self, id: &EepsiteId) -> Option<NodeInfo> {
        self.index.get(id).map(|&i| self.info[i])
    }

    /// Edges in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (&EepsiteId, &EepsiteId)> + '_ {
        self.out
            .iter()
            .enumerate()
            .flat_map(move |(u, vs)| vs.iter().map(move |&v| (&self.ids[u], &self.ids[v])))
    }

    pub fn edge_set(&self) -> BTreeSet<(EepsiteId, EepsiteId)> {
        self.edges().map(|(u, v)| (u.clone(), v.clone())).collect()
    }

    pub fn successors(&self, id: &EepsiteId) -> Result<impl Iterator<Item = &EepsiteId> + '_, GraphError> {
        let i = self.lookup(id)?;
        Ok(self.out[i].iter().map(move |&v| &self.ids[v]))
    }

    fn lookup(&self, id: &EepsiteId) -> Result<usize, GraphError> {
        self.index.get(id).copied().ok_or_else(|| GraphError::UnknownNode(id.clone()))
    }

    /// `(in, out)` degree.
    pub fn degree(&self, id: &EepsiteId) -> Result<(usize, usize), GraphError> {
        let i = self.lookup(id)?;
        Ok((self.inn[i].len(), self.out[i].len()))
    }

    pub fn degrees(&self) -> impl Iterator<Item = (&EepsiteId, usize, usize)> + '_ {
        self.ids
            .iter()
            .enumerate()
            .map(move |(i, id)| (id, self.inn[i].len(), self.out[i].len()))
    }

    pub fn classify(&self) -> Classification {
        let classes: BTreeMap<EepsiteId, NodeClass> = self
            .degrees()
            .map(|(id, i, o)| (id.clone(), NodeClass::of(i, o)))
            .collect();
        let mut counts: BTreeMap<NodeClass, usize> = NodeClass::ALL.iter().map(|&c| (c, 0)).collect();
        for c in classes.values() {
            *counts.entry(*c).or_default() += 1;
        }
        Classification { classes, counts }
    }

    /// Highest in- or out-degree nodes, ties by id.
    pub fn top_k(&self, direction: Direction, k: usize) -> Vec<TopEntry> {
        let mut rows: Vec<TopEntry> = (0..self.ids.len())
            .map(|i| TopEntry {
                id: self.ids[i].clone(),
                degree: match direction {
                    Direction::In => self.inn[i].len(),
                    Direction::Out => self.out[i].len(),
                },
                status: self.info[i].status,
                source: self.info[i].source,
            })
            .collect();
        rows.sort_by(|a, b| b.degree.cmp(&a.degree).then_with(|| a.id.cmp(&b.id)));
        rows.truncate(k);
        rows
    }

    /// Hop distance of every node reachable from `root` in `1..=k` steps
    /// along edge direction.
    pub fn khop_layers(&self, root: &EepsiteId, k: u32) -> Result<BTreeMap<EepsiteId, u32>, GraphError> {
        let r = self.lookup(root)?;
        let mut dist: HashMap<usize, u32> = HashMap::from([(r, 0)]);
        let mut queue = VecDeque::from([r]);
        while let Some(u) = queue.pop_front() {
            let d = dist[&u];
            if d == k {
                continue;
            }
            for &v in &self.out[u] {
                if let std::collections::hash_map::Entry::Vacant(e) = dist.entry(v) {
                    e.insert(d + 1);
                    queue.push_back(v);
                }
            }
        }
        Ok(dist
            .into_iter()
            .filter(|&(v, _)| v != r)
            .map(|(v, d)| (self.ids[v].clone(), d))
            .collect())
    }

    pub fn khop(&self, root: &EepsiteId, k: u32) -> Result<BTreeSet<EepsiteId>, GraphError> {
        Ok(self.khop_layers(root, k)?.into_keys().collect())
    }

    /// Number of nodes per degree value, ascending.
    pub fn degree_distribution(&self, direction: Direction) -> BTreeMap<usize, usize> {
        let mut dist = BTreeMap::new();
        for (_, i, o) in self.degrees() {
            let d = match direction {
                Direction::In => i,
                Direction::Out => o,
            };
            *dist.entry(d).or_default() += 1;
        }
        dist
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopEntry {
    pub id: EepsiteId,
    pub degree: usize,
    pub status: Status,
    pub source: Source,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Classification {
    pub classes: BTreeMap<EepsiteId, NodeClass>,
    pub counts: BTreeMap<NodeClass, usize>,
}

impl Classification {
    pub fn count(&self, class: NodeClass) -> usize {
        self.counts.get(&class).copied().unwrap_or(0)
    }

    /// Percentage of nodes in `class`; 0 for an empty graph.
    pub fn share(&self, class: NodeClass) -> f64 {
        let total = self.classes.len();
        if total == 0 {
            0.0
        } else {
            100.0 * self.count(class) as f64 / total as f64
        }
    }
}
