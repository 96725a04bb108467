use std::collections::BTreeSet;

use rand::seq::{index, SliceRandom};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric, Poisson};

use super::churn::stream_rng;
use super::spec::{SimNetSpec, Topology};

pub(crate) const SOURCE_SHARE: f64 = 0.10;
pub(crate) const SINK_SHARE: f64 = 0.12;
pub(crate) const CONNECTED_SHARE: f64 = 0.12;

/// Out-degree of the largest link directory in the measured web (385) over
/// the smallest node count consistent with it (≈2,000 nodes when only ~24%
/// of nodes have in-links).
const DIRECTORY_OUT_PER_SITE: f64 = 385.0 / 2_000.0;

pub(crate) struct GeneratedTopology {
    pub edges: Vec<(usize, usize)>,
    /// Planted directory site and its out-degree.
    pub directory: Option<(usize, usize)>,
}

pub(crate) fn generate(spec: &SimNetSpec) -> GeneratedTopology {
    let mut rng = stream_rng(spec.seed, "topology", 0);
    let n = spec.n_sites;
    match &spec.topology {
        Topology::Explicit { edges } => {
            let set: BTreeSet<(usize, usize)> = edges.iter().copied().collect();
            GeneratedTopology {
                edges: set.into_iter().collect(),
                directory: None,
            }
        }
        Topology::Random {
            mean_out_degree,
            max_out_degree,
        } => GeneratedTopology {
            edges: random_edges(&mut rng, n, *mean_out_degree, *max_out_degree),
            directory: None,
        },
        Topology::PaperShape => paper_shape(&mut rng, n),
    }
}

fn random_edges(rng: &mut ChaCha8Rng, n: usize, mean: f64, max_out: usize) -> Vec<(usize, usize)> {
    let cap = max_out.min(n.saturating_sub(1));
    let poisson = (mean > 0.0).then(|| Poisson::new(mean).expect("positive mean"));
    let mut edges = Vec::new();
    for u in 0..n {
        let k = poisson
            .as_ref()
            .map(|p| p.sample(rng) as usize)
            .unwrap_or(0)
            .min(cap);
        for j in index::sample(rng, n - 1, k) {
            let v = if j >= u { j + 1 } else { j };
            edges.push((u, v));
        }
    }
    edges.sort_unstable();
    edges
}

pub(crate) fn class_quotas(n: usize) -> (usize, usize, usize) {
    let q = |share: f64| (share * n as f64).round() as usize;
    (q(SOURCE_SHARE), q(SINK_SHARE), q(CONNECTED_SHARE))
}

fn paper_shape(rng: &mut ChaCha8Rng, n: usize) -> GeneratedTopology {
    let (n_src, n_sink, n_conn) = class_quotas(n);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let sources = &order[..n_src];
    let sinks = &order[n_src..n_src + n_sink];
    let connected = &order[n_src + n_sink..n_src + n_sink + n_conn];
    let mut targets: Vec<usize> = sinks.iter().chain(connected).copied().collect();
    targets.sort_unstable();

    let mut edges: BTreeSet<(usize, usize)> = BTreeSet::new();
    let extra = Geometric::new(0.5).expect("valid p");
    let link_out = |rng: &mut ChaCha8Rng, u: usize, k: usize, edges: &mut BTreeSet<(usize, usize)>| {
        let pool: Vec<usize> = targets.iter().copied().filter(|&t| t != u).collect();
        let k = k.min(pool.len());
        for j in index::sample(rng, pool.len(), k) {
            edges.insert((u, pool[j]));
        }
    };

    let directory = sources[0];
    let directory_out = ((DIRECTORY_OUT_PER_SITE * n as f64).round() as usize).clamp(1, targets.len());
    link_out(rng, directory, directory_out, &mut edges);
    for &u in sources[1..].iter().chain(connected) {
        let k = 1 + extra.sample(rng) as usize;
        link_out(rng, u, k, &mut edges);
    }

    // every sink and connected site needs at least one in-link; the
    // directory's out-degree stays as planted
    let feeders: Vec<usize> = sources[1..].iter().chain(connected).copied().collect();
    let mut has_in: BTreeSet<usize> = edges.iter().map(|&(_, v)| v).collect();
    for &t in &targets {
        if has_in.contains(&t) {
            continue;
        }
        let candidates: Vec<usize> = feeders.iter().copied().filter(|&u| u != t).collect();
        let u = if candidates.is_empty() {
            directory
        } else {
            candidates[rng.random_range(0..candidates.len())]
        };
        edges.insert((u, t));
        has_in.insert(t);
    }

    let directory_out = edges.iter().filter(|&&(u, _)| u == directory).count();
    GeneratedTopology {
        edges: edges.into_iter().collect(),
        directory: Some((directory, directory_out)),
    }
}
