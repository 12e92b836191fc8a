//! Per-snapshot line-of-sight graphs and their metric suite: degree,
//! diameter of the largest connected component, and mean clustering
//! coefficient, aggregated over the measurement period.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;

use crate::model::{DistanceMode, RadioRange, Snapshot, TraceSet, UserId};

/// Undirected line-of-sight graph at one instant. Nodes are the users with
/// known positions; an edge exists iff the pair is strictly within range.
///
/// Adjacency is stored as packed bit rows, which keeps the all-pairs BFS
/// and triangle counting fast on day-scale traces.
#[derive(Debug, Clone)]
pub struct SnapshotGraph {
    t: u64,
    nodes: Vec<UserId>,
    words: usize,
    adj: Vec<u64>,
}

impl SnapshotGraph {
    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Node ids, sorted lexicographically.
    pub fn node_ids(&self) -> &[UserId] {
        &self.nodes
    }

    pub fn index_of(&self, user: &UserId) -> Option<usize> {
        self.nodes.binary_search(user).ok()
    }

    fn row(&self, i: usize) -> &[u64] {
        &self.adj[i * self.words..(i + 1) * self.words]
    }

    fn set_edge(&mut self, i: usize, j: usize) {
        self.adj[i * self.words + j / 64] |= 1 << (j % 64);
        self.adj[j * self.words + i / 64] |= 1 << (i % 64);
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adj[i * self.words + j / 64] & (1 << (j % 64)) != 0
    }

    pub fn has_edge_ids(&self, u: &UserId, v: &UserId) -> bool {
        match (self.index_of(u), self.index_of(v)) {
            (Some(i), Some(j)) => self.has_edge(i, j),
            _ => false,
        }
    }

    pub fn degree(&self, i: usize) -> usize {
        self.row(i).iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn edge_count(&self) -> usize {
        let total: usize = (0..self.node_count()).map(|i| self.degree(i)).sum();
        total / 2
    }

    /// Edges as (u, v) id pairs with u < v.
    pub fn edges(&self) -> Vec<(UserId, UserId)> {
        let mut out = Vec::new();
        for i in 0..self.node_count() {
            for j in (i + 1)..self.node_count() {
                if self.has_edge(i, j) {
                    out.push((self.nodes[i].clone(), self.nodes[j].clone()));
                }
            }
        }
        out
    }
}

/// Builds the line-of-sight graph of one snapshot at range `r`.
pub fn build_graph(snapshot: &Snapshot, r: RadioRange, mode: DistanceMode) -> SnapshotGraph {
    let mut nodes = Vec::new();
    let mut positions = Vec::new();
    for (user, pos) in snapshot.known_positions() {
        nodes.push(user.clone());
        positions.push(pos);
    }
    let n = nodes.len();
    let words = n.div_ceil(64).max(1);
    let mut g = SnapshotGraph {
        t: snapshot.t,
        nodes,
        words,
        adj: vec![0; n * words],
    };
    for i in 0..n {
        for j in (i + 1)..n {
            if mode.in_range(positions[i], positions[j], r) {
                g.set_edge(i, j);
            }
        }
    }
    g
}

/// Degree per node; isolated nodes report 0.
pub fn degrees(g: &SnapshotGraph) -> BTreeMap<UserId, usize> {
    (0..g.node_count())
        .map(|i| (g.node_ids()[i].clone(), g.degree(i)))
        .collect()
}

fn components(g: &SnapshotGraph) -> Vec<Vec<usize>> {
    let n = g.node_count();
    let mut seen = vec![false; n];
    let mut comps = Vec::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        let mut comp = Vec::new();
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(i) = stack.pop() {
            comp.push(i);
            for (w, &bits) in g.row(i).iter().enumerate() {
                let mut bits = bits;
                while bits != 0 {
                    let j = w * 64 + bits.trailing_zeros() as usize;
                    bits &= bits - 1;
                    if !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        comp.sort_unstable();
        comps.push(comp);
    }
    comps
}

fn largest_component_indices(g: &SnapshotGraph) -> Vec<usize> {
    // components are discovered in order of their smallest node, so the
    // first maximum-size component wins ties deterministically
    let mut best: Vec<usize> = Vec::new();
    for comp in components(g) {
        if comp.len() > best.len() {
            best = comp;
        }
    }
    best
}

/// Nodes of the maximum-cardinality connected component; ties go to the
/// component containing the lexicographically smallest user id.
pub fn largest_component(g: &SnapshotGraph) -> BTreeSet<UserId> {
    largest_component_indices(g)
        .into_iter()
        .map(|i| g.node_ids()[i].clone())
        .collect()
}

/// Longest shortest path within the largest connected component, in hops.
/// `None` for the empty graph.
pub fn diameter(g: &SnapshotGraph) -> Option<usize> {
    let lcc = largest_component_indices(g);
    if lcc.is_empty() {
        return None;
    }
    let words = g.words;
    let mut visited = vec![0u64; words];
    let mut frontier = vec![0u64; words];
    let mut next = vec![0u64; words];
    let mut max_ecc = 0;
    for &src in &lcc {
        visited.iter_mut().for_each(|w| *w = 0);
        frontier.iter_mut().for_each(|w| *w = 0);
        visited[src / 64] |= 1 << (src % 64);
        frontier[src / 64] |= 1 << (src % 64);
        let mut ecc = 0;
        loop {
            next.iter_mut().for_each(|w| *w = 0);
            for (w, &word) in frontier.iter().enumerate() {
                let mut bits = word;
                while bits != 0 {
                    let i = w * 64 + bits.trailing_zeros() as usize;
                    bits &= bits - 1;
                    for (k, &row) in g.row(i).iter().enumerate() {
                        next[k] |= row;
                    }
                }
            }
            let mut any = false;
            for w in 0..words {
                next[w] &= !visited[w];
                visited[w] |= next[w];
                any |= next[w] != 0;
            }
            if !any {
                break;
            }
            ecc += 1;
            std::mem::swap(&mut frontier, &mut next);
        }
        max_ecc = max_ecc.max(ecc);
    }
    Some(max_ecc)
}

/// How nodes of degree < 2 enter the mean clustering coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LeafRule {
    /// Exclude them from the mean (Watts–Strogatz convention).
    #[default]
    Exclude,
    /// Count them with coefficient 0.
    CountAsZero,
}

/// Mean local clustering coefficient over eligible nodes, or `None` when
/// no node is eligible.
pub fn mean_clustering(g: &SnapshotGraph) -> Option<f64> {
    mean_clustering_with(g, LeafRule::Exclude)
}

pub fn mean_clustering_with(g: &SnapshotGraph, rule: LeafRule) -> Option<f64> {
    let mut sum = 0.0;
    let mut eligible = 0usize;
    for i in 0..g.node_count() {
        let d = g.degree(i);
        if d < 2 {
            if rule == LeafRule::CountAsZero {
                eligible += 1;
            }
            continue;
        }
        // each edge among neighbors is counted from both endpoints
        let mut twice_links = 0usize;
        let row_i = g.row(i);
        for (w, &bits) in row_i.iter().enumerate() {
            let mut bits = bits;
            while bits != 0 {
                let j = w * 64 + bits.trailing_zeros() as usize;
                bits &= bits - 1;
                twice_links += row_i
                    .iter()
                    .zip(g.row(j))
                    .map(|(a, b)| (a & b).count_ones() as usize)
                    .sum::<usize>();
            }
        }
        let links = twice_links / 2;
        let possible = d * (d - 1) / 2;
        sum += links as f64 / possible as f64;
        eligible += 1;
    }
    if eligible == 0 {
        None
    } else {
        Some(sum / eligible as f64)
    }
}

/// Metrics of one snapshot graph.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotMetrics {
    pub t: u64,
    pub node_count: usize,
    pub edge_count: usize,
    pub lcc_size: usize,
    pub diameter: Option<usize>,
    pub mean_clustering: Option<f64>,
}

/// Pooled graph metrics over a whole trace at one range.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GraphMetricsAggregate {
    pub per_snapshot: Vec<SnapshotMetrics>,
    /// One sample per (snapshot, node) pair.
    pub degree_samples: Vec<u64>,
    /// One sample per snapshot with a non-empty graph.
    pub diameter_samples: Vec<u64>,
    /// One sample per snapshot with at least one eligible node.
    pub clustering_samples: Vec<f64>,
    /// Snapshots whose graph had no nodes.
    pub empty_snapshots: usize,
    /// Non-empty snapshots with no clustering value.
    pub clustering_absent: usize,
}

/// Computes per-snapshot graph metrics over the whole trace and pools the
/// samples. Snapshots are processed in parallel; results are merged in
/// snapshot order, so output is deterministic.
pub fn aggregate_graph_metrics(
    trace: &TraceSet,
    r: RadioRange,
    mode: DistanceMode,
    rule: LeafRule,
) -> GraphMetricsAggregate {
    let per_snapshot: Vec<(SnapshotMetrics, Vec<u64>)> = trace
        .snapshots()
        .par_iter()
        .map(|snap| {
            let g = build_graph(snap, r, mode);
            let degs: Vec<u64> = (0..g.node_count()).map(|i| g.degree(i) as u64).collect();
            let metrics = SnapshotMetrics {
                t: snap.t,
                node_count: g.node_count(),
                edge_count: g.edge_count(),
                lcc_size: largest_component_indices(&g).len(),
                diameter: diameter(&g),
                mean_clustering: mean_clustering_with(&g, rule),
            };
            (metrics, degs)
        })
        .collect();

    let mut agg = GraphMetricsAggregate::default();
    for (metrics, degs) in per_snapshot {
        agg.degree_samples.extend(degs);
        match metrics.diameter {
            Some(d) => agg.diameter_samples.push(d as u64),
            None => agg.empty_snapshots += 1,
        }
        match metrics.mean_clustering {
            Some(cc) => agg.clustering_samples.push(cc),
            None if metrics.node_count > 0 => agg.clustering_absent += 1,
            None => {}
        }
        agg.per_snapshot.push(metrics);
    }
    agg
}
