//! Directed graphs with an ordered edge list, plus single-source shortest paths.
//!
//! The edge list order is a contract: edge weight vectors are always indexed
//! in the same order as [`DirectedGraph::edges`], both in memory and on disk.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Error, Result};

/// A simple directed graph: no self-loops, no duplicate directed edges.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DirectedGraph {
    n: usize,
    edges: Vec<(usize, usize)>,
}

impl DirectedGraph {
    pub fn new(n: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Graph("graph needs at least one vertex".into()));
        }
        let mut seen = HashSet::new();
        for &(a, b) in &edges {
            if a == b {
                return Err(Error::Graph(format!("self-loop at vertex {a}")));
            }
            if a >= n || b >= n {
                return Err(Error::Graph(format!(
                    "edge ({a}, {b}) out of range for {n} vertices"
                )));
            }
            if !seen.insert((a, b)) {
                return Err(Error::Graph(format!("duplicate edge ({a}, {b})")));
            }
        }
        Ok(Self { n, edges })
    }

    pub fn n_vertices(&self) -> usize {
        self.n
    }

    /// Number of directed edges.
    pub fn m(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Outgoing adjacency: for each vertex, the list of `(target, edge index)`.
    pub fn adjacency(&self) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.n];
        for (idx, &(a, b)) in self.edges.iter().enumerate() {
            adj[a].push((b, idx));
        }
        adj
    }

    /// Parse the plain-text edge list format: a header line `n m` followed by
    /// one `from to` pair per line, 0-indexed. Blank lines and lines starting
    /// with `#` are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header = lines
            .next()
            .ok_or_else(|| Error::Graph("empty graph file".into()))?;
        let mut parts = header.split_whitespace();
        let n: usize = parts
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::Graph(format!("bad header line {header:?}, expected `n m`")))?;
        let m: usize = parts
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::Graph(format!("bad header line {header:?}, expected `n m`")))?;
        let mut edges = Vec::with_capacity(m);
        for line in lines {
            let mut parts = line.split_whitespace();
            let a: usize = parts
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| Error::Graph(format!("bad edge line {line:?}")))?;
            let b: usize = parts
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| Error::Graph(format!("bad edge line {line:?}")))?;
            edges.push((a, b));
        }
        if edges.len() != m {
            return Err(Error::Graph(format!(
                "header declares {m} edges but file lists {}",
                edges.len()
            )));
        }
        Self::new(n, edges)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    /// Render in the same edge-list format accepted by [`DirectedGraph::parse`].
    pub fn to_edge_list(&self) -> String {
        let mut out = format!("{} {}\n", self.n, self.edges.len());
        for &(a, b) in &self.edges {
            out.push_str(&format!("{a} {b}\n"));
        }
        out
    }
}

impl<'de> Deserialize<'de> for DirectedGraph {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            n: usize,
            edges: Vec<(usize, usize)>,
        }
        let raw = Raw::deserialize(d)?;
        DirectedGraph::new(raw.n, raw.edges).map_err(serde::de::Error::custom)
    }
}

#[derive(Copy, Clone, PartialEq)]
struct HeapEntry {
    dist: f64,
    vertex: usize,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // Reversed: BinaryHeap is a max-heap, we want the smallest distance.
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.vertex.cmp(&self.vertex))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Single-source shortest path distances under nonnegative edge weights.
///
/// `weights[k]` is the weight of `graph.edges()[k]`. Unreachable vertices get
/// `f64::INFINITY`.
pub fn dijkstra(graph: &DirectedGraph, weights: &[f64], source: usize) -> Result<Vec<f64>> {
    if weights.len() != graph.m() {
        return Err(Error::Shape(format!(
            "{} edge weights for {} edges",
            weights.len(),
            graph.m()
        )));
    }
    for (k, &w) in weights.iter().enumerate() {
        if !w.is_finite() || w < 0.0 {
            return Err(Error::Domain(format!("edge weight {k} is {w}, must be >= 0")));
        }
    }
    if source >= graph.n_vertices() {
        return Err(Error::Graph(format!(
            "source vertex {source} out of range for {} vertices",
            graph.n_vertices()
        )));
    }

    let adj = graph.adjacency();
    let mut dist = vec![f64::INFINITY; graph.n_vertices()];
    let mut heap = BinaryHeap::new();
    dist[source] = 0.0;
    heap.push(HeapEntry {
        dist: 0.0,
        vertex: source,
    });

    while let Some(HeapEntry { dist: d, vertex }) = heap.pop() {
        if d > dist[vertex] {
            continue; // stale entry
        }
        for &(next, edge_idx) in &adj[vertex] {
            let nd = d + weights[edge_idx];
            if nd < dist[next] {
                dist[next] = nd;
                heap.push(HeapEntry {
                    dist: nd,
                    vertex: next,
                });
            }
        }
    }
    Ok(dist)
}
