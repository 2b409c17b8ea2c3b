//! Shared test oracles and fixtures. Everything here is independent of the
//! solver implementations it is used to check: vertices of the transportation
//! polytope come from exhaustive basis enumeration, shortest paths from
//! exhaustive simple-path enumeration.

#![allow(dead_code)]

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use otinfer_core::{DirectedGraph, ProbMatrix, ProbVector, TransportProblem};

/// All `k`-element subsets of `0..n`.
fn k_subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(k);
    fn rec(start: usize, n: usize, k: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if current.len() == k {
            out.push(current.clone());
            return;
        }
        for idx in start..n {
            if n - idx < k - current.len() {
                break;
            }
            current.push(idx);
            rec(idx + 1, n, k, current, out);
            current.pop();
        }
    }
    rec(0, n, k, &mut current, &mut out);
    out
}

/// Solve for the unique allocations of a candidate basis by leaf peeling.
/// Returns `None` when the edge set is not a spanning tree of the bipartite
/// row/column graph.
fn tree_allocations(
    r: usize,
    c: usize,
    edges: &[(usize, usize)],
    p: &[f64],
    q: &[f64],
) -> Option<Vec<f64>> {
    let nodes = r + c;
    let mut deg = vec![0usize; nodes];
    let mut incident: Vec<Vec<usize>> = vec![Vec::new(); nodes];
    for (k, &(i, j)) in edges.iter().enumerate() {
        deg[i] += 1;
        deg[r + j] += 1;
        incident[i].push(k);
        incident[r + j].push(k);
    }
    let mut a = p.to_vec();
    let mut b = q.to_vec();
    let mut alloc = vec![0.0; edges.len()];
    let mut removed = vec![false; edges.len()];
    let mut stack: Vec<usize> = (0..nodes).filter(|&v| deg[v] == 1).collect();
    let mut peeled = 0;
    while let Some(node) = stack.pop() {
        if deg[node] != 1 {
            continue;
        }
        let Some(&k) = incident[node].iter().find(|&&k| !removed[k]) else {
            continue;
        };
        let (i, j) = edges[k];
        let value = if node < r { a[i] } else { b[j] };
        alloc[k] = value;
        a[i] -= value;
        b[j] -= value;
        removed[k] = true;
        deg[i] -= 1;
        deg[r + j] -= 1;
        peeled += 1;
        let other = if node < r { r + j } else { i };
        if deg[other] == 1 {
            stack.push(other);
        }
    }
    (peeled == edges.len()).then_some(alloc)
}

/// Objectives of every basic feasible solution (vertex) of the transportation
/// polytope, by brute force over all candidate bases.
pub fn vertex_objectives(p: &[f64], q: &[f64], cost: &Array2<f64>) -> Vec<f64> {
    let (r, c) = (p.len(), q.len());
    let cells: Vec<(usize, usize)> = (0..r).flat_map(|i| (0..c).map(move |j| (i, j))).collect();
    let mut objectives = Vec::new();
    for subset in k_subsets(cells.len(), r + c - 1) {
        let edges: Vec<(usize, usize)> = subset.iter().map(|&k| cells[k]).collect();
        let Some(alloc) = tree_allocations(r, c, &edges, p, q) else {
            continue;
        };
        if alloc.iter().any(|&x| x < -1e-12) {
            continue;
        }
        let obj = edges
            .iter()
            .zip(&alloc)
            .map(|(&(i, j), &x)| cost[[i, j]] * x)
            .sum();
        objectives.push(obj);
    }
    objectives
}

/// Minimal left-fold path cost between every pair of vertices by exhaustive
/// simple-path enumeration. Unreachable pairs get infinity; the diagonal is
/// zero.
pub fn simple_path_min_costs(graph: &DirectedGraph, weights: &[f64]) -> Array2<f64> {
    let n = graph.n_vertices();
    let adj = graph.adjacency();
    let mut best = Array2::from_elem((n, n), f64::INFINITY);
    for s in 0..n {
        best[[s, s]] = 0.0;
        let mut visited = vec![false; n];
        visited[s] = true;
        dfs(s, 0.0, &adj, weights, &mut visited, &mut |v, cost| {
            if cost < best[[s, v]] {
                best[[s, v]] = cost;
            }
        });
    }
    best
}

fn dfs(
    node: usize,
    cost: f64,
    adj: &[Vec<(usize, usize)>],
    weights: &[f64],
    visited: &mut Vec<bool>,
    record: &mut impl FnMut(usize, f64),
) {
    for &(next, edge) in &adj[node] {
        if visited[next] {
            continue;
        }
        // Same left-to-right accumulation order a relaxation-based solver uses.
        let next_cost = cost + weights[edge];
        record(next, next_cost);
        visited[next] = true;
        dfs(next, next_cost, adj, weights, visited, record);
        visited[next] = false;
    }
}

/// Random marginal bounded away from zero.
pub fn random_marginal(rng: &mut ChaCha8Rng, n: usize) -> ProbVector {
    let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
    let sum: f64 = raw.iter().sum();
    ProbVector::from_slice(&raw.iter().map(|x| x / sum).collect::<Vec<_>>()).unwrap()
}

/// Random normalized cost matrix.
pub fn random_cost(rng: &mut ChaCha8Rng, n: usize) -> ProbMatrix {
    let raw: Vec<f64> = (0..n * n).map(|_| rng.gen_range(0.01..1.0)).collect();
    let sum: f64 = raw.iter().sum();
    ProbMatrix::new(
        Array2::from_shape_vec((n, n), raw.iter().map(|x| x / sum).collect()).unwrap(),
    )
    .unwrap()
}

pub fn random_problem(rng: &mut ChaCha8Rng, n: usize) -> TransportProblem {
    TransportProblem::new(
        random_marginal(rng, n),
        random_marginal(rng, n),
        random_cost(rng, n),
    )
    .unwrap()
}

/// Random directed graph, possibly disconnected: up to `n (n-1)` distinct edges.
pub fn random_digraph(rng: &mut ChaCha8Rng, n: usize) -> DirectedGraph {
    let mut all: Vec<(usize, usize)> = (0..n)
        .flat_map(|a| (0..n).filter(move |&b| b != a).map(move |b| (a, b)))
        .collect();
    all.shuffle(rng);
    let m = rng.gen_range(1..=all.len());
    DirectedGraph::new(n, all[..m].to_vec()).unwrap()
}

/// Strongly connected random digraph: a shuffled Hamiltonian cycle plus
/// distinct extra edges up to `m` total.
pub fn random_connected_digraph(rng: &mut ChaCha8Rng, n: usize, m: usize) -> DirectedGraph {
    assert!(m >= n && m <= n * (n - 1));
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut edges: Vec<(usize, usize)> = (0..n)
        .map(|k| (order[k], order[(k + 1) % n]))
        .collect();
    while edges.len() < m {
        let a = rng.gen_range(0..n);
        let b = rng.gen_range(0..n);
        if a != b && !edges.contains(&(a, b)) {
            edges.push((a, b));
        }
    }
    DirectedGraph::new(n, edges).unwrap()
}

/// Fixed 9-vertex, 30-edge strongly connected network: a two-way ring plus
/// six two-way chords. Stands in for a small country-adjacency network.
pub fn nine_vertex_network() -> DirectedGraph {
    let mut edges = Vec::with_capacity(30);
    for i in 0..9usize {
        edges.push((i, (i + 1) % 9));
        edges.push(((i + 1) % 9, i));
    }
    for &(a, b) in &[(0, 4), (2, 6), (1, 5), (3, 7), (2, 8), (0, 6)] {
        edges.push((a, b));
        edges.push((b, a));
    }
    DirectedGraph::new(9, edges).unwrap()
}

/// Kolmogorov-Smirnov statistic of samples against the uniform CDF on [0, 1].
pub fn ks_uniform(samples: &[f64]) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let hi = ((i + 1) as f64 / n - x).abs();
            let lo = (x - i as f64 / n).abs();
            hi.max(lo)
        })
        .fold(0.0, f64::max)
}
