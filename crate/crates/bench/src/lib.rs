//! Shared fixtures for the solver benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use otinfer_core::cost::{CostKind, PenaltySettings};
use otinfer_core::mcmc::LatentState;
use otinfer_core::{CostStructure, DirectedGraph, ProbMatrix, ProbVector, TransportProblem};

pub fn random_problem(seed: u64, n: usize) -> TransportProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let marginal = |rng: &mut ChaCha8Rng| {
        let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
        let sum: f64 = raw.iter().sum();
        ProbVector::from_slice(&raw.iter().map(|x| x / sum).collect::<Vec<_>>()).unwrap()
    };
    let p = marginal(&mut rng);
    let q = marginal(&mut rng);
    let raw: Vec<f64> = (0..n * n).map(|_| rng.gen_range(0.01..1.0)).collect();
    let sum: f64 = raw.iter().sum();
    let rows: Vec<Vec<f64>> = raw
        .chunks(n)
        .map(|row| row.iter().map(|x| x / sum).collect())
        .collect();
    let cost = ProbMatrix::from_rows(&rows).unwrap();
    TransportProblem::new(p, q, cost).unwrap()
}

/// Nine vertices, thirty directed edges: a two-way ring with six two-way
/// chords.
pub fn nine_vertex_graph() -> DirectedGraph {
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

pub fn toeplitz_structure(n: usize) -> CostStructure {
    CostStructure::new(CostKind::Toeplitz { n }, PenaltySettings::default())
}

pub fn random_state(seed: u64, n: usize, theta_len: usize) -> LatentState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw =
        |len: usize| -> Vec<f64> { (0..len).map(|_| 1.0 - 0.95 * rng.gen::<f64>()).collect() };
    LatentState {
        u: draw(n),
        v: draw(n),
        theta: draw(theta_len),
    }
}
