//! Cost-matrix construction from three parameterizations: banded (Toeplitz),
//! general non-symmetric, and directed-graph shortest paths.
//!
//! Every parameterization pins the diagonal to a large staying penalty before
//! the matrix is normalized onto the simplex, so that keeping mass in place is
//! always more expensive than moving it.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{dijkstra, DirectedGraph};
use crate::simplex::{normalize_matrix, PositiveMatrix, PositiveVector, ProbMatrix};

/// Diagonal staying penalty, written into the raw cost matrix before
/// normalization. Must strictly dominate every off-diagonal raw cost.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PenaltySettings {
    pub c_bar: f64,
}

impl PenaltySettings {
    pub fn new(c_bar: f64) -> Result<Self> {
        if !c_bar.is_finite() || c_bar <= 0.0 {
            return Err(Error::Config(format!(
                "staying penalty must be positive, got {c_bar}"
            )));
        }
        Ok(Self { c_bar })
    }
}

impl Default for PenaltySettings {
    fn default() -> Self {
        Self { c_bar: 10.0 }
    }
}

/// Concrete cost parameters: the values that, together with a
/// [`PenaltySettings`], determine a normalized cost matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum CostParams {
    /// Banded cost constant along diagonals. `f` has length `2n - 2`: the
    /// first `n - 1` entries are the sub-diagonals for index differences
    /// `-1..-(n-1)`, the last `n - 1` the super-diagonals for `1..n-1`.
    Toeplitz { f: PositiveVector },
    /// General off-diagonal cost; the diagonal must be identically zero
    /// (it is overwritten by the staying penalty).
    General { w_off: PositiveMatrix },
    /// Shortest-path cost over a directed graph; `f` holds one weight per
    /// edge, in `graph.edges()` order.
    GraphBased {
        graph: DirectedGraph,
        f: PositiveVector,
    },
}

/// Shape of a cost model without its values: what the flat parameter vector
/// of an inference run means.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostKind {
    Toeplitz { n: usize },
    General { n: usize },
    Graph { graph: DirectedGraph },
}

impl CostKind {
    pub fn n(&self) -> usize {
        match self {
            CostKind::Toeplitz { n } | CostKind::General { n } => *n,
            CostKind::Graph { graph } => graph.n_vertices(),
        }
    }

    /// Length of the flat parameter vector for this model.
    pub fn theta_len(&self) -> usize {
        match self {
            CostKind::Toeplitz { n } => 2 * n - 2,
            CostKind::General { n } => n * n - n,
            CostKind::Graph { graph } => graph.m(),
        }
    }
}

/// A cost model shape plus its staying penalty: everything that is fixed
/// (not inferred) about the cost.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostStructure {
    pub kind: CostKind,
    pub penalty: PenaltySettings,
}

impl CostStructure {
    pub fn new(kind: CostKind, penalty: PenaltySettings) -> Self {
        Self { kind, penalty }
    }

    pub fn n(&self) -> usize {
        self.kind.n()
    }

    pub fn theta_len(&self) -> usize {
        self.kind.theta_len()
    }

    /// Build the normalized cost matrix from a flat parameter vector laid out
    /// per [`CostKind`]: Toeplitz band entries, row-major off-diagonal
    /// entries, or per-edge weights.
    pub fn build_cost_from_flat(&self, theta: &[f64]) -> Result<ProbMatrix> {
        let want = self.theta_len();
        if theta.len() != want {
            return Err(Error::Shape(format!(
                "cost parameter vector has {} entries, expected {want}",
                theta.len()
            )));
        }
        for (k, &x) in theta.iter().enumerate() {
            if !x.is_finite() || x < 0.0 {
                return Err(Error::Domain(format!(
                    "cost parameter {k} is {x}, must be >= 0"
                )));
            }
        }
        let raw = match &self.kind {
            CostKind::Toeplitz { n } => toeplitz_raw(theta, *n, self.penalty.c_bar)?,
            CostKind::General { n } => general_raw_from_flat(theta, *n, self.penalty.c_bar),
            CostKind::Graph { graph } => graph_raw(graph, theta, self.penalty.c_bar)?,
        };
        check_dominance(&raw, self.penalty.c_bar)?;
        normalize_matrix(&PositiveMatrix::new(raw)?)
    }
}

fn toeplitz_raw(f: &[f64], n: usize, c_bar: f64) -> Result<Array2<f64>> {
    if f.len() != 2 * n - 2 {
        return Err(Error::Shape(format!(
            "banded cost for n = {n} needs {} entries, got {}",
            2 * n - 2,
            f.len()
        )));
    }
    let mut w = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            w[[i, j]] = if i == j {
                c_bar
            } else if j < i {
                f[i - j - 1] // sub-diagonal, index difference -(i - j)
            } else {
                f[n - 2 + (j - i)] // super-diagonal, index difference j - i
            };
        }
    }
    Ok(w)
}

fn general_raw_from_flat(theta: &[f64], n: usize, c_bar: f64) -> Array2<f64> {
    let mut w = Array2::zeros((n, n));
    let mut k = 0;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                w[[i, j]] = c_bar;
            } else {
                w[[i, j]] = theta[k];
                k += 1;
            }
        }
    }
    w
}

fn graph_raw(graph: &DirectedGraph, weights: &[f64], c_bar: f64) -> Result<Array2<f64>> {
    let n = graph.n_vertices();
    let mut w = Array2::zeros((n, n));
    for i in 0..n {
        let dist = dijkstra(graph, weights, i)?;
        for j in 0..n {
            if i == j {
                w[[i, j]] = c_bar;
            } else if dist[j].is_finite() {
                w[[i, j]] = dist[j];
            } else {
                return Err(Error::UnreachablePair { from: i, to: j });
            }
        }
    }
    Ok(w)
}

fn check_dominance(w: &Array2<f64>, c_bar: f64) -> Result<()> {
    for ((i, j), &x) in w.indexed_iter() {
        if i != j && x >= c_bar {
            return Err(Error::Domain(format!(
                "staying penalty {c_bar} does not dominate off-diagonal cost {x} at ({i}, {j})"
            )));
        }
    }
    Ok(())
}

/// Embed a band-parameter vector into the full raw cost matrix, with the
/// staying penalty on the diagonal.
pub fn embed_toeplitz(
    f: &PositiveVector,
    n: usize,
    penalty: &PenaltySettings,
) -> Result<PositiveMatrix> {
    let raw = toeplitz_raw(f.as_slice(), n, penalty.c_bar)?;
    check_dominance(&raw, penalty.c_bar)?;
    PositiveMatrix::new(raw)
}

/// All-pairs shortest-path cost matrix of a weighted directed graph, with the
/// staying penalty on the diagonal. Runs one Dijkstra pass per source vertex;
/// any unreachable pair is an error because transport costs must be finite.
pub fn shortest_path_costs(
    graph: &DirectedGraph,
    f: &PositiveVector,
    penalty: &PenaltySettings,
) -> Result<PositiveMatrix> {
    if f.len() != graph.m() {
        return Err(Error::Shape(format!(
            "{} edge weights for {} edges",
            f.len(),
            graph.m()
        )));
    }
    let raw = graph_raw(graph, f.as_slice(), penalty.c_bar)?;
    check_dominance(&raw, penalty.c_bar)?;
    PositiveMatrix::new(raw)
}

/// Assemble and normalize the cost matrix for any parameterization:
/// penalty first, then normalization onto the simplex.
pub fn build_cost(params: &CostParams, penalty: &PenaltySettings) -> Result<ProbMatrix> {
    let raw = match params {
        CostParams::Toeplitz { f } => {
            let n = f.len() / 2 + 1;
            embed_toeplitz(f, n, penalty)?
        }
        CostParams::General { w_off } => {
            let n = w_off.n();
            for i in 0..n {
                if w_off[(i, i)] != 0.0 {
                    return Err(Error::Domain(format!(
                        "general cost parameters must have a zero diagonal, entry ({i}, {i}) is {}",
                        w_off[(i, i)]
                    )));
                }
            }
            let mut raw = w_off.as_array().clone();
            for i in 0..n {
                raw[[i, i]] = penalty.c_bar;
            }
            check_dominance(&raw, penalty.c_bar)?;
            PositiveMatrix::new(raw)?
        }
        CostParams::GraphBased { graph, f } => shortest_path_costs(graph, f, penalty)?,
    };
    normalize_matrix(&raw)
}

/// Whether a cost parameterization yields more observation equations than
/// unknowns, fewer, or exactly as many.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Determinedness {
    Overdetermined,
    Underdetermined,
    Square,
}

impl std::fmt::Display for Determinedness {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Determinedness::Overdetermined => "overdetermined",
            Determinedness::Underdetermined => "underdetermined",
            Determinedness::Square => "square",
        };
        f.write_str(s)
    }
}

/// Compare the number of unknowns against the `n^2 - 1` independent entries
/// of an observed plan. Unknown counts account for the scale invariance of
/// the two marginals: banded `4n - 5`, general `n^2 + n - 3`, graph-based
/// `2n + m - 3`.
pub fn classify_determinedness(kind: &CostKind) -> Determinedness {
    let n = kind.n() as i64;
    let equations = n * n - 1;
    let unknowns = match kind {
        CostKind::Toeplitz { .. } => 4 * n - 5,
        CostKind::General { .. } => n * n + n - 3,
        CostKind::Graph { graph } => 2 * n + graph.m() as i64 - 3,
    };
    match unknowns.cmp(&equations) {
        std::cmp::Ordering::Less => Determinedness::Overdetermined,
        std::cmp::Ordering::Greater => Determinedness::Underdetermined,
        std::cmp::Ordering::Equal => Determinedness::Square,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn pv(xs: &[f64]) -> PositiveVector {
        PositiveVector::from_slice(xs).unwrap()
    }

    fn pen(c_bar: f64) -> PenaltySettings {
        PenaltySettings::new(c_bar).unwrap()
    }

    #[test]
    fn embed_toeplitz_layout() {
        // n = 3, f = [a1, a2, b1, b2]: sub-diagonals then super-diagonals.
        let (a1, a2, b1, b2) = (1.0, 2.0, 3.0, 4.0);
        let w = embed_toeplitz(&pv(&[a1, a2, b1, b2]), 3, &pen(10.0)).unwrap();
        let expected = array![[10.0, b1, b2], [a1, 10.0, b1], [a2, a1, 10.0]];
        assert_eq!(w.as_array(), &expected);

        let w = embed_toeplitz(&pv(&[5.0, 7.0]), 2, &pen(10.0)).unwrap();
        assert_eq!(w.as_array(), &array![[10.0, 7.0], [5.0, 10.0]]);

        assert!(matches!(
            embed_toeplitz(&pv(&[1.0, 2.0, 3.0]), 3, &pen(10.0)),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn embed_toeplitz_symmetric_band_gives_symmetric_matrix() {
        let w = embed_toeplitz(&pv(&[1.0, 2.0, 1.0, 2.0]), 3, &pen(10.0)).unwrap();
        let a = w.as_array();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(a[[i, j]], a[[j, i]]);
            }
        }
    }

    #[test]
    fn embed_toeplitz_round_trip() {
        let f = [0.3, 0.9, 0.1, 0.7, 0.2, 0.5];
        let n = 4;
        let w = embed_toeplitz(&pv(&f), n, &pen(10.0)).unwrap();
        let a = w.as_array();
        // First column below the diagonal recovers the sub-diagonal block,
        // first row right of the diagonal the super-diagonal block.
        for d in 1..n {
            assert_eq!(a[[d, 0]], f[d - 1]);
            assert_eq!(a[[0, d]], f[n - 2 + d]);
        }
    }

    #[test]
    fn shortest_path_costs_examples() {
        let path = DirectedGraph::new(3, vec![(0, 1), (1, 2)]).unwrap();
        let err = shortest_path_costs(&path, &pv(&[1.0, 2.0]), &pen(10.0)).unwrap_err();
        // 0 is unreachable from 1 on the one-way path graph.
        assert!(matches!(err, Error::UnreachablePair { .. }));

        // Two-way path: W[0][2] = 3 through the middle vertex.
        let g = DirectedGraph::new(3, vec![(0, 1), (1, 2), (1, 0), (2, 1)]).unwrap();
        let w = shortest_path_costs(&g, &pv(&[1.0, 2.0, 1.0, 2.0]), &pen(10.0)).unwrap();
        assert_eq!(w[(0, 2)], 3.0);
        assert_eq!(w[(2, 0)], 3.0);
        assert_eq!(w[(0, 0)], 10.0);

        // Triangle with an expensive direct edge: detour wins.
        let tri = DirectedGraph::new(3, vec![(0, 1), (1, 2), (0, 2), (2, 0), (1, 0), (2, 1)]).unwrap();
        let w = shortest_path_costs(&tri, &pv(&[1.0, 1.0, 5.0, 1.0, 1.0, 1.0]), &pen(10.0)).unwrap();
        assert_eq!(w[(0, 2)], 2.0);
    }

    #[test]
    fn shortest_path_costs_can_be_asymmetric() {
        // 0 -> 1 direct, but 1 reaches 0 only via 2.
        let g = DirectedGraph::new(3, vec![(0, 1), (1, 2), (2, 0)]).unwrap();
        let w = shortest_path_costs(&g, &pv(&[0.5, 1.0, 1.0]), &pen(10.0)).unwrap();
        assert_eq!(w[(0, 1)], 0.5);
        assert_eq!(w[(1, 0)], 2.0);
    }

    #[test]
    fn build_cost_normalizes_with_penalty_first() {
        // n = 3 band with C-bar = 10: total mass 3*10 + 2 a1 + a2 + 2 b1 + b2.
        let (a1, a2, b1, b2) = (1.0, 2.0, 3.0, 4.0);
        let params = CostParams::Toeplitz {
            f: pv(&[a1, a2, b1, b2]),
        };
        let c = build_cost(&params, &pen(10.0)).unwrap();
        let total = 30.0 + 2.0 * a1 + a2 + 2.0 * b1 + b2;
        assert_abs_diff_eq!(c[(0, 0)], 10.0 / total, epsilon = 1e-15);
        assert_abs_diff_eq!(c[(1, 0)], a1 / total, epsilon = 1e-15);
        assert_abs_diff_eq!(c.as_array().sum(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn build_cost_general_single_entry() {
        let mut w = Array2::zeros((2, 2));
        w[[0, 1]] = 2.5;
        let params = CostParams::General {
            w_off: PositiveMatrix::new(w).unwrap(),
        };
        let c = build_cost(&params, &pen(10.0)).unwrap();
        let total = 22.5;
        assert_abs_diff_eq!(c[(0, 1)], 2.5 / total, epsilon = 1e-15);
        assert_eq!(c[(1, 0)], 0.0);
        assert_abs_diff_eq!(c[(0, 0)], 10.0 / total, epsilon = 1e-15);
    }

    #[test]
    fn build_cost_general_rejects_nonzero_diagonal() {
        let w = array![[1.0, 2.0], [3.0, 0.0]];
        let params = CostParams::General {
            w_off: PositiveMatrix::new(w).unwrap(),
        };
        assert!(matches!(build_cost(&params, &pen(10.0)), Err(Error::Domain(_))));
    }

    #[test]
    fn build_cost_graph_composes_the_two_stages() {
        let g = DirectedGraph::new(3, vec![(0, 1), (1, 2), (1, 0), (2, 1)]).unwrap();
        let f = pv(&[1.0, 2.0, 1.0, 2.0]);
        let params = CostParams::GraphBased {
            graph: g.clone(),
            f: f.clone(),
        };
        let c = build_cost(&params, &pen(10.0)).unwrap();
        let raw = shortest_path_costs(&g, &f, &pen(10.0)).unwrap();
        let total = raw.as_array().sum();
        assert_abs_diff_eq!(c[(0, 0)], 10.0 / total, epsilon = 1e-15);
        assert_abs_diff_eq!(c[(0, 2)], 3.0 / total, epsilon = 1e-15);
    }

    #[test]
    fn build_cost_diagonal_dominates() {
        let params = CostParams::Toeplitz {
            f: pv(&[0.9, 0.2, 0.4, 0.8]),
        };
        let c = build_cost(&params, &pen(10.0)).unwrap();
        let a = c.as_array();
        let min_diag = (0..3).map(|i| a[[i, i]]).fold(f64::INFINITY, f64::min);
        let max_off = a
            .indexed_iter()
            .filter(|((i, j), _)| i != j)
            .map(|(_, &x)| x)
            .fold(0.0f64, f64::max);
        assert!(min_diag > max_off);
    }

    #[test]
    fn penalty_must_dominate() {
        let params = CostParams::Toeplitz {
            f: pv(&[1.0, 12.0]),
        };
        assert!(matches!(build_cost(&params, &pen(10.0)), Err(Error::Domain(_))));
    }

    #[test]
    fn determinedness_cases() {
        // 17 banded/marginal unknowns vs 24 equations at n = 5.
        assert_eq!(
            classify_determinedness(&CostKind::Toeplitz { n: 5 }),
            Determinedness::Overdetermined
        );
        // n = 2 is the break-even point for the banded model.
        assert_eq!(
            classify_determinedness(&CostKind::Toeplitz { n: 2 }),
            Determinedness::Square
        );
        assert_eq!(
            classify_determinedness(&CostKind::General { n: 5 }),
            Determinedness::Underdetermined
        );
        // Graph with n = 5, m = 12: 2*5 + 12 - 3 < 5^2 - 1.
        let edges: Vec<(usize, usize)> = (0..5)
            .flat_map(|i| {
                let a = (i + 1) % 5;
                let b = (i + 2) % 5;
                [(i, a), (i, b)]
            })
            .chain([(1, 0), (2, 0)])
            .collect();
        let graph = DirectedGraph::new(5, edges).unwrap();
        assert_eq!(graph.m(), 12);
        assert_eq!(
            classify_determinedness(&CostKind::Graph { graph }),
            Determinedness::Overdetermined
        );
    }

    #[test]
    fn structure_flat_builders_agree_with_params() {
        let f = [0.3, 0.9, 0.1, 0.7];
        let s = CostStructure::new(CostKind::Toeplitz { n: 3 }, pen(10.0));
        let from_flat = s.build_cost_from_flat(&f).unwrap();
        let from_params = build_cost(
            &CostParams::Toeplitz { f: pv(&f) },
            &pen(10.0),
        )
        .unwrap();
        assert_eq!(from_flat, from_params);

        // General layout: row-major with the diagonal skipped.
        let s = CostStructure::new(CostKind::General { n: 2 }, pen(10.0));
        let c = s.build_cost_from_flat(&[0.4, 0.6]).unwrap();
        assert_abs_diff_eq!(c[(0, 1)], 0.4 / 21.0, epsilon = 1e-15);
        assert_abs_diff_eq!(c[(1, 0)], 0.6 / 21.0, epsilon = 1e-15);

        assert!(s.build_cost_from_flat(&[0.4]).is_err());
    }
}
