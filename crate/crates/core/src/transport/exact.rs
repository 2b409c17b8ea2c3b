//! Exact transportation solver.
//!
//! Classic primal transportation simplex on the bipartite supply/demand
//! structure: northwest-corner initialization, dual (u, v) computation on the
//! spanning tree of basic cells, and first-improving (lowest row-then-column
//! index) pivot selection. The lowest-index rule for both the entering and
//! the leaving cell makes the solver deterministic and immune to cycling on
//! degenerate instances, so repeated calls return bit-identical plans.

use std::collections::VecDeque;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::simplex::{frobenius_inner, Coupling};

use super::{SolveReport, TransportProblem};

/// Reduced costs below this threshold count as improving.
const OPT_TOL: f64 = 1e-12;

/// Solve the transportation linear program exactly.
///
/// The returned plan is a basic feasible solution of the transportation
/// polytope attaining the minimal transport cost. Rows and columns with zero
/// marginal mass are eliminated up front and reinserted as zeros.
pub fn solve_exact(prob: &TransportProblem) -> Result<SolveReport> {
    let n = prob.n();
    let rows: Vec<usize> = (0..n).filter(|&i| prob.p[i] > 0.0).collect();
    let cols: Vec<usize> = (0..n).filter(|&j| prob.q[j] > 0.0).collect();
    let (r, c) = (rows.len(), cols.len());

    let p: Vec<f64> = rows.iter().map(|&i| prob.p[i]).collect();
    let q: Vec<f64> = cols.iter().map(|&j| prob.q[j]).collect();
    let mut cost = Array2::zeros((r, c));
    for (ri, &i) in rows.iter().enumerate() {
        for (cj, &j) in cols.iter().enumerate() {
            cost[[ri, cj]] = prob.cost[(i, j)];
        }
    }

    let (alloc, iterations) = simplex(&p, &q, &cost)?;

    let mut plan = Array2::zeros((n, n));
    for (ri, &i) in rows.iter().enumerate() {
        for (cj, &j) in cols.iter().enumerate() {
            plan[[i, j]] = alloc[[ri, cj]];
        }
    }

    let objective = frobenius_inner(prob.cost.as_array(), &plan)?;
    let coupling = Coupling::new(plan, prob.p.clone(), prob.q.clone())?;
    let residual = coupling.marginal_residual();
    Ok(SolveReport {
        coupling,
        objective,
        iterations,
        residual,
    })
}

fn simplex(p: &[f64], q: &[f64], cost: &Array2<f64>) -> Result<(Array2<f64>, usize)> {
    let (r, c) = (p.len(), q.len());
    let mut alloc = Array2::zeros((r, c));
    let mut in_basis = vec![vec![false; c]; r];
    let mut basis: Vec<(usize, usize)> = Vec::with_capacity(r + c - 1);

    // Northwest corner: walk a monotone staircase from (0, 0) to
    // (r-1, c-1). The staircase has exactly r + c - 1 cells and its
    // bipartite row/column graph is a spanning tree.
    let mut a = p.to_vec();
    let mut b = q.to_vec();
    let (mut i, mut j) = (0, 0);
    loop {
        let x = a[i].min(b[j]);
        alloc[[i, j]] = x;
        in_basis[i][j] = true;
        basis.push((i, j));
        a[i] -= x;
        b[j] -= x;
        if i == r - 1 && j == c - 1 {
            break;
        }
        if j < c - 1 && b[j] == 0.0 {
            j += 1;
        } else if i < r - 1 && a[i] == 0.0 {
            i += 1;
        } else if j < c - 1 {
            j += 1;
        } else {
            i += 1;
        }
    }
    debug_assert_eq!(basis.len(), r + c - 1);

    let max_pivots = 1000 * r * c + 1000;
    let mut pivots = 0usize;
    loop {
        let (u, v) = duals(r, c, &basis, cost);

        // First improving nonbasic cell in row-major order.
        let mut entering = None;
        'scan: for i in 0..r {
            for j in 0..c {
                if !in_basis[i][j] && cost[[i, j]] - u[i] - v[j] < -OPT_TOL {
                    entering = Some((i, j));
                    break 'scan;
                }
            }
        }
        let Some((ei, ej)) = entering else {
            return Ok((alloc, pivots));
        };

        // The basis tree plus the entering edge contains a unique cycle:
        // the entering cell plus the tree path from row ei to column ej.
        // Walking that path, cells at odd 1-based positions give up mass.
        let path = tree_path(r, &basis, ei, ej);
        let mut theta = f64::INFINITY;
        let mut leaving = (usize::MAX, usize::MAX);
        for (idx, &cell) in path.iter().enumerate() {
            if idx % 2 == 0 {
                let val = alloc[[cell.0, cell.1]];
                if val < theta || (val == theta && cell < leaving) {
                    theta = val;
                    leaving = cell;
                }
            }
        }

        alloc[[ei, ej]] += theta;
        for (idx, &cell) in path.iter().enumerate() {
            if idx % 2 == 0 {
                alloc[[cell.0, cell.1]] -= theta;
            } else {
                alloc[[cell.0, cell.1]] += theta;
            }
        }
        alloc[[leaving.0, leaving.1]] = 0.0;

        in_basis[leaving.0][leaving.1] = false;
        let pos = basis
            .iter()
            .position(|&cell| cell == leaving)
            .expect("leaving cell is basic");
        basis.swap_remove(pos);
        basis.push((ei, ej));
        in_basis[ei][ej] = true;

        pivots += 1;
        if pivots > max_pivots {
            return Err(Error::NotConverged {
                iterations: pivots,
                residual: f64::NAN,
            });
        }
    }
}

/// Dual potentials on the spanning tree of basic cells, anchored at u[0] = 0.
fn duals(r: usize, c: usize, basis: &[(usize, usize)], cost: &Array2<f64>) -> (Vec<f64>, Vec<f64>) {
    // Nodes 0..r are rows, r..r+c are columns.
    let mut adj = vec![Vec::new(); r + c];
    for &(i, j) in basis {
        adj[i].push((r + j, (i, j)));
        adj[r + j].push((i, (i, j)));
    }
    let mut u = vec![0.0; r];
    let mut v = vec![0.0; c];
    let mut known = vec![false; r + c];
    known[0] = true;
    let mut queue = VecDeque::from([0usize]);
    while let Some(node) = queue.pop_front() {
        for &(next, (i, j)) in &adj[node] {
            if !known[next] {
                known[next] = true;
                if next >= r {
                    v[next - r] = cost[[i, j]] - u[i];
                } else {
                    u[next] = cost[[i, j]] - v[j];
                }
                queue.push_back(next);
            }
        }
    }
    debug_assert!(known.iter().all(|&k| k), "basis does not span all nodes");
    (u, v)
}

/// Unique path of basic cells from row `from_row` to column `to_col` in the
/// basis spanning tree.
fn tree_path(r: usize, basis: &[(usize, usize)], from_row: usize, to_col: usize) -> Vec<(usize, usize)> {
    let n_nodes = {
        let max_col = basis.iter().map(|&(_, j)| j).max().unwrap_or(0);
        r + max_col.max(to_col) + 1
    };
    let mut adj = vec![Vec::new(); n_nodes];
    for &(i, j) in basis {
        adj[i].push((r + j, (i, j)));
        adj[r + j].push((i, (i, j)));
    }
    let mut parent: Vec<Option<(usize, (usize, usize))>> = vec![None; n_nodes];
    let mut seen = vec![false; n_nodes];
    seen[from_row] = true;
    let mut queue = VecDeque::from([from_row]);
    let target = r + to_col;
    while let Some(node) = queue.pop_front() {
        if node == target {
            break;
        }
        for &(next, cell) in &adj[node] {
            if !seen[next] {
                seen[next] = true;
                parent[next] = Some((node, cell));
                queue.push_back(next);
            }
        }
    }
    let mut cells = Vec::new();
    let mut node = target;
    while node != from_row {
        let (prev, cell) = parent[node].expect("target reachable in spanning tree");
        cells.push(cell);
        node = prev;
    }
    cells.reverse();
    cells
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simplex::{ProbMatrix, ProbVector};
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn problem(p: &[f64], q: &[f64], cost: Vec<Vec<f64>>) -> TransportProblem {
        TransportProblem::new(
            ProbVector::from_slice(p).unwrap(),
            ProbVector::from_slice(q).unwrap(),
            ProbMatrix::from_rows(&cost).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn forced_coupling_with_zero_marginals() {
        // p = [1, 0], q = [0, 1]: the constraints force everything into T_01.
        let prob = problem(&[1.0, 0.0], &[0.0, 1.0], vec![vec![0.3, 0.3], vec![0.2, 0.2]]);
        let report = solve_exact(&prob).unwrap();
        assert_eq!(report.coupling.plan(), &array![[0.0, 1.0], [0.0, 0.0]]);
    }

    #[test]
    fn expensive_diagonal_moves_mass_off_diagonal() {
        // Cost proportional to [[10, 1], [1, 10]], normalized by 22.
        // One-parameter sweep oracle: with T = [[t, 0.5-t], [0.5-t, t]],
        // objective(t) = (18 t + 1) / 22 is increasing, so t = 0 is optimal.
        let prob = problem(
            &[0.5, 0.5],
            &[0.5, 0.5],
            vec![vec![10.0 / 22.0, 1.0 / 22.0], vec![1.0 / 22.0, 10.0 / 22.0]],
        );
        let mut best = f64::INFINITY;
        for k in 0..=1000 {
            let t = 0.5 * k as f64 / 1000.0;
            let obj = (10.0 * t + (0.5 - t) + (0.5 - t) + 10.0 * t) / 22.0;
            best = best.min(obj);
        }
        let report = solve_exact(&prob).unwrap();
        assert_eq!(report.coupling.plan(), &array![[0.0, 0.5], [0.5, 0.0]]);
        assert_abs_diff_eq!(report.objective, best, epsilon = 1e-12);
        assert_abs_diff_eq!(report.objective, 1.0 / 22.0, epsilon = 1e-15);
    }

    #[test]
    fn free_diagonal_stays_diagonal() {
        let prob = problem(
            &[0.5, 0.5],
            &[0.5, 0.5],
            vec![vec![0.0, 0.5], vec![0.5, 0.0]],
        );
        let report = solve_exact(&prob).unwrap();
        assert_eq!(report.coupling.plan(), &array![[0.5, 0.0], [0.0, 0.5]]);
        assert_eq!(report.objective, 0.0);
    }

    #[test]
    fn single_cell_problem() {
        let prob = problem(&[1.0], &[1.0], vec![vec![1.0]]);
        let report = solve_exact(&prob).unwrap();
        assert_eq!(report.coupling.plan(), &array![[1.0]]);
        assert_eq!(report.iterations, 0);
    }

    #[test]
    fn deterministic_bit_identical_plans() {
        let prob = problem(
            &[0.2, 0.3, 0.5],
            &[0.4, 0.4, 0.2],
            vec![
                vec![0.10, 0.15, 0.05],
                vec![0.12, 0.02, 0.20],
                vec![0.08, 0.18, 0.10],
            ],
        );
        let a = solve_exact(&prob).unwrap();
        let b = solve_exact(&prob).unwrap();
        assert_eq!(a.coupling.plan(), b.coupling.plan());
        assert_eq!(a.objective.to_bits(), b.objective.to_bits());
    }

    #[test]
    fn residual_is_tiny() {
        let prob = problem(
            &[0.25, 0.25, 0.5],
            &[0.1, 0.6, 0.3],
            vec![
                vec![0.1, 0.1, 0.1],
                vec![0.1, 0.2, 0.1],
                vec![0.1, 0.1, 0.1],
            ],
        );
        let report = solve_exact(&prob).unwrap();
        assert!(report.residual < 1e-12);
    }
}
