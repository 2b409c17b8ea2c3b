//! Entropically regularized transport via alternating diagonal scaling.
//!
//! The plan has the form `T_ij = a_i K_ij b_j` with `K = exp(-C / epsilon)`,
//! and the scaling vectors are updated in turn until both marginals hold:
//! `a = p / (K b)`, then `b = q / (K^T a)`. The iteration minimizes the
//! Kullback-Leibler divergence to the kernel over the coupling polytope.
//! Small `epsilon` makes the scaling factors overflow or underflow; when any
//! factor leaves `[1e-150, 1e150]` the solve restarts with equivalent updates
//! on `log a`, `log b` using log-sum-exp.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::simplex::{frobenius_inner, Coupling, PositiveMatrix, ProbMatrix};

use super::{SinkhornSettings, SolveReport, TransportProblem};

const SCALE_MAX: f64 = 1e150;
const SCALE_MIN: f64 = 1e-150;

/// Elementwise kernel `K_ij = exp(-C_ij / epsilon)`.
///
/// Entries lie in `(0, 1]`, with `K_ij = 1` exactly where the cost vanishes.
pub fn gibbs_kernel(cost: &ProbMatrix, epsilon: f64) -> Result<PositiveMatrix> {
    if !epsilon.is_finite() || epsilon <= 0.0 {
        return Err(Error::Domain(format!(
            "kernel needs positive epsilon, got {epsilon}"
        )));
    }
    PositiveMatrix::new(cost.as_array().mapv(|c| (-c / epsilon).exp()))
}

/// Solve the regularized transport problem by diagonal scaling.
///
/// Zero-mass rows and columns of the marginals are eliminated before scaling
/// and reinserted as zeros, so the iteration always works with strictly
/// positive marginals. Stops once the worst marginal violation (infinity
/// norm) is at most `settings.tolerance`; exceeding the iteration budget is
/// reported as [`Error::NotConverged`] together with the final residual.
pub fn solve_sinkhorn(prob: &TransportProblem, settings: &SinkhornSettings) -> Result<SolveReport> {
    settings.validate()?;
    let n = prob.n();
    let rows: Vec<usize> = (0..n).filter(|&i| prob.p[i] > 0.0).collect();
    let cols: Vec<usize> = (0..n).filter(|&j| prob.q[j] > 0.0).collect();
    let (r, c) = (rows.len(), cols.len());

    let p = Array1::from_iter(rows.iter().map(|&i| prob.p[i]));
    let q = Array1::from_iter(cols.iter().map(|&j| prob.q[j]));
    let mut log_k = Array2::zeros((r, c));
    for (ri, &i) in rows.iter().enumerate() {
        for (cj, &j) in cols.iter().enumerate() {
            log_k[[ri, cj]] = -prob.cost[(i, j)] / settings.epsilon;
        }
    }

    let outcome = if settings.log_domain {
        log_domain_solve(&log_k, &p, &q, settings, 0)
    } else {
        match standard_solve(&log_k, &p, &q, settings) {
            StandardOutcome::Done(result) => result,
            // Retry from scratch with stabilized updates.
            StandardOutcome::Overflow { iterations } => {
                log_domain_solve(&log_k, &p, &q, settings, iterations)
            }
        }
    };

    let (reduced, iterations, residual) = match outcome {
        SolveOutcome::Converged {
            plan,
            iterations,
            residual,
        } => (plan, iterations, residual),
        SolveOutcome::Exhausted { residual } => {
            return Err(Error::NotConverged {
                iterations: settings.max_iterations,
                residual,
            })
        }
    };

    let mut plan = Array2::zeros((n, n));
    for (ri, &i) in rows.iter().enumerate() {
        for (cj, &j) in cols.iter().enumerate() {
            plan[[i, j]] = reduced[[ri, cj]];
        }
    }
    let objective = frobenius_inner(prob.cost.as_array(), &plan)?;
    let coupling = Coupling::new(plan, prob.p.clone(), prob.q.clone())?;
    Ok(SolveReport {
        coupling,
        objective,
        iterations,
        residual,
    })
}

enum SolveOutcome {
    Converged {
        plan: Array2<f64>,
        iterations: usize,
        residual: f64,
    },
    Exhausted {
        residual: f64,
    },
}

enum StandardOutcome {
    Done(SolveOutcome),
    Overflow { iterations: usize },
}

fn scaling_unhealthy(x: &Array1<f64>) -> bool {
    x.iter()
        .any(|&v| !v.is_finite() || v > SCALE_MAX || (v > 0.0 && v < SCALE_MIN))
}

/// One full scaling sweep: `a = p / (K b)` followed by `b = q / (K^T a)`.
fn standard_sweep(
    k: &Array2<f64>,
    p: &Array1<f64>,
    q: &Array1<f64>,
    b: &Array1<f64>,
) -> (Array1<f64>, Array1<f64>) {
    let a = p / &k.dot(b);
    let b_new = q / &k.t().dot(&a);
    (a, b_new)
}

fn standard_solve(
    log_k: &Array2<f64>,
    p: &Array1<f64>,
    q: &Array1<f64>,
    settings: &SinkhornSettings,
) -> StandardOutcome {
    let k = log_k.mapv(f64::exp);
    let mut b = Array1::ones(q.len());
    let mut residual = f64::INFINITY;
    for l in 1..=settings.max_iterations {
        let (a, b_new) = standard_sweep(&k, p, q, &b);
        if scaling_unhealthy(&a) || scaling_unhealthy(&b_new) {
            return StandardOutcome::Overflow { iterations: l };
        }
        b = b_new;

        // Column sums hold by construction right after the b-update; the row
        // sums measure actual convergence.
        let row_sums = &a * &k.dot(&b);
        let col_sums = &b * &k.t().dot(&a);
        residual = marginal_residual(&row_sums, p).max(marginal_residual(&col_sums, q));
        if residual <= settings.tolerance {
            let mut plan = k.clone();
            for ((i, j), t) in plan.indexed_iter_mut() {
                *t *= a[i] * b[j];
            }
            return StandardOutcome::Done(SolveOutcome::Converged {
                plan,
                iterations: l,
                residual,
            });
        }
    }
    StandardOutcome::Done(SolveOutcome::Exhausted { residual })
}

fn log_domain_solve(
    log_k: &Array2<f64>,
    p: &Array1<f64>,
    q: &Array1<f64>,
    settings: &SinkhornSettings,
    iterations_before: usize,
) -> SolveOutcome {
    let (r, c) = log_k.dim();
    let ln_p = p.mapv(f64::ln);
    let ln_q = q.mapv(f64::ln);
    let mut f = vec![0.0f64; r]; // log a
    let mut g = vec![0.0f64; c]; // log b
    let mut residual = f64::INFINITY;
    for l in 1..=settings.max_iterations {
        for i in 0..r {
            f[i] = ln_p[i] - log_sum_exp((0..c).map(|j| log_k[[i, j]] + g[j]));
        }
        for j in 0..c {
            g[j] = ln_q[j] - log_sum_exp((0..r).map(|i| log_k[[i, j]] + f[i]));
        }

        let mut plan = Array2::zeros((r, c));
        for ((i, j), t) in plan.indexed_iter_mut() {
            *t = (f[i] + log_k[[i, j]] + g[j]).exp();
        }
        let row_sums = Array1::from_iter(plan.rows().into_iter().map(|row| row.sum()));
        let col_sums = Array1::from_iter(plan.columns().into_iter().map(|col| col.sum()));
        residual = marginal_residual(&row_sums, p).max(marginal_residual(&col_sums, q));
        if residual <= settings.tolerance {
            return SolveOutcome::Converged {
                plan,
                iterations: iterations_before + l,
                residual,
            };
        }
    }
    SolveOutcome::Exhausted { residual }
}

fn marginal_residual(sums: &Array1<f64>, target: &Array1<f64>) -> f64 {
    sums.iter()
        .zip(target.iter())
        .map(|(s, t)| (s - t).abs())
        .fold(0.0, f64::max)
}

fn log_sum_exp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + xs.map(|x| (x - max).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simplex::ProbVector;
    use crate::transport::solve_exact;
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
    fn kernel_examples() {
        let zero_cost = ProbMatrix::from_rows(&[vec![0.0, 0.5], vec![0.5, 0.0]]).unwrap();
        let k = gibbs_kernel(&zero_cost, 0.1).unwrap();
        assert_eq!(k[(0, 0)], 1.0);
        assert_eq!(k[(1, 1)], 1.0);

        // Cost equal to epsilon gives exactly exp(-1).
        let eps = 0.25;
        let c = ProbMatrix::from_rows(&[vec![0.25, 0.25], vec![0.25, 0.25]]).unwrap();
        let k = gibbs_kernel(&c, eps).unwrap();
        assert_abs_diff_eq!(k[(0, 1)], (-1.0f64).exp(), epsilon = 1e-15);

        assert!(gibbs_kernel(&c, 0.0).is_err());
        assert!(gibbs_kernel(&c, -1.0).is_err());
    }

    #[test]
    fn constant_cost_gives_product_coupling() {
        // With a constant kernel the divergence is minimized by independence.
        let p = [0.2, 0.3, 0.5];
        let q = [0.6, 0.1, 0.3];
        let prob = problem(&p, &q, vec![vec![1.0 / 9.0; 3]; 3]);
        let report = solve_sinkhorn(&prob, &SinkhornSettings::new(0.05)).unwrap();
        for ((i, j), &t) in report.coupling.plan().indexed_iter() {
            assert_abs_diff_eq!(t, p[i] * q[j], epsilon = 1e-8);
        }
    }

    #[test]
    fn small_epsilon_approaches_exact_objective() {
        let cost = vec![
            vec![10.0 / 22.0, 1.0 / 22.0],
            vec![1.0 / 22.0, 10.0 / 22.0],
        ];
        let prob = problem(&[0.5, 0.5], &[0.5, 0.5], cost);
        let exact = solve_exact(&prob).unwrap();
        // Epsilon at one percent of the cost scale.
        let eps = 0.01 * (10.0 / 22.0);
        let report = solve_sinkhorn(&prob, &SinkhornSettings::new(eps)).unwrap();
        assert!((report.objective - exact.objective).abs() < 1e-3);
        assert!(report.residual <= 1e-9);
    }

    #[test]
    fn first_sweep_matches_hand_computed_scaling() {
        // 2x2 symmetric instance, b = (1, 1). Written out by hand:
        //   a_0 = p_0 / (K_00 + K_01), a_1 = p_1 / (K_10 + K_11).
        let k = array![[0.8, 0.4], [0.4, 0.8]];
        let p = array![0.5, 0.5];
        let q = array![0.5, 0.5];
        let b = Array1::ones(2);
        let (a, b_new) = standard_sweep(&k, &p, &q, &b);
        let a0 = 0.5 / (0.8 + 0.4);
        let a1 = 0.5 / (0.4 + 0.8);
        assert_abs_diff_eq!(a[0], a0, epsilon = 1e-15);
        assert_abs_diff_eq!(a[1], a1, epsilon = 1e-15);
        // And the b-update that follows from that a:
        assert_abs_diff_eq!(b_new[0], 0.5 / (0.8 * a0 + 0.4 * a1), epsilon = 1e-15);
    }

    #[test]
    fn zero_marginal_entries_are_eliminated() {
        let prob = problem(&[1.0, 0.0], &[0.0, 1.0], vec![vec![0.3, 0.3], vec![0.2, 0.2]]);
        let report = solve_sinkhorn(&prob, &SinkhornSettings::new(0.1)).unwrap();
        assert_abs_diff_eq!(report.coupling.plan()[[0, 1]], 1.0, epsilon = 1e-12);
        assert_eq!(report.coupling.plan()[[1, 0]], 0.0);
    }

    #[test]
    fn tiny_epsilon_survives_through_log_domain() {
        // exp(-C/eps) underflows at this epsilon; the log-domain retry must
        // still deliver a feasible plan.
        let prob = problem(
            &[0.3, 0.3, 0.4],
            &[0.2, 0.5, 0.3],
            vec![
                vec![0.3, 0.05, 0.05],
                vec![0.05, 0.25, 0.05],
                vec![0.05, 0.05, 0.15],
            ],
        );
        let settings = SinkhornSettings {
            epsilon: 1e-4,
            tolerance: 1e-9,
            max_iterations: 200_000,
            log_domain: false,
        };
        let report = solve_sinkhorn(&prob, &settings).unwrap();
        assert!(report.residual <= 1e-9);
        // Forcing the log domain from the start gives the same plan.
        let forced = solve_sinkhorn(
            &prob,
            &SinkhornSettings {
                log_domain: true,
                ..settings
            },
        )
        .unwrap();
        for (x, y) in report.coupling.plan().iter().zip(forced.coupling.plan()) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-9);
        }
    }

    #[test]
    fn iteration_budget_exhaustion_reports_residual() {
        let prob = problem(
            &[0.5, 0.5],
            &[0.2, 0.8],
            vec![vec![0.05, 0.45], vec![0.45, 0.05]],
        );
        let settings = SinkhornSettings {
            epsilon: 0.01,
            tolerance: 1e-14,
            max_iterations: 2,
            log_domain: false,
        };
        match solve_sinkhorn(&prob, &settings) {
            Err(Error::NotConverged { residual, .. }) => assert!(residual.is_finite()),
            other => panic!("expected NotConverged, got {other:?}"),
        }
    }

    #[test]
    fn plan_is_strictly_positive() {
        let prob = problem(
            &[0.25, 0.25, 0.5],
            &[0.1, 0.6, 0.3],
            vec![
                vec![0.1, 0.1, 0.1],
                vec![0.1, 0.2, 0.1],
                vec![0.1, 0.1, 0.1],
            ],
        );
        let report = solve_sinkhorn(&prob, &SinkhornSettings::new(0.04)).unwrap();
        assert!(report.coupling.plan().iter().all(|&x| x > 0.0));
    }
}
