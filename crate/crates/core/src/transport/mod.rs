//! Forward transport solvers: an exact linear-programming solver over the
//! transportation polytope and an entropically regularized scaling solver.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simplex::{frobenius_inner, Coupling, ProbMatrix, ProbVector};

mod exact;
mod sinkhorn;

pub use exact::solve_exact;
pub use sinkhorn::{gibbs_kernel, solve_sinkhorn};

/// A forward transport instance: two marginals and a normalized cost matrix
/// of matching dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct TransportProblem {
    pub p: ProbVector,
    pub q: ProbVector,
    pub cost: ProbMatrix,
}

impl TransportProblem {
    pub fn new(p: ProbVector, q: ProbVector, cost: ProbMatrix) -> Result<Self> {
        let n = p.len();
        if q.len() != n || cost.n() != n {
            return Err(Error::Shape(format!(
                "marginals of length {} and {} with a {}x{} cost",
                n,
                q.len(),
                cost.n(),
                cost.n()
            )));
        }
        Ok(Self { p, q, cost })
    }

    pub fn n(&self) -> usize {
        self.p.len()
    }
}

/// Settings for the scaling solver.
///
/// `tolerance` bounds the final marginal residual in the infinity norm. With
/// the defaults the solver error stays orders of magnitude below any realistic
/// observation noise. `log_domain` forces log-domain updates from the first
/// iteration; otherwise the solver starts with plain scaling and falls back to
/// the log domain on overflow or underflow.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SinkhornSettings {
    pub epsilon: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub log_domain: bool,
}

impl SinkhornSettings {
    pub fn new(epsilon: f64) -> Self {
        Self {
            epsilon,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.epsilon.is_finite() || self.epsilon <= 0.0 {
            return Err(Error::Config(format!(
                "regularization epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if !self.tolerance.is_finite() || self.tolerance <= 0.0 {
            return Err(Error::Config(format!(
                "tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::Config("max_iterations must be at least 1".into()));
        }
        Ok(())
    }
}

impl Default for SinkhornSettings {
    fn default() -> Self {
        Self {
            epsilon: 0.04,
            tolerance: 1e-9,
            max_iterations: 100_000,
            log_domain: false,
        }
    }
}

/// Result of a forward solve: the plan, its linear transport cost, the
/// iterations used, and the final marginal residual.
#[derive(Clone, Debug, PartialEq)]
pub struct SolveReport {
    pub coupling: Coupling,
    pub objective: f64,
    pub iterations: usize,
    pub residual: f64,
}

/// Which forward solver an inference run uses.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverChoice {
    Exact,
    Sinkhorn(SinkhornSettings),
}

impl SolverChoice {
    pub fn solve(&self, prob: &TransportProblem) -> Result<SolveReport> {
        match self {
            SolverChoice::Exact => solve_exact(prob),
            SolverChoice::Sinkhorn(settings) => solve_sinkhorn(prob, settings),
        }
    }
}

/// Linear transport cost `<C, T>` of a plan under a cost matrix.
pub fn transport_objective(cost: &ProbMatrix, plan: &Coupling) -> Result<f64> {
    frobenius_inner(cost.as_array(), plan.plan())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::Array2;

    #[test]
    fn problem_validates_dimensions() {
        let p = ProbVector::from_slice(&[0.5, 0.5]).unwrap();
        let q = ProbVector::from_slice(&[0.3, 0.3, 0.4]).unwrap();
        let c = ProbMatrix::new(Array2::from_elem((2, 2), 0.25)).unwrap();
        assert!(TransportProblem::new(p, q, c).is_err());
    }

    #[test]
    fn objective_of_uniform_cost_is_constant() {
        // Any plan sums to one, so a flat cost gives exactly 1/n^2.
        let p = ProbVector::from_slice(&[0.5, 0.5]).unwrap();
        let q = ProbVector::from_slice(&[0.25, 0.75]).unwrap();
        let c = ProbMatrix::new(Array2::from_elem((2, 2), 0.25)).unwrap();
        let plan = ndarray::array![[0.25, 0.25], [0.0, 0.5]];
        let coupling = Coupling::new(plan, p, q).unwrap();
        assert_abs_diff_eq!(
            transport_objective(&c, &coupling).unwrap(),
            0.25,
            epsilon = 1e-15
        );
    }

    #[test]
    fn objective_sums_over_support_only() {
        let p = ProbVector::from_slice(&[0.5, 0.5]).unwrap();
        let q = ProbVector::from_slice(&[0.5, 0.5]).unwrap();
        let c = ProbMatrix::from_rows(&[vec![0.1, 0.3], vec![0.2, 0.4]]).unwrap();
        let plan = ndarray::array![[0.5, 0.0], [0.0, 0.5]];
        let coupling = Coupling::new(plan, p, q).unwrap();
        assert_abs_diff_eq!(
            transport_objective(&c, &coupling).unwrap(),
            0.5 * 0.1 + 0.5 * 0.4,
            epsilon = 1e-15
        );
    }

    #[test]
    fn settings_validate() {
        assert!(SinkhornSettings::new(0.0).validate().is_err());
        assert!(SinkhornSettings::new(0.04).validate().is_ok());
        let bad = SinkhornSettings {
            max_iterations: 0,
            ..SinkhornSettings::default()
        };
        assert!(bad.validate().is_err());
    }
}
