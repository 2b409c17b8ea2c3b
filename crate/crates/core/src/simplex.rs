//! Probability-simplex types and elementary functionals.
//!
//! [`ProbVector`] and [`ProbMatrix`] are validated points of the probability
//! simplex. [`PositiveVector`] and [`PositiveMatrix`] hold unnormalized
//! nonnegative mass that maps onto the simplex through [`normalize_vector`]
//! and [`normalize_matrix`] (exact division by the computed sum). A
//! [`Coupling`] is a transport plan with prescribed marginals.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Absolute tolerance on the total mass of validated probability types.
pub const PROB_SUM_TOL: f64 = 1e-12;
/// Absolute tolerance on the marginal constraints of a [`Coupling`].
pub const COUPLING_TOL: f64 = 1e-8;

fn check_finite_nonneg<'a>(entries: impl Iterator<Item = &'a f64>, what: &str) -> Result<()> {
    for (k, &x) in entries.enumerate() {
        if !x.is_finite() {
            return Err(Error::Domain(format!("{what} entry {k} is not finite ({x})")));
        }
        if x < 0.0 {
            return Err(Error::Domain(format!("{what} entry {k} is negative ({x})")));
        }
    }
    Ok(())
}

/// A nonnegative vector summing to one (a probability mass function).
#[derive(Clone, Debug, PartialEq)]
pub struct ProbVector(Array1<f64>);

impl ProbVector {
    pub fn new(entries: Array1<f64>) -> Result<Self> {
        check_finite_nonneg(entries.iter(), "probability vector")?;
        let sum = entries.sum();
        if (sum - 1.0).abs() > PROB_SUM_TOL {
            return Err(Error::Domain(format!(
                "probability vector sums to {sum}, expected 1 within {PROB_SUM_TOL:e}"
            )));
        }
        Ok(Self(entries))
    }

    pub fn from_slice(entries: &[f64]) -> Result<Self> {
        Self::new(Array1::from(entries.to_vec()))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_array(&self) -> &Array1<f64> {
        &self.0
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice().expect("contiguous")
    }
}

impl std::ops::Index<usize> for ProbVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// A square nonnegative matrix whose entries sum to one.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbMatrix(Array2<f64>);

impl ProbMatrix {
    pub fn new(entries: Array2<f64>) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::Shape(format!(
                "probability matrix must be square, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        check_finite_nonneg(entries.iter(), "probability matrix")?;
        let sum = entries.sum();
        if (sum - 1.0).abs() > PROB_SUM_TOL {
            return Err(Error::Domain(format!(
                "probability matrix sums to {sum}, expected 1 within {PROB_SUM_TOL:e}"
            )));
        }
        Ok(Self(entries))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut m = Array2::zeros((n, n));
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Shape(format!(
                    "row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            for (j, &x) in row.iter().enumerate() {
                m[[i, j]] = x;
            }
        }
        Self::new(m)
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.0
    }
}

impl std::ops::Index<(usize, usize)> for ProbMatrix {
    type Output = f64;
    fn index(&self, ij: (usize, usize)) -> &f64 {
        &self.0[ij]
    }
}

/// Unnormalized nonnegative mass on indices; normalizes onto the simplex.
///
/// Construction only rejects negative or non-finite entries. A vector with
/// zero total mass is representable but fails to normalize with
/// [`Error::DegenerateLatent`].
#[derive(Clone, Debug, PartialEq)]
pub struct PositiveVector(Array1<f64>);

impl PositiveVector {
    pub fn new(entries: Array1<f64>) -> Result<Self> {
        check_finite_nonneg(entries.iter(), "positive vector")?;
        Ok(Self(entries))
    }

    pub fn from_slice(entries: &[f64]) -> Result<Self> {
        Self::new(Array1::from(entries.to_vec()))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_array(&self) -> &Array1<f64> {
        &self.0
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice().expect("contiguous")
    }
}

/// Square counterpart of [`PositiveVector`].
#[derive(Clone, Debug, PartialEq)]
pub struct PositiveMatrix(Array2<f64>);

impl PositiveMatrix {
    pub fn new(entries: Array2<f64>) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::Shape(format!(
                "positive matrix must be square, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        check_finite_nonneg(entries.iter(), "positive matrix")?;
        Ok(Self(entries))
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.0
    }
}

impl std::ops::Index<(usize, usize)> for PositiveMatrix {
    type Output = f64;
    fn index(&self, ij: (usize, usize)) -> &f64 {
        &self.0[ij]
    }
}

/// A transport plan together with the marginals it satisfies.
///
/// Row sums match `row_marginal` and column sums match `col_marginal` within
/// [`COUPLING_TOL`]; the entries sum to one within the same tolerance.
#[derive(Clone, Debug, PartialEq)]
pub struct Coupling {
    plan: Array2<f64>,
    row_marginal: ProbVector,
    col_marginal: ProbVector,
}

impl Coupling {
    pub fn new(plan: Array2<f64>, row_marginal: ProbVector, col_marginal: ProbVector) -> Result<Self> {
        let n = row_marginal.len();
        if plan.nrows() != n || plan.ncols() != col_marginal.len() {
            return Err(Error::Shape(format!(
                "plan is {}x{} but marginals have lengths {} and {}",
                plan.nrows(),
                plan.ncols(),
                n,
                col_marginal.len()
            )));
        }
        check_finite_nonneg(plan.iter(), "coupling plan")?;
        for (i, row) in plan.rows().into_iter().enumerate() {
            let s = row.sum();
            if (s - row_marginal[i]).abs() > COUPLING_TOL {
                return Err(Error::Domain(format!(
                    "row {i} sums to {s}, expected {} within {COUPLING_TOL:e}",
                    row_marginal[i]
                )));
            }
        }
        for (j, col) in plan.columns().into_iter().enumerate() {
            let s = col.sum();
            if (s - col_marginal[j]).abs() > COUPLING_TOL {
                return Err(Error::Domain(format!(
                    "column {j} sums to {s}, expected {} within {COUPLING_TOL:e}",
                    col_marginal[j]
                )));
            }
        }
        let total = plan.sum();
        if (total - 1.0).abs() > COUPLING_TOL {
            return Err(Error::Domain(format!(
                "plan entries sum to {total}, expected 1 within {COUPLING_TOL:e}"
            )));
        }
        Ok(Self {
            plan,
            row_marginal,
            col_marginal,
        })
    }

    pub fn plan(&self) -> &Array2<f64> {
        &self.plan
    }

    pub fn into_plan(self) -> Array2<f64> {
        self.plan
    }

    pub fn row_marginal(&self) -> &ProbVector {
        &self.row_marginal
    }

    pub fn col_marginal(&self) -> &ProbVector {
        &self.col_marginal
    }

    /// Largest absolute violation of either marginal constraint.
    pub fn marginal_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for (i, row) in self.plan.rows().into_iter().enumerate() {
            worst = worst.max((row.sum() - self.row_marginal[i]).abs());
        }
        for (j, col) in self.plan.columns().into_iter().enumerate() {
            worst = worst.max((col.sum() - self.col_marginal[j]).abs());
        }
        worst
    }
}

/// Normalize unnormalized mass to a probability vector: `u_j / sum(u)`.
///
/// Scale-invariant: `normalize_vector(c * u) == normalize_vector(u)` for any
/// `c > 0` up to rounding in the last place.
pub fn normalize_vector(u: &PositiveVector) -> Result<ProbVector> {
    let sum = u.as_array().sum();
    if sum <= 0.0 {
        return Err(Error::DegenerateLatent(
            "cannot normalize a vector with zero total mass".into(),
        ));
    }
    ProbVector::new(u.as_array() / sum)
}

/// Normalize unnormalized mass to a probability matrix: `W_ij / sum(W)`.
pub fn normalize_matrix(w: &PositiveMatrix) -> Result<ProbMatrix> {
    let sum = w.as_array().sum();
    if sum <= 0.0 {
        return Err(Error::DegenerateLatent(
            "cannot normalize a matrix with zero total mass".into(),
        ));
    }
    ProbMatrix::new(w.as_array() / sum)
}

/// Frobenius inner product `sum_ij A_ij B_ij` of two equally shaped matrices.
pub fn frobenius_inner(a: &Array2<f64>, b: &Array2<f64>) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::Shape(format!(
            "inner product of {:?} and {:?} matrices",
            a.dim(),
            b.dim()
        )));
    }
    Ok(a.iter().zip(b.iter()).map(|(x, y)| x * y).sum())
}

/// Squared Frobenius distance `|A - B|^2` of two equally shaped matrices.
pub fn frobenius_distance_sq(a: &Array2<f64>, b: &Array2<f64>) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::Shape(format!(
            "distance of {:?} and {:?} matrices",
            a.dim(),
            b.dim()
        )));
    }
    Ok(a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum())
}

/// Discrete entropy `H(T) = -sum_ij T_ij (log T_ij - 1)` with `0 log 0 = 0`.
pub fn entropy(t: &Array2<f64>) -> Result<f64> {
    let mut h = 0.0;
    for (k, &x) in t.iter().enumerate() {
        if !x.is_finite() || x < 0.0 {
            return Err(Error::Domain(format!(
                "entropy needs nonnegative entries, entry {k} is {x}"
            )));
        }
        if x > 0.0 {
            h -= x * (x.ln() - 1.0);
        }
    }
    Ok(h)
}

/// Unnormalized Kullback-Leibler divergence
/// `D(T || K) = sum_ij T_ij log(T_ij / K_ij) - T_ij + K_ij` with `0 log 0 = 0`.
///
/// Nonnegative whenever both arguments carry equal total mass, and zero iff
/// `T == K`.
pub fn kl_divergence(t: &Array2<f64>, k: &Array2<f64>) -> Result<f64> {
    if t.dim() != k.dim() {
        return Err(Error::Shape(format!(
            "kl divergence of {:?} and {:?} matrices",
            t.dim(),
            k.dim()
        )));
    }
    let mut d = 0.0;
    for (idx, (&ti, &ki)) in t.iter().zip(k.iter()).enumerate() {
        if !ti.is_finite() || ti < 0.0 {
            return Err(Error::Domain(format!(
                "kl divergence needs nonnegative first argument, entry {idx} is {ti}"
            )));
        }
        if !ki.is_finite() || ki < 0.0 {
            return Err(Error::Domain(format!(
                "kl divergence needs nonnegative second argument, entry {idx} is {ki}"
            )));
        }
        if ti > 0.0 {
            if ki == 0.0 {
                return Err(Error::Domain(format!(
                    "kl divergence undefined: entry {idx} has zero reference mass under positive mass"
                )));
            }
            d += ti * (ti / ki).ln() - ti + ki;
        } else {
            d += ki;
        }
    }
    Ok(d)
}

// Serde representations: vectors as plain JSON arrays, matrices as arrays of
// rows. Deserialization re-validates the type invariants.

impl Serialize for ProbVector {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.0.to_vec().serialize(s)
    }
}

impl<'de> Deserialize<'de> for ProbVector {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<f64>::deserialize(d)?;
        ProbVector::from_slice(&v).map_err(serde::de::Error::custom)
    }
}

impl Serialize for PositiveVector {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.0.to_vec().serialize(s)
    }
}

impl<'de> Deserialize<'de> for PositiveVector {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<f64>::deserialize(d)?;
        PositiveVector::from_slice(&v).map_err(serde::de::Error::custom)
    }
}

fn rows_of(m: &Array2<f64>) -> Vec<Vec<f64>> {
    m.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn array_from_rows(rows: Vec<Vec<f64>>) -> std::result::Result<Array2<f64>, String> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    let mut m = Array2::zeros((nrows, ncols));
    for (i, row) in rows.into_iter().enumerate() {
        if row.len() != ncols {
            return Err(format!("ragged matrix: row {i} has {} entries", row.len()));
        }
        for (j, x) in row.into_iter().enumerate() {
            m[[i, j]] = x;
        }
    }
    Ok(m)
}

impl Serialize for ProbMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        rows_of(&self.0).serialize(s)
    }
}

impl<'de> Deserialize<'de> for ProbMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        let m = array_from_rows(rows).map_err(serde::de::Error::custom)?;
        ProbMatrix::new(m).map_err(serde::de::Error::custom)
    }
}

impl Serialize for PositiveMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        rows_of(&self.0).serialize(s)
    }
}

impl<'de> Deserialize<'de> for PositiveMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        let m = array_from_rows(rows).map_err(serde::de::Error::custom)?;
        PositiveMatrix::new(m).map_err(serde::de::Error::custom)
    }
}
