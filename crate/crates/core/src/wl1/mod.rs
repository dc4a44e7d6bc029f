//! Weighted-l1 penalized convex solvers.
//!
//! Each LLA iteration solves `min loss(b) + sum_j w_j |b_j|`; this module
//! holds one solver per loss family, the CLIME initializer, the restricted
//! (oracle) fits, and an independent KKT checker.

mod cd;
mod clime;
pub mod kkt;
mod linear;
mod logistic;
mod lp;
mod precision;
mod quantile;
mod restricted;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{loss_value, Estimate, LossKind, Problem};
use crate::penalty::PenaltySpec;

pub use clime::{clime_columns, solve_clime, solve_clime_with, ClimeSymmetrization};
pub use linear::solve_weighted_l1_linear;
pub use logistic::solve_weighted_l1_logistic;
pub use precision::solve_weighted_l1_precision;
pub use quantile::solve_weighted_l1_quantile;
pub use restricted::solve_restricted;

/// Nonnegative penalty weights: one per coordinate, or a symmetric matrix
/// with zero diagonal for precision problems.
#[derive(Debug, Clone, PartialEq)]
pub enum Weights {
    Vector(DVector<f64>),
    Matrix(DMatrix<f64>),
}

impl Weights {
    pub fn vector(w: DVector<f64>) -> Result<Self> {
        if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Validation("weights must be finite and nonnegative".into()));
        }
        Ok(Weights::Vector(w))
    }

    pub fn matrix(w: DMatrix<f64>) -> Result<Self> {
        let q = w.nrows();
        if w.ncols() != q {
            return Err(Error::Validation("weight matrix must be square".into()));
        }
        if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Validation("weights must be finite and nonnegative".into()));
        }
        for j in 0..q {
            if w[(j, j)] != 0.0 {
                return Err(Error::Validation("weight matrix must have a zero diagonal".into()));
            }
            for k in 0..j {
                if w[(j, k)] != w[(k, j)] {
                    return Err(Error::Validation("weight matrix must be symmetric".into()));
                }
            }
        }
        Ok(Weights::Matrix(w))
    }

    /// The same weight on every penalized entry.
    pub fn uniform(problem: &Problem, value: f64) -> Result<Self> {
        let d = problem.dim();
        if problem.is_precision() {
            let mut w = DMatrix::from_element(d, d, value);
            w.fill_diagonal(0.0);
            Self::matrix(w)
        } else {
            Self::vector(DVector::from_element(d, value))
        }
    }

    /// `w_j = P'(|b_j|)`, the LLA weight update.
    pub fn from_estimate(penalty: &PenaltySpec, est: &Estimate) -> Self {
        match est {
            Estimate::Vector(b) => Weights::Vector(b.map(|v| penalty.weight(v))),
            Estimate::Matrix(t) => {
                let q = t.nrows();
                // Entries of a symmetric iterate agree; average guards against
                // an asymmetric initializer.
                let w = DMatrix::from_fn(q, q, |j, k| {
                    if j == k {
                        0.0
                    } else {
                        penalty.weight(0.5 * (t[(j, k)] + t[(k, j)]))
                    }
                });
                Weights::Matrix(w)
            }
        }
    }

    pub fn as_vector(&self) -> Option<&DVector<f64>> {
        match self {
            Weights::Vector(w) => Some(w),
            Weights::Matrix(_) => None,
        }
    }

    pub fn as_matrix(&self) -> Option<&DMatrix<f64>> {
        match self {
            Weights::Matrix(w) => Some(w),
            Weights::Vector(_) => None,
        }
    }

    pub(crate) fn check_against(&self, problem: &Problem) -> Result<()> {
        let d = problem.dim();
        match (self, problem.is_precision()) {
            (Weights::Vector(w), false) if w.len() == d => Ok(()),
            (Weights::Matrix(w), true) if w.nrows() == d => Ok(()),
            (Weights::Vector(w), false) => Err(Error::DimensionMismatch {
                expected: d,
                found: w.len(),
            }),
            (Weights::Matrix(w), true) => Err(Error::DimensionMismatch {
                expected: d,
                found: w.nrows(),
            }),
            _ => Err(Error::Validation("weight shape does not match the problem".into())),
        }
    }

    /// `sum_j w_j |b_j|` (each ordered off-diagonal pair for matrices).
    pub fn penalty(&self, est: &Estimate) -> f64 {
        match (self, est) {
            (Weights::Vector(w), Estimate::Vector(b)) => {
                w.iter().zip(b.iter()).map(|(w, b)| w * b.abs()).sum()
            }
            (Weights::Matrix(w), Estimate::Matrix(t)) => {
                w.iter().zip(t.iter()).map(|(w, t)| w * t.abs()).sum()
            }
            _ => f64::NAN,
        }
    }
}

/// Solver tolerances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    /// KKT residual target.
    pub tol: f64,
    pub max_iter: usize,
    /// Tolerance of inner quadratic solves (proximal Newton, graphical
    /// lasso column updates).
    pub inner_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 10_000,
            inner_tol: 1e-11,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::Validation(format!("tol must be positive, got {}", self.tol)));
        }
        if !(self.inner_tol > 0.0 && self.inner_tol.is_finite()) {
            return Err(Error::Validation(format!(
                "inner_tol must be positive, got {}",
                self.inner_tol
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::Validation("max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

/// Convergence diagnostics reported with every solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverDiagnostics {
    pub iterations: usize,
    pub kkt_residual: f64,
    pub objective: f64,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub estimate: Estimate,
    pub diagnostics: SolverDiagnostics,
}

/// `loss(b) + sum_j w_j |b_j|`; infinite for a non-PD precision estimate.
pub fn weighted_objective(problem: &Problem, weights: &Weights, est: &Estimate) -> Result<f64> {
    let loss = match loss_value(problem, est) {
        Ok(v) => v,
        Err(Error::Domain(_)) if problem.is_precision() => f64::INFINITY,
        Err(e) => return Err(e),
    };
    Ok(loss + weights.penalty(est))
}

/// Dispatches to the solver for the problem's loss family. `warm` seeds the
/// iterate where the solver supports it.
pub fn solve_weighted_l1(
    problem: &Problem,
    weights: &Weights,
    opts: &SolverOptions,
    warm: Option<&Estimate>,
) -> Result<Solution> {
    match problem.kind() {
        LossKind::Linear => linear::solve_with_start(problem, weights, opts, warm),
        LossKind::Logistic => logistic::solve_with_start(problem, weights, opts, warm),
        LossKind::Quantile { .. } => solve_weighted_l1_quantile(problem, weights, opts),
        LossKind::Precision => {
            let s = problem.covariance()?;
            precision::solve_with_start(s, weights, opts, warm)
        }
    }
}

pub(crate) fn vector_weights<'a>(problem: &Problem, weights: &'a Weights) -> Result<&'a DVector<f64>> {
    weights.check_against(problem)?;
    weights
        .as_vector()
        .ok_or_else(|| Error::Validation("expected a weight vector".into()))
}

pub(crate) fn warm_vector(problem: &Problem, warm: Option<&Estimate>) -> DVector<f64> {
    match warm.and_then(|w| w.as_vector()) {
        Some(v) if v.len() == problem.dim() && v.iter().all(|x| x.is_finite()) => v.clone(),
        _ => DVector::zeros(problem.dim()),
    }
}
