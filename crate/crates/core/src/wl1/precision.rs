//! Weighted graphical lasso by block coordinate descent over columns.
//!
//! `W` tracks the current estimate of `Theta^{-1}`; its diagonal stays at
//! `S_jj` because the diagonal of `Theta` is not penalized. Each column is
//! a weighted lasso with Gram `W_11` and linear term `s_12`.

use nalgebra::{DMatrix, DVector};

use super::cd::{quadratic_cd, DenseGram};
use super::kkt::kkt_residual;
use super::{weighted_objective, Solution, SolverDiagnostics, SolverOptions, Weights};
use crate::error::{Error, Result};
use crate::linalg::{cholesky, spd_inverse, symmetrize};
use crate::model::{Estimate, Problem};

pub fn solve_weighted_l1_precision(
    sample_cov: &DMatrix<f64>,
    weights: &Weights,
    opts: &SolverOptions,
) -> Result<Solution> {
    solve_with_start(sample_cov, weights, opts, None)
}

pub(crate) fn others(q: usize, j: usize) -> Vec<usize> {
    (0..q).filter(|&k| k != j).collect()
}

/// Column regression coefficients implied by a precision matrix,
/// `b_{-j} = -Theta_{-j,j} / Theta_jj`.
fn warm_coefficients(q: usize, warm: Option<&Estimate>) -> DMatrix<f64> {
    match warm.and_then(|e| e.as_matrix()) {
        Some(t) if t.nrows() == q && (0..q).all(|j| t[(j, j)] > 0.0) => {
            DMatrix::from_fn(q, q, |k, j| if k == j { 0.0 } else { -t[(k, j)] / t[(j, j)] })
        }
        _ => DMatrix::zeros(q, q),
    }
}

/// Working covariance for a warm start: `Theta^{-1}` with its diagonal
/// reset to `S_jj`, or `S` itself when that is not positive definite.
fn warm_covariance(s: &DMatrix<f64>, warm: Option<&Estimate>) -> DMatrix<f64> {
    let Some(t) = warm.and_then(|e| e.as_matrix()).filter(|t| t.shape() == s.shape()) else {
        return s.clone();
    };
    match spd_inverse(t) {
        Ok(mut w) => {
            for j in 0..s.nrows() {
                w[(j, j)] = s[(j, j)];
            }
            if cholesky(&w).is_some() {
                w
            } else {
                s.clone()
            }
        }
        Err(_) => s.clone(),
    }
}

/// `Theta` from the working covariance and the column coefficients.
pub(crate) fn assemble(w: &DMatrix<f64>, coef: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let q = w.nrows();
    let mut theta = DMatrix::zeros(q, q);
    for j in 0..q {
        let mut quad = 0.0;
        for k in 0..q {
            if k != j {
                quad += w[(k, j)] * coef[(k, j)];
            }
        }
        let denom = w[(j, j)] - quad;
        if denom.is_nan() || denom <= 0.0 {
            return Err(Error::Domain("graphical lasso lost positive definiteness".into()));
        }
        let tjj = 1.0 / denom;
        theta[(j, j)] = tjj;
        for k in 0..q {
            if k != j {
                theta[(k, j)] = -coef[(k, j)] * tjj;
            }
        }
    }
    Ok(symmetrize(&theta))
}

pub(crate) fn solve_with_start(
    sample_cov: &DMatrix<f64>,
    weights: &Weights,
    opts: &SolverOptions,
    warm: Option<&Estimate>,
) -> Result<Solution> {
    opts.validate()?;
    let problem = Problem::precision(sample_cov.clone())?;
    weights.check_against(&problem)?;
    let wts = weights.as_matrix().expect("checked");
    let s = sample_cov;
    let q = s.nrows();

    let mut work = warm_covariance(s, warm);
    let mut coef = warm_coefficients(q, warm);
    let mut kkt = f64::INFINITY;
    let mut last = None;

    for sweep in 1..=opts.max_iter {
        let mut max_delta = 0.0_f64;
        for j in 0..q {
            let idx = others(q, j);
            if idx.is_empty() {
                continue;
            }
            let w11 = work.select_rows(&idx).select_columns(&idx);
            let s12: Vec<f64> = idx.iter().map(|&k| s[(k, j)]).collect();
            let pen: Vec<f64> = idx.iter().map(|&k| wts[(k, j)]).collect();
            let mut b: Vec<f64> = idx.iter().map(|&k| coef[(k, j)]).collect();
            quadratic_cd(&mut DenseGram::new(&w11), &s12, &pen, &mut b, opts.inner_tol, opts.max_iter);
            let new12 = &w11 * DVector::from_column_slice(&b);
            for (pos, &k) in idx.iter().enumerate() {
                max_delta = max_delta.max((new12[pos] - work[(k, j)]).abs());
                work[(k, j)] = new12[pos];
                work[(j, k)] = new12[pos];
                coef[(k, j)] = b[pos];
            }
        }
        if max_delta <= opts.tol {
            let theta = assemble(&work, &coef)?;
            if cholesky(&theta).is_none() {
                return Err(Error::Domain("graphical lasso lost positive definiteness".into()));
            }
            let est = Estimate::Matrix(theta);
            kkt = kkt_residual(&problem, weights, &est)?;
            if kkt <= opts.tol {
                let objective = weighted_objective(&problem, weights, &est)?;
                return Ok(Solution {
                    estimate: est,
                    diagnostics: SolverDiagnostics {
                        iterations: sweep,
                        kkt_residual: kkt,
                        objective,
                    },
                });
            }
            last = Some(est);
        }
    }
    let last = match last {
        Some(e) => e,
        None => Estimate::Matrix(assemble(&work, &coef).unwrap_or_else(|_| DMatrix::zeros(q, q))),
    };
    Err(Error::convergence("weighted graphical lasso", opts.max_iter, kkt, last))
}
