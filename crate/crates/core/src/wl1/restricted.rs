//! Unpenalized fits restricted to a known support (the oracle estimator).

use nalgebra::{DMatrix, DVector};

use super::lp::{quantile_lp, quantile_objective};
use super::precision::{assemble, others};
use super::{Solution, SolverDiagnostics, SolverOptions};
use crate::error::{Error, Result};
use crate::linalg::{cholesky, sigmoid, spd_inverse};
use crate::model::{loss_value, logistic_loss, Estimate, LossKind, Problem, Support};

/// `argmin loss(b)` over `b` vanishing outside `support`.
///
/// Linear: normal equations on the support columns. Logistic: damped
/// Newton. Quantile: the restricted LP. Precision: the graphical model
/// with known structure, cycling over columns until the fitted covariance
/// matches `S` on the diagonal and the support edges.
pub fn solve_restricted(problem: &Problem, support: &Support, opts: &SolverOptions) -> Result<Solution> {
    opts.validate()?;
    match (problem.kind(), support) {
        (LossKind::Precision, Support::Edges(_)) => restricted_precision(problem, support, opts),
        (LossKind::Precision, Support::Coordinates(_)) => Err(Error::Validation(
            "precision problems take an edge support".into(),
        )),
        (_, Support::Edges(_)) => Err(Error::Validation(
            "regression problems take a coordinate support".into(),
        )),
        (kind, Support::Coordinates(cols)) => {
            let p = problem.dim();
            let mut cols = cols.clone();
            cols.sort_unstable();
            cols.dedup();
            if cols.is_empty() {
                return Err(Error::Validation("support must be nonempty".into()));
            }
            if let Some(&bad) = cols.iter().find(|&&j| j >= p) {
                return Err(Error::Validation(format!("support index {bad} out of range")));
            }
            match kind {
                LossKind::Linear => restricted_linear(problem, &cols),
                LossKind::Logistic => restricted_logistic(problem, &cols, opts),
                LossKind::Quantile { tau } => restricted_quantile(problem, &cols, tau),
                LossKind::Precision => unreachable!(),
            }
        }
    }
}

fn embed(p: usize, cols: &[usize], values: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(p);
    for (k, &j) in cols.iter().enumerate() {
        out[j] = values[k];
    }
    out
}

fn restricted_linear(problem: &Problem, cols: &[usize]) -> Result<Solution> {
    let (x, y) = problem.regression_data()?;
    let xa = x.select_columns(cols);
    let gram = xa.tr_mul(&xa);
    let chol = cholesky(&gram)
        .ok_or_else(|| Error::Singular("restricted design is rank deficient".into()))?;
    let beta_a = chol.solve(&xa.tr_mul(y));
    if beta_a.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular("restricted design is rank deficient".into()));
    }
    let beta = embed(x.ncols(), cols, &beta_a);
    let n = y.len() as f64;
    let grad = xa.tr_mul(&(&xa * &beta_a - y)) / n;
    let estimate = Estimate::Vector(beta);
    let objective = loss_value(problem, &estimate)?;
    Ok(Solution {
        estimate,
        diagnostics: SolverDiagnostics {
            iterations: 1,
            kkt_residual: grad.amax(),
            objective,
        },
    })
}

fn restricted_logistic(problem: &Problem, cols: &[usize], opts: &SolverOptions) -> Result<Solution> {
    const SEPARATION_LOSS: f64 = 1e-6;
    let (x, y) = problem.regression_data()?;
    let xa = x.select_columns(cols);
    let n = y.len() as f64;
    let k = cols.len();
    let mut beta = DVector::zeros(k);
    let mut f = logistic_loss(&xa, y, &beta);
    let mut gnorm = f64::INFINITY;
    for iter in 1..=opts.max_iter {
        let mu = (&xa * &beta).map(sigmoid);
        let grad = xa.tr_mul(&(&mu - y)) / n;
        gnorm = grad.amax();
        if gnorm <= opts.tol {
            if f < SEPARATION_LOSS {
                break;
            }
            let estimate = Estimate::Vector(embed(x.ncols(), cols, &beta));
            return Ok(Solution {
                estimate,
                diagnostics: SolverDiagnostics {
                    iterations: iter,
                    kkt_residual: gnorm,
                    objective: f,
                },
            });
        }
        let mut xh = xa.clone();
        for (i, mut row) in xh.row_iter_mut().enumerate() {
            row *= (mu[i] * (1.0 - mu[i])).max(1e-12);
        }
        let hess = xa.tr_mul(&xh) / n;
        let step = cholesky(&hess)
            .ok_or_else(|| Error::Singular("restricted logistic Hessian is singular".into()))?
            .solve(&grad);
        let mut t = 1.0;
        loop {
            let trial = &beta - &step * t;
            let ft = logistic_loss(&xa, y, &trial);
            if ft <= f - 1e-4 * t * grad.dot(&step) || t < 1e-12 {
                beta = trial;
                f = ft;
                break;
            }
            t *= 0.5;
        }
        if k > 0 && !beta.iter().all(|v| v.is_finite()) {
            break;
        }
    }
    Err(Error::convergence(
        "restricted logistic Newton",
        opts.max_iter,
        gnorm,
        Estimate::Vector(embed(x.ncols(), cols, &beta)),
    ))
}

fn restricted_quantile(problem: &Problem, cols: &[usize], tau: f64) -> Result<Solution> {
    let (x, y) = problem.regression_data()?;
    let w = vec![0.0; x.ncols()];
    let beta = quantile_lp(x, y, tau, &w, cols)?;
    let objective = quantile_objective(x, y, tau, &w, &beta);
    Ok(Solution {
        estimate: Estimate::Vector(beta),
        diagnostics: SolverDiagnostics {
            iterations: 1,
            kkt_residual: 0.0,
            objective,
        },
    })
}

fn restricted_precision(problem: &Problem, support: &Support, opts: &SolverOptions) -> Result<Solution> {
    let s = problem.covariance()?;
    let q = s.nrows();
    let mask = support.edge_mask(q);
    let mut work = s.clone();
    let mut coef = DMatrix::zeros(q, q);
    let mut residual = f64::INFINITY;

    for sweep in 1..=opts.max_iter {
        let mut max_delta = 0.0_f64;
        for j in 0..q {
            let idx = others(q, j);
            let nb: Vec<usize> = idx.iter().copied().filter(|&k| mask[(k, j)]).collect();
            let mut b = DVector::zeros(idx.len());
            if !nb.is_empty() {
                let sub = work.select_rows(&nb).select_columns(&nb);
                let rhs = DVector::from_iterator(nb.len(), nb.iter().map(|&k| s[(k, j)]));
                let sol = cholesky(&sub)
                    .ok_or_else(|| Error::Singular("restricted precision block is singular".into()))?
                    .solve(&rhs);
                for (pos, &k) in idx.iter().enumerate() {
                    if let Some(t) = nb.iter().position(|&m| m == k) {
                        b[pos] = sol[t];
                    }
                }
            }
            let w11 = work.select_rows(&idx).select_columns(&idx);
            let new12 = &w11 * &b;
            for (pos, &k) in idx.iter().enumerate() {
                max_delta = max_delta.max((new12[pos] - work[(k, j)]).abs());
                work[(k, j)] = new12[pos];
                work[(j, k)] = new12[pos];
                coef[(k, j)] = b[pos];
            }
        }
        if max_delta <= opts.tol * 1e-2 {
            let theta = assemble(&work, &coef)?;
            let inv = spd_inverse(&theta)?;
            residual = 0.0;
            for j in 0..q {
                for k in 0..q {
                    if j == k || mask[(j, k)] {
                        residual = residual.max((inv[(j, k)] - s[(j, k)]).abs());
                    }
                }
            }
            if residual <= opts.tol {
                let estimate = Estimate::Matrix(theta);
                let objective = loss_value(problem, &estimate)?;
                return Ok(Solution {
                    estimate,
                    diagnostics: SolverDiagnostics {
                        iterations: sweep,
                        kkt_residual: residual,
                        objective,
                    },
                });
            }
        }
    }
    Err(Error::convergence(
        "restricted precision fit",
        opts.max_iter,
        residual,
        Estimate::Matrix(assemble(&work, &coef).unwrap_or_else(|_| DMatrix::zeros(q, q))),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_column_least_squares() {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 0.3, 2.0, -1.0, -1.0, 0.5, 0.5, 2.0]);
        let y = DVector::from_vec(vec![1.0, 3.0, -0.5, 2.0]);
        let p = Problem::linear(x.clone(), y.clone()).unwrap();
        let sol = solve_restricted(&p, &Support::Coordinates(vec![0]), &SolverOptions::default()).unwrap();
        let x0 = x.column(0);
        let expect = (x0.dot(&y) / 4.0) / (x0.norm_squared() / 4.0);
        let b = sol.estimate.as_vector().unwrap();
        assert!((b[0] - expect).abs() < 1e-14);
        assert_eq!(b[1], 0.0);
    }

    #[test]
    fn rank_deficiency_is_reported() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 4.0, 3.0, 6.0]);
        let p = Problem::linear(x, DVector::from_vec(vec![1.0, 2.0, 3.0])).unwrap();
        let err = solve_restricted(&p, &Support::Coordinates(vec![0, 1]), &SolverOptions::default());
        assert!(matches!(err, Err(Error::Singular(_))));
    }

    #[test]
    fn empty_support_rejected() {
        let p = Problem::linear(DMatrix::identity(2, 2), DVector::zeros(2)).unwrap();
        assert!(solve_restricted(&p, &Support::Coordinates(vec![]), &SolverOptions::default()).is_err());
    }

    #[test]
    fn precision_matches_covariance_on_support() {
        let s = DMatrix::from_row_slice(
            4,
            4,
            &[
                1.0, 0.5, 0.2, 0.1, 0.5, 1.2, 0.3, 0.0, 0.2, 0.3, 0.9, 0.4, 0.1, 0.0, 0.4, 1.1,
            ],
        );
        let p = Problem::precision(s.clone()).unwrap();
        let support = Support::Edges(vec![(0, 1), (2, 3)]);
        let sol = solve_restricted(&p, &support, &SolverOptions::default()).unwrap();
        let t = sol.estimate.as_matrix().unwrap();
        let inv = spd_inverse(t).unwrap();
        for (j, k) in [(0, 0), (1, 1), (2, 2), (3, 3), (0, 1), (2, 3)] {
            assert!((inv[(j, k)] - s[(j, k)]).abs() < 1e-8);
        }
        for (j, k) in [(0, 2), (0, 3), (1, 2), (1, 3)] {
            assert_eq!(t[(j, k)], 0.0);
        }
    }
}
