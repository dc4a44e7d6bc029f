use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::lp::clime_column_lp;
use super::{Solution, SolverDiagnostics, SolverOptions};
use crate::error::{Error, Result};
use crate::model::Estimate;

/// How the column-wise CLIME solution is made symmetric.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClimeSymmetrization {
    /// Keep whichever of `t_jk`, `t_kj` has the smaller magnitude.
    #[default]
    MinMagnitude,
    Average,
}

/// CLIME: each column minimizes `|t|_1` subject to
/// `|S t - e_j|_inf <= lambda_clime`, then the columns are symmetrized.
pub fn solve_clime(
    sample_cov: &DMatrix<f64>,
    lambda_clime: f64,
    opts: &SolverOptions,
) -> Result<Solution> {
    solve_clime_with(sample_cov, lambda_clime, opts, ClimeSymmetrization::MinMagnitude)
}

pub fn solve_clime_with(
    sample_cov: &DMatrix<f64>,
    lambda_clime: f64,
    opts: &SolverOptions,
    rule: ClimeSymmetrization,
) -> Result<Solution> {
    opts.validate()?;
    if !(lambda_clime > 0.0 && lambda_clime.is_finite()) {
        return Err(Error::Validation(format!(
            "CLIME level must be positive, got {lambda_clime}"
        )));
    }
    let q = sample_cov.nrows();
    if sample_cov.ncols() != q {
        return Err(Error::Validation("sample covariance must be square".into()));
    }
    let columns = clime_columns(sample_cov, lambda_clime, opts.tol)?;
    let theta = symmetrize(&columns, rule);
    let objective = theta.iter().map(|v| v.abs()).sum();
    Ok(Solution {
        estimate: Estimate::Matrix(theta),
        diagnostics: SolverDiagnostics {
            iterations: q,
            kkt_residual: 0.0,
            objective,
        },
    })
}

/// Column solutions before symmetrization, each certified feasible.
pub fn clime_columns(sample_cov: &DMatrix<f64>, lambda_clime: f64, tol: f64) -> Result<DMatrix<f64>> {
    let q = sample_cov.nrows();
    let mut out = DMatrix::zeros(q, q);
    for j in 0..q {
        let col = clime_column_lp(sample_cov, j, lambda_clime)?;
        let resid = sample_cov * &col;
        let violation = (0..q)
            .map(|i| (resid[i] - if i == j { 1.0 } else { 0.0 }).abs() - lambda_clime)
            .fold(f64::NEG_INFINITY, f64::max);
        if violation > tol {
            return Err(Error::convergence(
                "CLIME column LP",
                j,
                violation,
                Estimate::Matrix(out),
            ));
        }
        out.set_column(j, &col);
    }
    Ok(out)
}

fn symmetrize(t: &DMatrix<f64>, rule: ClimeSymmetrization) -> DMatrix<f64> {
    let q = t.nrows();
    DMatrix::from_fn(q, q, |j, k| {
        let (a, b) = (t[(j, k)], t[(k, j)]);
        match rule {
            ClimeSymmetrization::MinMagnitude => {
                if a.abs() <= b.abs() {
                    a
                } else {
                    b
                }
            }
            ClimeSymmetrization::Average => 0.5 * (a + b),
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_shrinks_by_lambda() {
        let s = DMatrix::identity(4, 4);
        let sol = solve_clime(&s, 0.3, &SolverOptions::default()).unwrap();
        let t = sol.estimate.as_matrix().unwrap();
        assert!((t - DMatrix::identity(4, 4) * 0.7).abs().max() < 1e-12);
    }

    #[test]
    fn large_lambda_gives_zero() {
        let s = DMatrix::identity(3, 3);
        let sol = solve_clime(&s, 1.0, &SolverOptions::default()).unwrap();
        assert_eq!(sol.estimate.as_matrix().unwrap(), &DMatrix::zeros(3, 3));
    }

    #[test]
    fn rejects_nonpositive_level() {
        assert!(solve_clime(&DMatrix::identity(2, 2), 0.0, &SolverOptions::default()).is_err());
    }

    #[test]
    fn min_magnitude_symmetrization() {
        let t = DMatrix::from_row_slice(2, 2, &[1.0, -0.2, 0.5, 2.0]);
        let s = symmetrize(&t, ClimeSymmetrization::MinMagnitude);
        assert_eq!(s[(0, 1)], -0.2);
        assert_eq!(s[(1, 0)], -0.2);
    }
}
