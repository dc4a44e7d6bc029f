use nalgebra::DVector;

use super::cd::{quadratic_cd, DesignGram};
use super::{vector_weights, warm_vector, weighted_objective, Solution, SolverDiagnostics, SolverOptions, Weights};
use crate::error::{Error, Result};
use crate::model::{Estimate, LossKind, Problem};

/// Weighted-l1 least squares, `(2n)^{-1} |y - Xb|^2 + sum_j w_j |b_j|`,
/// by cyclic coordinate descent with covariance updates.
pub fn solve_weighted_l1_linear(
    problem: &Problem,
    weights: &Weights,
    opts: &SolverOptions,
) -> Result<Solution> {
    solve_with_start(problem, weights, opts, None)
}

pub(crate) fn solve_with_start(
    problem: &Problem,
    weights: &Weights,
    opts: &SolverOptions,
    warm: Option<&Estimate>,
) -> Result<Solution> {
    if problem.kind() != LossKind::Linear {
        return Err(Error::Validation("linear solver needs a linear problem".into()));
    }
    opts.validate()?;
    let w = vector_weights(problem, weights)?;
    let (x, y) = problem.regression_data()?;
    let n = y.len() as f64;
    let c: Vec<f64> = x.tr_mul(y).iter().map(|v| v / n).collect();
    let mut beta: Vec<f64> = warm_vector(problem, warm).iter().copied().collect();

    let mut gram = DesignGram::new(x);
    let outcome = quadratic_cd(&mut gram, &c, w.as_slice(), &mut beta, opts.tol, opts.max_iter);
    let estimate = Estimate::Vector(DVector::from_vec(beta));
    if !outcome.converged {
        return Err(Error::convergence(
            "weighted-l1 linear coordinate descent",
            outcome.sweeps,
            outcome.kkt,
            estimate,
        ));
    }
    let objective = weighted_objective(problem, weights, &estimate)?;
    Ok(Solution {
        estimate,
        diagnostics: SolverDiagnostics {
            iterations: outcome.sweeps,
            kkt_residual: outcome.kkt,
            objective,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wl1::kkt::kkt_residual;
    use nalgebra::DMatrix;

    fn small_problem() -> Problem {
        let x = DMatrix::from_row_slice(
            6,
            3,
            &[
                1.0, 0.2, -0.3, 0.5, 1.1, 0.4, -0.7, 0.3, 1.0, 1.2, -0.4, 0.0, 0.1, 0.9, -1.3, -0.8,
                -0.6, 0.5,
            ],
        );
        let y = DVector::from_vec(vec![1.0, 2.0, -0.5, 0.7, 1.5, -1.2]);
        Problem::linear(x, y).unwrap()
    }

    #[test]
    fn zero_weights_give_least_squares() {
        let p = small_problem();
        let sol = solve_weighted_l1_linear(&p, &Weights::uniform(&p, 0.0).unwrap(), &SolverOptions::default()).unwrap();
        let x = p.design().unwrap();
        let y = p.response().unwrap();
        let ols = (x.transpose() * x).cholesky().unwrap().solve(&x.tr_mul(y));
        assert!(sol.estimate.max_abs_diff(&Estimate::Vector(ols)) < 1e-12);
    }

    #[test]
    fn large_weights_give_zero() {
        let p = small_problem();
        let x = p.design().unwrap();
        let y = p.response().unwrap();
        let bound = (x.tr_mul(y) / 6.0).abs().max();
        let w = Weights::uniform(&p, bound * 1.01).unwrap();
        let sol = solve_weighted_l1_linear(&p, &w, &SolverOptions::default()).unwrap();
        assert_eq!(sol.estimate, p.zero_estimate());
    }

    #[test]
    fn kkt_holds_for_mixed_weights() {
        let p = small_problem();
        let w = Weights::vector(DVector::from_vec(vec![0.0, 0.3, 0.05])).unwrap();
        let sol = solve_weighted_l1_linear(&p, &w, &SolverOptions::default()).unwrap();
        assert!(kkt_residual(&p, &w, &sol.estimate).unwrap() < 1e-8);
    }

    #[test]
    fn wrong_weight_length_is_rejected() {
        let p = small_problem();
        let w = Weights::vector(DVector::zeros(2)).unwrap();
        assert!(solve_weighted_l1_linear(&p, &w, &SolverOptions::default()).is_err());
    }
}
