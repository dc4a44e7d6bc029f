use nalgebra::{DMatrix, DVector};

use super::cd::{quadratic_cd, quadratic_kkt, DenseGram};
use super::{vector_weights, warm_vector, Solution, SolverDiagnostics, SolverOptions, Weights};
use crate::error::{Error, Result};
use crate::linalg::sigmoid;
use crate::model::{logistic_loss, Estimate, LossKind, Problem};

const ARMIJO: f64 = 1e-4;
const MIN_STEP: f64 = 1e-12;
const CURVATURE_FLOOR: f64 = 1e-12;
/// A fitted loss this small means the labels are (quasi-)separated and the
/// minimizer lies at infinity.
const SEPARATION_LOSS: f64 = 1e-6;

/// Weighted-l1 logistic regression by proximal Newton: a weighted lasso on
/// the local quadratic model, then a backtracking line search on the true
/// objective.
pub fn solve_weighted_l1_logistic(
    problem: &Problem,
    weights: &Weights,
    opts: &SolverOptions,
) -> Result<Solution> {
    solve_with_start(problem, weights, opts, None)
}

fn objective(x: &DMatrix<f64>, y: &DVector<f64>, w: &DVector<f64>, b: &DVector<f64>) -> f64 {
    logistic_loss(x, y, b) + w.iter().zip(b.iter()).map(|(w, b)| w * b.abs()).sum::<f64>()
}

pub(crate) fn solve_with_start(
    problem: &Problem,
    weights: &Weights,
    opts: &SolverOptions,
    warm: Option<&Estimate>,
) -> Result<Solution> {
    if problem.kind() != LossKind::Logistic {
        return Err(Error::Validation("logistic solver needs a logistic problem".into()));
    }
    opts.validate()?;
    let w = vector_weights(problem, weights)?;
    let (x, y) = problem.regression_data()?;
    let n = y.len() as f64;
    let p = x.ncols();
    let mut beta = warm_vector(problem, warm);
    let mut f = objective(x, y, w, &beta);
    let mut kkt = f64::INFINITY;
    let mut last_step = f64::INFINITY;
    let mut iterations = 0;

    for iter in 0..opts.max_iter {
        iterations = iter + 1;
        let eta = x * &beta;
        let mu = eta.map(sigmoid);
        let grad = x.tr_mul(&(&mu - y)) / n;
        kkt = quadratic_kkt(grad.as_slice(), w.as_slice(), beta.as_slice());
        let scale = 1.0 + beta.amax();
        // Separated: the gradient vanishes while the iterates run off to
        // infinity, so waiting for small steps would exhaust max_iter.
        if kkt <= opts.tol && logistic_loss(x, y, &beta) < SEPARATION_LOSS {
            break;
        }
        if kkt <= opts.tol && last_step <= opts.tol * scale {
            let estimate = Estimate::Vector(beta);
            return Ok(Solution {
                estimate,
                diagnostics: SolverDiagnostics {
                    iterations: iter,
                    kkt_residual: kkt,
                    objective: f,
                },
            });
        }

        let h = mu.map(|m| (m * (1.0 - m)).max(CURVATURE_FLOOR));
        let mut xh = x.clone();
        for (i, mut row) in xh.row_iter_mut().enumerate() {
            row *= h[i];
        }
        let mut hess = x.tr_mul(&xh) / n;
        for j in 0..p {
            hess[(j, j)] += CURVATURE_FLOOR;
        }
        let c = &hess * &beta - &grad;
        let mut z: Vec<f64> = beta.iter().copied().collect();
        quadratic_cd(
            &mut DenseGram::new(&hess),
            c.as_slice(),
            w.as_slice(),
            &mut z,
            opts.inner_tol,
            opts.max_iter,
        );
        let direction = DVector::from_vec(z) - &beta;
        let decrease = grad.dot(&direction)
            + w.iter()
                .zip(beta.iter().zip(direction.iter()))
                .map(|(w, (b, d))| w * ((b + d).abs() - b.abs()))
                .sum::<f64>();

        let mut t = 1.0;
        loop {
            let trial = &beta + &direction * t;
            let ft = objective(x, y, w, &trial);
            if ft <= f + ARMIJO * t * decrease.min(0.0) || t < MIN_STEP {
                last_step = (&direction * t).amax();
                beta = trial;
                f = ft;
                break;
            }
            t *= 0.5;
        }
        if !beta.iter().all(|v| v.is_finite()) {
            break;
        }
    }
    Err(Error::convergence(
        "weighted-l1 logistic proximal Newton",
        iterations,
        kkt,
        Estimate::Vector(beta),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wl1::kkt::kkt_residual;

    fn problem() -> Problem {
        let x = DMatrix::from_fn(30, 4, |i, j| ((i * 7 + j * 3) as f64 * 0.37).sin());
        let y = DVector::from_fn(30, |i, _| if (i * 5 % 7) < 3 { 1.0 } else { 0.0 });
        Problem::logistic(x, y).unwrap()
    }

    #[test]
    fn large_weight_gives_zero() {
        let p = problem();
        let sol = solve_weighted_l1_logistic(&p, &Weights::uniform(&p, 1.0).unwrap(), &SolverOptions::default()).unwrap();
        assert_eq!(sol.estimate, p.zero_estimate());
    }

    #[test]
    fn kkt_holds() {
        let p = problem();
        let w = Weights::vector(DVector::from_vec(vec![0.01, 0.0, 0.05, 0.02])).unwrap();
        let sol = solve_weighted_l1_logistic(&p, &w, &SolverOptions::default()).unwrap();
        assert!(kkt_residual(&p, &w, &sol.estimate).unwrap() <= 1e-8);
    }

    #[test]
    fn separable_data_without_penalty_reports_convergence_error() {
        let x = DMatrix::from_column_slice(4, 1, &[-2.0, -1.0, 1.0, 2.0]);
        let y = DVector::from_vec(vec![0.0, 0.0, 1.0, 1.0]);
        let p = Problem::logistic(x, y).unwrap();
        let opts = SolverOptions {
            max_iter: 200,
            ..SolverOptions::default()
        };
        let err = solve_weighted_l1_logistic(&p, &Weights::uniform(&p, 0.0).unwrap(), &opts).unwrap_err();
        assert!(matches!(err, Error::Convergence(_)));
    }
}
