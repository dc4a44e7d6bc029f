//! Independent optimality check for weighted-l1 problems.
//!
//! Recomputes gradients (or subgradient intervals) from the problem data,
//! never from solver state.

use crate::error::{Error, Result};
use crate::linalg::spd_inverse;
use crate::model::{loss_gradient, subgradient_interval, Estimate, LossKind, Problem};

use super::Weights;

/// Largest violation of the weighted-l1 optimality conditions at `est`.
///
/// Differentiable losses: `|g_j + w_j sign(b_j)|` on nonzeros and
/// `(|g_j| - w_j)_+` on zeros. Quantile: distance from 0 to the shifted
/// subgradient interval. Precision: off-diagonal entries as above with
/// `g = S - Theta^{-1}`, and `|g_jj|` on the unpenalized diagonal.
pub fn kkt_residual(problem: &Problem, weights: &Weights, est: &Estimate) -> Result<f64> {
    weights.check_against(problem)?;
    problem.check_estimate(est)?;
    match problem.kind() {
        LossKind::Linear | LossKind::Logistic => {
            let g = loss_gradient(problem, est)?;
            let g = g.as_vector().expect("vector gradient");
            let w = weights.as_vector().expect("checked");
            let b = est.as_vector().expect("checked");
            Ok((0..b.len())
                .map(|j| coordinate_violation(g[j], w[j], b[j]))
                .fold(0.0, f64::max))
        }
        LossKind::Quantile { .. } => {
            let intervals = subgradient_interval(problem, est)?;
            let w = weights.as_vector().expect("checked");
            let b = est.as_vector().expect("checked");
            Ok(intervals
                .iter()
                .enumerate()
                .map(|(j, iv)| {
                    let (lo, hi) = if b[j] > 0.0 {
                        (iv.lo + w[j], iv.hi + w[j])
                    } else if b[j] < 0.0 {
                        (iv.lo - w[j], iv.hi - w[j])
                    } else {
                        (iv.lo - w[j], iv.hi + w[j])
                    };
                    if lo > 0.0 {
                        lo
                    } else if hi < 0.0 {
                        -hi
                    } else {
                        0.0
                    }
                })
                .fold(0.0, f64::max))
        }
        LossKind::Precision => {
            let s = problem.covariance()?;
            let theta = est.as_matrix().expect("checked");
            let inv = spd_inverse(theta).map_err(|_| {
                Error::Domain("precision estimate is not positive definite".into())
            })?;
            let w = weights.as_matrix().expect("checked");
            let q = s.nrows();
            let mut worst = 0.0_f64;
            for k in 0..q {
                for j in 0..q {
                    let g = s[(j, k)] - inv[(j, k)];
                    let v = if j == k {
                        g.abs()
                    } else {
                        let t = 0.5 * (theta[(j, k)] + theta[(k, j)]);
                        coordinate_violation(g, w[(j, k)], t)
                    };
                    worst = worst.max(v);
                }
            }
            Ok(worst)
        }
    }
}

fn coordinate_violation(g: f64, w: f64, b: f64) -> f64 {
    if b > 0.0 {
        (g + w).abs()
    } else if b < 0.0 {
        (g - w).abs()
    } else {
        (g.abs() - w).max(0.0)
    }
}
