use crate::error::Result;
use crate::linalg::spd_inverse;
use crate::model::{loss_gradient, subgradient_interval, Estimate, LossKind, Problem, Support};
use crate::wl1::{solve_restricted, SolverOptions};

/// Free-coordinate (sub)gradients of an oracle fit must vanish to within
/// this much.
pub const ORACLE_SUBGRADIENT_TOL: f64 = 1e-6;

/// The oracle estimator and its first-order certificate.
#[derive(Debug, Clone)]
pub struct OracleFit {
    pub estimate: Estimate,
    /// Largest distance from zero of the (sub)gradient over the free
    /// parameters (support coordinates, or diagonal plus support edges).
    pub max_free_subgradient: f64,
    pub subgradient_condition: bool,
}

/// Unpenalized fit restricted to `true_support`.
pub fn oracle_estimator(problem: &Problem, true_support: &Support, opts: &SolverOptions) -> Result<OracleFit> {
    let estimate = solve_restricted(problem, true_support, opts)?.estimate;
    let max_free_subgradient = free_subgradient(problem, true_support, &estimate)?;
    Ok(OracleFit {
        estimate,
        max_free_subgradient,
        subgradient_condition: max_free_subgradient <= ORACLE_SUBGRADIENT_TOL,
    })
}

fn free_subgradient(problem: &Problem, support: &Support, est: &Estimate) -> Result<f64> {
    match (problem.kind(), support) {
        (LossKind::Precision, _) => {
            let s = problem.covariance()?;
            let theta = est.as_matrix().expect("precision estimate");
            let inv = spd_inverse(theta)?;
            let q = s.nrows();
            let mask = support.edge_mask(q);
            let mut worst = 0.0_f64;
            for j in 0..q {
                for k in 0..q {
                    if j == k || mask[(j, k)] {
                        worst = worst.max((s[(j, k)] - inv[(j, k)]).abs());
                    }
                }
            }
            Ok(worst)
        }
        (LossKind::Quantile { .. }, Support::Coordinates(cols)) => {
            let iv = subgradient_interval(problem, est)?;
            Ok(cols.iter().map(|&j| iv[j].distance(0.0)).fold(0.0, f64::max))
        }
        (_, Support::Coordinates(cols)) => {
            let g = loss_gradient(problem, est)?;
            let g = g.as_vector().expect("vector gradient");
            Ok(cols.iter().map(|&j| g[j].abs()).fold(0.0, f64::max))
        }
        (_, Support::Edges(_)) => Ok(f64::INFINITY),
    }
}
