use super::lp::{quantile_lp, quantile_objective};
use super::{kkt::kkt_residual, vector_weights, Solution, SolverDiagnostics, SolverOptions, Weights};
use crate::error::{Error, Result};
use crate::model::{Estimate, LossKind, Problem};

/// Weighted-l1 quantile regression, solved exactly as a linear program.
///
/// The returned coefficients sit on a vertex of the LP, so the observations
/// they interpolate have residuals that are zero to rounding; optimality is
/// then confirmed through the subgradient intervals of the check loss.
pub fn solve_weighted_l1_quantile(
    problem: &Problem,
    weights: &Weights,
    opts: &SolverOptions,
) -> Result<Solution> {
    let LossKind::Quantile { tau } = problem.kind() else {
        return Err(Error::Validation("quantile solver needs a quantile problem".into()));
    };
    opts.validate()?;
    let w = vector_weights(problem, weights)?;
    let (x, y) = problem.regression_data()?;
    let columns: Vec<usize> = (0..x.ncols()).collect();
    let beta = quantile_lp(x, y, tau, w.as_slice(), &columns)?;
    let objective = quantile_objective(x, y, tau, w.as_slice(), &beta);
    let estimate = Estimate::Vector(beta);
    let kkt = kkt_residual(problem, weights, &estimate)?;
    if kkt > opts.tol {
        return Err(Error::convergence("weighted-l1 quantile LP", 1, kkt, estimate));
    }
    Ok(Solution {
        estimate,
        diagnostics: SolverDiagnostics {
            iterations: 1,
            kkt_residual: kkt,
            objective,
        },
    })
}
