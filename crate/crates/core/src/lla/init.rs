use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Estimate, Problem};
use crate::wl1::{solve_clime, solve_weighted_l1, SolverOptions, Weights};

/// Initial estimates for the LLA driver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitializerKind {
    Zero,
    /// Weighted-l1 fit with the same weight on every coordinate.
    LassoTuned(f64),
    Clime(f64),
    /// `diag(1 / S_jj)`.
    DiagInverse,
}

pub fn make_initializer(kind: InitializerKind, problem: &Problem, opts: &SolverOptions) -> Result<Estimate> {
    match (kind, problem.is_precision()) {
        (InitializerKind::Zero, _) => Ok(problem.zero_estimate()),
        (InitializerKind::LassoTuned(lambda), false) => {
            let w = Weights::uniform(problem, lambda)?;
            Ok(solve_weighted_l1(problem, &w, opts, None)?.estimate)
        }
        (InitializerKind::Clime(lambda), true) => {
            Ok(solve_clime(problem.covariance()?, lambda, opts)?.estimate)
        }
        (InitializerKind::DiagInverse, true) => {
            let s = problem.covariance()?;
            let d = s.diagonal().map(|v| 1.0 / v);
            Ok(Estimate::Matrix(DMatrix::from_diagonal(&d)))
        }
        (InitializerKind::LassoTuned(_), true) => Err(Error::Validation(
            "the lasso initializer is for regression problems".into(),
        )),
        (InitializerKind::Clime(_) | InitializerKind::DiagInverse, false) => Err(Error::Validation(
            "CLIME and diagonal-inverse initializers are for precision problems".into(),
        )),
    }
}
