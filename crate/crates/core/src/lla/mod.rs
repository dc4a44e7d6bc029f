//! The local linear approximation driver.
//!
//! Starting from an initial estimate, each step replaces the folded concave
//! penalty by its tangent at the current iterate and solves the resulting
//! weighted-l1 problem:
//!
//! ```text
//! w(0)  = P'(|b(0)|)
//! b(m)  = argmin loss(b) + sum_j w_j(m-1) |b_j|
//! w(m)  = P'(|b(m)|)
//! ```
//!
//! Because the tangent majorizes a concave penalty, the folded concave
//! objective never increases along the iterates.

mod diagnostics;
mod events;
mod init;
mod oracle;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{loss_value, Estimate, Problem};
use crate::penalty::PenaltySpec;
use crate::wl1::{solve_weighted_l1, SolverOptions, Weights};

pub use diagnostics::{estimate_deltas, DeltaReport, Proportion};
pub use events::{check_events, check_events_with_oracle, EventFlag, EventReport};
pub use init::{make_initializer, InitializerKind};
pub use oracle::{oracle_estimator, OracleFit, ORACLE_SUBGRADIENT_TOL};

/// How many weighted-l1 solves to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LlaMode {
    OneStep,
    TwoStep,
    KStep(usize),
    /// Until successive iterates agree within `convergence_tol`.
    Converged,
}

impl LlaMode {
    pub fn label(&self) -> String {
        match self {
            LlaMode::OneStep => "one-step".into(),
            LlaMode::TwoStep => "two-step".into(),
            LlaMode::KStep(k) => format!("{k}-step"),
            LlaMode::Converged => "converged".into(),
        }
    }
}

impl std::str::FromStr for LlaMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        match s.as_str() {
            "one-step" | "1-step" | "onestep" => Ok(LlaMode::OneStep),
            "two-step" | "2-step" | "twostep" => Ok(LlaMode::TwoStep),
            "converged" | "full" => Ok(LlaMode::Converged),
            _ => {
                let k = s
                    .strip_suffix("-step")
                    .and_then(|k| k.parse::<usize>().ok())
                    .filter(|&k| k >= 1)
                    .ok_or_else(|| Error::Validation(format!("unknown LLA mode '{s}'")))?;
                Ok(LlaMode::KStep(k))
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LlaConfig {
    pub mode: LlaMode,
    pub penalty: PenaltySpec,
    pub solver_opts: SolverOptions,
    pub convergence_tol: f64,
    pub max_lla_iters: usize,
}

impl LlaConfig {
    pub fn new(mode: LlaMode, penalty: PenaltySpec) -> Self {
        Self {
            mode,
            penalty,
            solver_opts: SolverOptions::default(),
            convergence_tol: 1e-8,
            max_lla_iters: 50,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let LlaMode::KStep(0) = self.mode {
            return Err(Error::Validation("k-step LLA needs k >= 1".into()));
        }
        if !(self.convergence_tol > 0.0 && self.convergence_tol.is_finite()) {
            return Err(Error::Validation("convergence_tol must be positive".into()));
        }
        if self.max_lla_iters == 0 {
            return Err(Error::Validation("max_lla_iters must be at least 1".into()));
        }
        self.solver_opts.validate()
    }

    fn steps(&self) -> usize {
        match self.mode {
            LlaMode::OneStep => 1,
            LlaMode::TwoStep => 2,
            LlaMode::KStep(k) => k,
            LlaMode::Converged => self.max_lla_iters,
        }
    }
}

/// Everything the driver saw. Entry `m` of each list belongs to iterate
/// `m`; iterate 0 is the initial estimate and `weights[m]` is `P'(|b(m)|)`.
#[derive(Debug, Clone)]
pub struct LlaTrace {
    pub iterates: Vec<Estimate>,
    pub weights: Vec<Weights>,
    /// Folded concave objective of each iterate (infinite for a non-PD
    /// precision iterate).
    pub objectives: Vec<f64>,
    /// Max-norm change from the previous iterate (0 for iterate 0).
    pub changes: Vec<f64>,
    /// The stopping rule was met: all requested steps ran, or in
    /// `Converged` mode successive iterates agreed.
    pub converged: bool,
    /// The last iterate equals the one before it within `convergence_tol`.
    pub fixed_point: bool,
}

impl LlaTrace {
    /// Number of weighted-l1 solves performed.
    pub fn steps(&self) -> usize {
        self.iterates.len().saturating_sub(1)
    }
}

/// `loss(b) + sum P(|b_j|)` over the penalized entries.
pub fn folded_objective(problem: &Problem, penalty: &PenaltySpec, est: &Estimate) -> Result<f64> {
    let loss = match loss_value(problem, est) {
        Ok(v) => v,
        Err(Error::Domain(_)) if problem.is_precision() => return Ok(f64::INFINITY),
        Err(e) => return Err(e),
    };
    let pen: f64 = est.penalized_values().iter().map(|&v| penalty.value(v)).sum();
    Ok(loss + pen)
}

/// Runs the LLA iterations from `initial`.
pub fn lla_run(problem: &Problem, config: &LlaConfig, initial: &Estimate) -> Result<(Estimate, LlaTrace)> {
    config.validate()?;
    problem.check_estimate(initial)?;
    let penalty = &config.penalty;

    let mut trace = LlaTrace {
        iterates: vec![initial.clone()],
        weights: vec![Weights::from_estimate(penalty, initial)],
        objectives: vec![folded_objective(problem, penalty, initial)?],
        changes: vec![0.0],
        converged: false,
        fixed_point: false,
    };

    for m in 1..=config.steps() {
        let prev = trace.iterates.last().expect("non-empty");
        let weights = trace.weights.last().expect("non-empty");
        let solution = solve_weighted_l1(problem, weights, &config.solver_opts, Some(prev))
            .map_err(|e| Error::LlaStep {
                iteration: m,
                source: Box::new(e),
            })?;
        let next = solution.estimate;
        let change = next.max_abs_diff(prev);
        trace.weights.push(Weights::from_estimate(penalty, &next));
        trace.objectives.push(folded_objective(problem, penalty, &next)?);
        trace.changes.push(change);
        trace.iterates.push(next);
        trace.fixed_point = change <= config.convergence_tol;
        if config.mode == LlaMode::Converged && trace.fixed_point {
            trace.converged = true;
            break;
        }
    }
    if config.mode != LlaMode::Converged {
        trace.converged = true;
    }
    let last = trace.iterates.last().expect("non-empty").clone();
    Ok((last, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wl1::solve_weighted_l1_linear;
    use nalgebra::{DMatrix, DVector};

    fn problem() -> Problem {
        let x = DMatrix::from_fn(40, 6, |i, j| (((i * 13 + j * 7) % 17) as f64 - 8.0) / 5.0);
        let beta = DVector::from_vec(vec![2.0, 0.0, -1.5, 0.0, 0.0, 0.0]);
        let noise = DVector::from_fn(40, |i, _| ((i * 31 % 11) as f64 - 5.0) / 20.0);
        let y = &x * beta + noise;
        Problem::linear(x, y).unwrap()
    }

    #[test]
    fn one_step_from_zero_is_lasso() {
        let p = problem();
        let pen = PenaltySpec::scad(0.2).unwrap();
        let cfg = LlaConfig::new(LlaMode::OneStep, pen);
        let (est, trace) = lla_run(&p, &cfg, &p.zero_estimate()).unwrap();
        let lasso = solve_weighted_l1_linear(&p, &Weights::uniform(&p, 0.2).unwrap(), &SolverOptions::default()).unwrap();
        assert!(est.max_abs_diff(&lasso.estimate) < 1e-12);
        assert_eq!(trace.steps(), 1);
        assert_eq!(trace.iterates.len(), trace.weights.len());
        assert_eq!(trace.iterates.len(), trace.objectives.len());
    }

    #[test]
    fn large_initial_gives_zero_weights() {
        let p = problem();
        let pen = PenaltySpec::scad(0.1).unwrap();
        let init = Estimate::Vector(DVector::from_element(6, 10.0));
        let cfg = LlaConfig::new(LlaMode::OneStep, pen);
        let (est, trace) = lla_run(&p, &cfg, &init).unwrap();
        assert_eq!(trace.weights[0], Weights::Vector(DVector::zeros(6)));
        let x = p.design().unwrap();
        let ols = (x.transpose() * x).cholesky().unwrap().solve(&x.tr_mul(p.response().unwrap()));
        assert!(est.max_abs_diff(&Estimate::Vector(ols)) < 1e-10);
    }

    #[test]
    fn objective_never_increases() {
        let p = problem();
        for pen in [PenaltySpec::scad(0.3).unwrap(), PenaltySpec::mcp(0.3).unwrap()] {
            let cfg = LlaConfig::new(LlaMode::Converged, pen);
            let (_, trace) = lla_run(&p, &cfg, &p.zero_estimate()).unwrap();
            for pair in trace.objectives.windows(2) {
                assert!(pair[1] <= pair[0] + 1e-10);
            }
            assert!(trace.converged && trace.fixed_point);
        }
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("two-step".parse::<LlaMode>().unwrap(), LlaMode::TwoStep);
        assert_eq!("3-step".parse::<LlaMode>().unwrap(), LlaMode::KStep(3));
        assert!("0-step".parse::<LlaMode>().is_err());
        assert!("sideways".parse::<LlaMode>().is_err());
    }

    #[test]
    fn k_step_zero_rejected() {
        let p = problem();
        let cfg = LlaConfig::new(LlaMode::KStep(0), PenaltySpec::scad(0.1).unwrap());
        assert!(lla_run(&p, &cfg, &p.zero_estimate()).is_err());
    }
}
