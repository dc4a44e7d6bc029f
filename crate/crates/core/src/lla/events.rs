use serde::Serialize;

use crate::error::Result;
use crate::linalg::spd_inverse;
use crate::model::{loss_gradient, subgradient_interval, Estimate, LossKind, Problem, Support};
use crate::penalty::PenaltySpec;
use crate::wl1::SolverOptions;

use super::oracle::oracle_estimator;

/// One inequality of the oracle theory: `holds` plus the signed slack
/// (nonnegative margin when the inequality is satisfied).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EventFlag {
    pub holds: bool,
    pub margin: f64,
}

/// Which sufficient conditions for LLA to reach the oracle hold on one
/// data set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EventReport {
    /// `|init - truth|_max <= a0 * lambda`.
    pub e1_init_close: EventFlag,
    /// `|grad_{A^c} loss(oracle)|_max < a1 * lambda`.
    pub e1_gradient_small: EventFlag,
    /// `min_{A} |oracle| > a * lambda`.
    pub e2_signal_large: EventFlag,
    /// `min_{A} |truth| > (a + 1) * lambda`.
    pub a0_signal_condition: EventFlag,
}

impl EventReport {
    pub fn e1(&self) -> bool {
        self.e1_init_close.holds && self.e1_gradient_small.holds
    }

    pub fn e2(&self) -> bool {
        self.e1_gradient_small.holds && self.e2_signal_large.holds
    }
}

/// Computes the oracle fit and evaluates every event.
pub fn check_events(
    problem: &Problem,
    penalty: &PenaltySpec,
    initial: &Estimate,
    truth: &Estimate,
    true_support: &Support,
    opts: &SolverOptions,
) -> Result<EventReport> {
    let oracle = oracle_estimator(problem, true_support, opts)?;
    check_events_with_oracle(problem, penalty, initial, truth, true_support, &oracle.estimate)
}

/// As [`check_events`], with a precomputed oracle fit.
pub fn check_events_with_oracle(
    problem: &Problem,
    penalty: &PenaltySpec,
    initial: &Estimate,
    truth: &Estimate,
    true_support: &Support,
    oracle: &Estimate,
) -> Result<EventReport> {
    problem.check_estimate(initial)?;
    problem.check_estimate(truth)?;
    problem.check_estimate(oracle)?;
    let c = penalty.constants();
    let lambda = penalty.lambda();
    let a = penalty.a();

    let init_dist = penalized_distance(initial, truth);
    let grad = off_support_gradient(problem, true_support, oracle)?;
    let oracle_min = min_on_support(oracle, true_support);
    let truth_min = min_on_support(truth, true_support);

    Ok(EventReport {
        e1_init_close: EventFlag {
            holds: init_dist <= c.a0 * lambda,
            margin: c.a0 * lambda - init_dist,
        },
        e1_gradient_small: EventFlag {
            holds: grad < c.a1 * lambda,
            margin: c.a1 * lambda - grad,
        },
        e2_signal_large: EventFlag {
            holds: oracle_min > a * lambda,
            margin: finite_margin(oracle_min - a * lambda),
        },
        a0_signal_condition: EventFlag {
            holds: truth_min > (a + 1.0) * lambda,
            margin: finite_margin(truth_min - (a + 1.0) * lambda),
        },
    })
}

fn finite_margin(v: f64) -> f64 {
    if v.is_finite() {
        v
    } else {
        f64::MAX
    }
}

/// Max-norm distance over the penalized entries (off-diagonal for
/// matrices; the unpenalized diagonal never enters an LLA weight).
fn penalized_distance(a: &Estimate, b: &Estimate) -> f64 {
    a.penalized_values()
        .iter()
        .zip(b.penalized_values().iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn min_on_support(est: &Estimate, support: &Support) -> f64 {
    match (est, support) {
        (Estimate::Vector(v), Support::Coordinates(cols)) => {
            cols.iter().map(|&j| v[j].abs()).fold(f64::INFINITY, f64::min)
        }
        (Estimate::Matrix(m), Support::Edges(edges)) => edges
            .iter()
            .map(|&(j, k)| m[(j, k)].abs().min(m[(k, j)].abs()))
            .fold(f64::INFINITY, f64::min),
        _ => f64::NAN,
    }
}

fn off_support_gradient(problem: &Problem, support: &Support, oracle: &Estimate) -> Result<f64> {
    let d = problem.dim();
    match problem.kind() {
        LossKind::Precision => {
            let s = problem.covariance()?;
            let theta = oracle.as_matrix().expect("checked");
            let inv = spd_inverse(theta)?;
            let mask = support.edge_mask(d);
            let mut worst = 0.0_f64;
            for j in 0..d {
                for k in 0..d {
                    if j != k && !mask[(j, k)] {
                        worst = worst.max((s[(j, k)] - inv[(j, k)]).abs());
                    }
                }
            }
            Ok(worst)
        }
        LossKind::Quantile { .. } => {
            let mask = support.coordinate_mask(d);
            let iv = subgradient_interval(problem, oracle)?;
            Ok((0..d).filter(|&j| !mask[j]).map(|j| iv[j].max_abs()).fold(0.0, f64::max))
        }
        LossKind::Linear | LossKind::Logistic => {
            let mask = support.coordinate_mask(d);
            let g = loss_gradient(problem, oracle)?;
            let g = g.as_vector().expect("vector gradient");
            Ok((0..d).filter(|&j| !mask[j]).map(|j| g[j].abs()).fold(0.0, f64::max))
        }
    }
}
