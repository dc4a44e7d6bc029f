use rayon::prelude::*;
use serde::Serialize;

use super::events::{check_events_with_oracle, EventReport};
use super::oracle::oracle_estimator;
use crate::error::{Error, Result};
use crate::penalty::PenaltySpec;
use crate::simulation::{generate, resolve_initial, ExperimentConfig, InitSpec, RepContext};

/// A Monte Carlo frequency with its binomial standard error
/// `sqrt(p (1 - p) / trials)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Proportion {
    pub estimate: f64,
    pub std_error: f64,
    pub count: usize,
    pub trials: usize,
}

impl Proportion {
    pub fn new(count: usize, trials: usize) -> Self {
        if trials == 0 {
            return Self {
                estimate: f64::NAN,
                std_error: f64::NAN,
                count,
                trials,
            };
        }
        let p = count as f64 / trials as f64;
        Self {
            estimate: p,
            std_error: (p * (1.0 - p) / trials as f64).sqrt(),
            count,
            trials,
        }
    }
}

/// Estimated failure probabilities of the oracle conditions:
/// `delta0` (initial estimate farther than `a0 lambda`), `delta1`
/// (off-support oracle gradient at least `a1 lambda`), `delta2` (smallest
/// on-support oracle magnitude at most `a lambda`).
#[derive(Debug, Clone, Serialize)]
pub struct DeltaReport {
    pub delta0: Proportion,
    pub delta1: Proportion,
    pub delta2: Proportion,
    pub ok: usize,
    pub failed: usize,
    /// Event flags per replication; `Err` holds the failure message.
    pub per_rep: Vec<std::result::Result<EventReport, String>>,
}

/// Monte Carlo estimates of the three failure probabilities over `reps`
/// fresh replications of `config` (its own `reps` is ignored). Only the
/// initializer and oracle fits are computed; no LLA run is needed.
pub fn estimate_deltas(
    config: &ExperimentConfig,
    penalty: &PenaltySpec,
    init: InitSpec,
    reps: usize,
) -> Result<DeltaReport> {
    if reps == 0 {
        return Err(Error::Validation("reps must be at least 1".into()));
    }
    config.validate()?;
    let per_rep: Vec<std::result::Result<EventReport, String>> = (0..reps)
        .into_par_iter()
        .map(|rep| one_rep(config, penalty, init, rep).map_err(|e| e.to_string()))
        .collect();
    let ok: Vec<&EventReport> = per_rep.iter().filter_map(|r| r.as_ref().ok()).collect();
    let n = ok.len();
    let count = |f: &dyn Fn(&EventReport) -> bool| ok.iter().filter(|r| f(r)).count();
    Ok(DeltaReport {
        delta0: Proportion::new(count(&|r| !r.e1_init_close.holds), n),
        delta1: Proportion::new(count(&|r| !r.e1_gradient_small.holds), n),
        delta2: Proportion::new(count(&|r| !r.e2_signal_large.holds), n),
        ok: n,
        failed: reps - n,
        per_rep,
    })
}

fn one_rep(config: &ExperimentConfig, penalty: &PenaltySpec, init: InitSpec, rep: usize) -> Result<EventReport> {
    let data = generate(config, rep)?;
    let mut ctx = RepContext::new(config, &data)?;
    let initial = resolve_initial(&mut ctx, init)?;
    let oracle = oracle_estimator(&data.train, &data.support, &config.solver)?;
    check_events_with_oracle(&data.train, penalty, &initial, &data.truth, &data.support, &oracle.estimate)
}
