//! Simulation harness: the five data-generating models, validation-set
//! tuning, selection/estimation metrics, and the replication runner.
//!
//! A replication is fully determined by `(master_seed, rep)`: the runner
//! seeds a ChaCha20 generator with the master seed and selects stream
//! `rep`, then draws the truth, the training sample and the validation
//! sample in that order. Replications can therefore run on any number of
//! worker threads in any order.

mod generate;
mod metrics;
mod presets;
mod runner;
mod tuning;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lla::LlaMode;
use crate::penalty::Family;
use crate::wl1::SolverOptions;

pub use generate::{generate, m1_covariance, m4_precision, Replication};
pub use metrics::{compute_metrics, MetricsRow};
pub use presets::{preset, Preset, Scale, PRESET_NAMES};
pub use runner::{
    run_experiment, run_replication, write_rows_csv, write_summary_csv, ExperimentResult, MethodOutcome,
    MethodSummary, MetricSummary,
};
pub use tuning::{
    fit_method, lambda_grid_for, lambda_max, resolve_initial, tune_lambda, validation_error, RepContext,
    TuneResult,
};

/// The data-generating models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelId {
    /// Sparse linear regression, `beta* = (3, 1.5, 0, 0, 2, 0, ...)`.
    M1,
    /// Sparse logistic regression with 10 random signals.
    M2,
    /// Sparse quantile regression with Cauchy noise.
    M3,
    /// Tridiagonal precision matrix from an AR(1)-type covariance.
    M4,
    /// `Theta* = U'U + I` with 100 random nonzeros in `U`.
    M5,
}

impl ModelId {
    pub fn is_precision(self) -> bool {
        matches!(self, ModelId::M4 | ModelId::M5)
    }

    pub fn label(self) -> &'static str {
        match self {
            ModelId::M1 => "m1",
            ModelId::M2 => "m2",
            ModelId::M3 => "m3",
            ModelId::M4 => "m4",
            ModelId::M5 => "m5",
        }
    }
}

impl FromStr for ModelId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "m1" => Ok(ModelId::M1),
            "m2" => Ok(ModelId::M2),
            "m3" => Ok(ModelId::M3),
            "m4" => Ok(ModelId::M4),
            "m5" => Ok(ModelId::M5),
            other => Err(Error::Validation(format!("unknown model '{other}' (expected m1..m5)"))),
        }
    }
}

/// Where an LLA run starts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitSpec {
    /// The paper's "0" start: zero for regression, `diag(1/S_jj)` for
    /// precision matrices.
    Null,
    /// The validation-tuned uniform-weight fit (regression) or CLIME
    /// (precision): the paper's "*" start.
    Tuned,
    /// Uniform-weight fit (regression) or CLIME (precision) at a fixed level.
    Fixed(f64),
    /// The true parameter; only meaningful in simulations.
    Truth,
}

impl fmt::Display for InitSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitSpec::Null => f.write_str("null"),
            InitSpec::Tuned => f.write_str("tuned"),
            InitSpec::Fixed(l) => write!(f, "fixed:{l}"),
            InitSpec::Truth => f.write_str("truth"),
        }
    }
}

impl FromStr for InitSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        match s.as_str() {
            "null" | "zero" | "0" | "diag-inverse" => Ok(InitSpec::Null),
            "tuned" | "*" => Ok(InitSpec::Tuned),
            "truth" => Ok(InitSpec::Truth),
            _ => {
                let level = s
                    .strip_prefix("fixed:")
                    .and_then(|v| v.parse::<f64>().ok())
                    .filter(|v| *v > 0.0 && v.is_finite())
                    .ok_or_else(|| {
                        Error::Validation(format!(
                            "unknown initializer '{s}' (expected null, tuned, truth or fixed:<level>)"
                        ))
                    })?;
                Ok(InitSpec::Fixed(level))
            }
        }
    }
}

impl Serialize for InitSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for InitSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// An estimator compared in the simulations.
///
/// The text form follows the method names of the comparison tables:
/// `lasso`, `clime`, and `<family>-[<k>s]lla<init>` where `<init>` is `*`
/// (tuned start) or `0` (null start) and a missing step count means the
/// fully converged LLA, e.g. `scad-2slla*`, `mcp-lla0`, `scad-3slla0`. A
/// leading `g` (`gscad-lla*`) and a trailing `:a=<value>` are accepted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MethodSpec {
    /// Uniform weights: the LASSO for regression, the graphical lasso for
    /// precision matrices.
    Lasso,
    Clime,
    Lla {
        family: Family,
        a: Option<f64>,
        mode: LlaMode,
        init: InitSpec,
    },
}

impl MethodSpec {
    /// Table label, e.g. `SCAD-2slla*` or `GSCAD-lla0`.
    pub fn label(&self, precision: bool) -> String {
        let g = if precision { "G" } else { "" };
        match self {
            MethodSpec::Lasso => format!("{g}LASSO"),
            MethodSpec::Clime => "CLIME".into(),
            MethodSpec::Lla { family, a, mode, init } => {
                let steps = match mode {
                    LlaMode::OneStep => "1s".to_string(),
                    LlaMode::TwoStep => "2s".to_string(),
                    LlaMode::KStep(k) => format!("{k}s"),
                    LlaMode::Converged => String::new(),
                };
                let init = match init {
                    InitSpec::Null => "0".to_string(),
                    InitSpec::Tuned => "*".to_string(),
                    InitSpec::Fixed(l) => format!("[{l}]"),
                    InitSpec::Truth => "[truth]".to_string(),
                };
                let a = a.map(|a| format!(":a={a}")).unwrap_or_default();
                format!("{g}{}-{steps}lla{init}{a}", family.label())
            }
        }
    }

    pub fn validate(&self, precision: bool) -> Result<()> {
        match self {
            MethodSpec::Clime if !precision => {
                Err(Error::Validation("clime is only defined for precision models".into()))
            }
            MethodSpec::Lla { mode: LlaMode::KStep(0), .. } => {
                Err(Error::Validation("k-step LLA needs k >= 1".into()))
            }
            MethodSpec::Lla { a: Some(a), family, .. } => {
                crate::penalty::PenaltySpec::new(*family, 1.0, *a).map(|_| ())
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for MethodSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label(false).to_ascii_lowercase())
    }
}

impl FromStr for MethodSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Validation(format!("unknown method '{s}'"));
        let lower = s.trim().to_ascii_lowercase();
        let (body, a) = match lower.split_once(":a=") {
            Some((body, a)) => (body, Some(a.parse::<f64>().map_err(|_| bad())?)),
            None => (lower.as_str(), None),
        };
        match body {
            "lasso" | "glasso" => return Ok(MethodSpec::Lasso),
            "clime" => return Ok(MethodSpec::Clime),
            _ => {}
        }
        let (fam, rest) = body.split_once('-').ok_or_else(bad)?;
        let fam = match fam {
            "gscad" => "scad",
            "gmcp" => "mcp",
            "ghard" => "hard",
            f => f,
        };
        let family: Family = fam.parse().map_err(|_| bad())?;
        let lla_at = rest.find("lla").ok_or_else(bad)?;
        let (steps, init) = (&rest[..lla_at], &rest[lla_at + 3..]);
        let mode = match steps {
            "" => LlaMode::Converged,
            s => {
                let k: usize = s.strip_suffix('s').and_then(|k| k.parse().ok()).ok_or_else(bad)?;
                match k {
                    0 => return Err(bad()),
                    1 => LlaMode::OneStep,
                    2 => LlaMode::TwoStep,
                    k => LlaMode::KStep(k),
                }
            }
        };
        let init = match init {
            "*" => InitSpec::Tuned,
            "0" => InitSpec::Null,
            other => {
                let inner = other.strip_prefix('[').and_then(|v| v.strip_suffix(']')).ok_or_else(bad)?;
                if inner == "truth" {
                    InitSpec::Truth
                } else {
                    InitSpec::Fixed(inner.parse().map_err(|_| bad())?)
                }
            }
        };
        Ok(MethodSpec::Lla { family, a, mode, init })
    }
}

impl Serialize for MethodSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for MethodSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// The tuning grid: explicit values, or `count` log-spaced values from the
/// per-replication `lambda_max` down to `min_ratio * lambda_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LambdaGrid {
    pub values: Option<Vec<f64>>,
    pub count: usize,
    pub min_ratio: f64,
}

impl Default for LambdaGrid {
    fn default() -> Self {
        Self {
            values: None,
            count: 50,
            min_ratio: 0.01,
        }
    }
}

impl LambdaGrid {
    pub fn explicit(values: Vec<f64>) -> Self {
        Self {
            values: Some(values),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        match &self.values {
            Some(v) => {
                if v.is_empty() {
                    return Err(Error::Validation("lambda grid must be nonempty".into()));
                }
                if v.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
                    return Err(Error::Validation("lambda grid values must be positive".into()));
                }
                if v.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::Validation("lambda grid must be strictly ascending".into()));
                }
            }
            None => {
                if self.count == 0 {
                    return Err(Error::Validation("lambda grid count must be at least 1".into()));
                }
                if !(self.min_ratio > 0.0 && self.min_ratio < 1.0) {
                    return Err(Error::Validation("lambda grid min_ratio must be in (0, 1)".into()));
                }
            }
        }
        Ok(())
    }

    /// Ascending grid for a problem whose smallest all-zero level is
    /// `lambda_max`.
    pub fn resolve(&self, lambda_max: f64) -> Vec<f64> {
        if let Some(v) = &self.values {
            return v.clone();
        }
        if self.count == 1 {
            return vec![lambda_max];
        }
        let lo = (lambda_max * self.min_ratio).ln();
        let hi = lambda_max.ln();
        let step = (hi - lo) / (self.count - 1) as f64;
        (0..self.count).map(|i| (lo + step * i as f64).exp()).collect()
    }
}

/// Everything that defines an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelId,
    /// Training (and validation) sample size.
    pub n: usize,
    /// `p` for regression models, `q` for precision models.
    pub dim: usize,
    /// Quantile level (model M3 only).
    #[serde(default = "default_tau")]
    pub tau: f64,
    /// Multiplies the true coefficients (regression models only).
    #[serde(default = "default_scale")]
    pub signal_scale: f64,
    #[serde(default)]
    pub lambda_grid: LambdaGrid,
    #[serde(default)]
    pub methods: Vec<MethodSpec>,
    pub reps: usize,
    pub master_seed: u64,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default = "default_lla_iters")]
    pub max_lla_iters: usize,
}

fn default_tau() -> f64 {
    0.5
}

fn default_scale() -> f64 {
    1.0
}

fn default_lla_iters() -> usize {
    50
}

impl ExperimentConfig {
    /// A config with the default grid and solver settings.
    pub fn new(model: ModelId, n: usize, dim: usize, methods: Vec<MethodSpec>, reps: usize, master_seed: u64) -> Self {
        Self {
            model,
            n,
            dim,
            tau: default_tau(),
            signal_scale: default_scale(),
            lambda_grid: LambdaGrid::default(),
            methods,
            reps,
            master_seed,
            solver: SolverOptions::default(),
            max_lla_iters: default_lla_iters(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::Validation("n must be at least 2".into()));
        }
        let min_dim = match self.model {
            ModelId::M1 => 5,
            ModelId::M2 | ModelId::M3 => 10,
            ModelId::M4 => 2,
            ModelId::M5 => 2,
        };
        if self.dim < min_dim {
            return Err(Error::Validation(format!(
                "model {} needs dim >= {min_dim}, got {}",
                self.model.label(),
                self.dim
            )));
        }
        if self.model == ModelId::M5 && self.dim * (self.dim - 1) < M5_NONZEROS {
            return Err(Error::Validation(format!(
                "model m5 places {M5_NONZEROS} off-diagonal nonzeros; dim {} is too small",
                self.dim
            )));
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(Error::Validation(format!("tau must be in (0, 1), got {}", self.tau)));
        }
        if !(self.signal_scale > 0.0 && self.signal_scale.is_finite()) {
            return Err(Error::Validation("signal_scale must be positive".into()));
        }
        if self.model.is_precision() && self.signal_scale != 1.0 {
            return Err(Error::Validation("signal_scale applies to regression models only".into()));
        }
        if self.reps == 0 {
            return Err(Error::Validation("reps must be at least 1".into()));
        }
        if self.max_lla_iters == 0 {
            return Err(Error::Validation("max_lla_iters must be at least 1".into()));
        }
        for m in &self.methods {
            m.validate(self.model.is_precision())?;
        }
        self.lambda_grid.validate()?;
        self.solver.validate()
    }
}

/// Number of nonzero off-diagonal entries of `U` in model M5.
pub const M5_NONZEROS: usize = 100;
