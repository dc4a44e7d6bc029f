//! Folded concave penalties.
//!
//! Every penalty here is written as `P(|t|)` with `P` nondecreasing and
//! concave on `[0, inf)`, `P(0) = 0`, and flat beyond `a * lambda`. The LLA
//! driver only ever needs the derivative `P'`, which becomes the weight of
//! the next weighted-l1 problem; the value is used for objective tracking.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default concavity parameter for SCAD.
pub const SCAD_DEFAULT_A: f64 = 3.7;
/// Default concavity parameter for MCP.
pub const MCP_DEFAULT_A: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Scad,
    Mcp,
    HardThreshold,
}

impl Family {
    pub fn default_a(self) -> f64 {
        match self {
            Family::Scad => SCAD_DEFAULT_A,
            Family::Mcp => MCP_DEFAULT_A,
            Family::HardThreshold => 1.0,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Family::Scad => "SCAD",
            Family::Mcp => "MCP",
            Family::HardThreshold => "HARD",
        }
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "scad" => Ok(Family::Scad),
            "mcp" => Ok(Family::Mcp),
            "hard" | "hard-threshold" | "hardthreshold" => Ok(Family::HardThreshold),
            other => Err(Error::InvalidPenalty(format!("unknown family '{other}'"))),
        }
    }
}

/// The constants `(a1, a2, a0)` of a folded concave penalty.
///
/// `P'(t) >= a1 * lambda` on `[0, a2 * lambda]`, and `a0 = min(1, a2)`
/// bounds how close an initial estimate has to be for one LLA step to hit
/// the oracle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constants {
    pub a1: f64,
    pub a2: f64,
    pub a0: f64,
}

/// A validated penalty: family, level `lambda` and concavity `a`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltySpec {
    family: Family,
    lambda: f64,
    a: f64,
}

impl PenaltySpec {
    /// Builds a penalty, checking `lambda > 0` and the family's range for
    /// `a`. The hard-threshold penalty always uses `a = 1`.
    pub fn new(family: Family, lambda: f64, a: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::InvalidPenalty(format!(
                "lambda must be positive and finite, got {lambda}"
            )));
        }
        let a = match family {
            Family::Scad if !(a.is_finite() && a > 2.0) => {
                return Err(Error::InvalidPenalty(format!("SCAD needs a > 2, got {a}")))
            }
            Family::Mcp if !(a.is_finite() && a > 1.0) => {
                return Err(Error::InvalidPenalty(format!("MCP needs a > 1, got {a}")))
            }
            Family::HardThreshold => 1.0,
            _ => a,
        };
        Ok(Self { family, lambda, a })
    }

    pub fn scad(lambda: f64) -> Result<Self> {
        Self::new(Family::Scad, lambda, SCAD_DEFAULT_A)
    }

    pub fn mcp(lambda: f64) -> Result<Self> {
        Self::new(Family::Mcp, lambda, MCP_DEFAULT_A)
    }

    pub fn hard_threshold(lambda: f64) -> Result<Self> {
        Self::new(Family::HardThreshold, lambda, 1.0)
    }

    /// Same family and `a`, different `lambda`.
    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        Self::new(self.family, lambda, self.a)
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn constants(&self) -> Constants {
        let (a1, a2) = match self.family {
            Family::Scad => (1.0, 1.0),
            Family::Mcp => (1.0 - 1.0 / self.a, 1.0),
            Family::HardThreshold => (1.0, 0.5),
        };
        Constants {
            a1,
            a2,
            a0: a2.min(1.0),
        }
    }

    /// `P'(t)` for `t >= 0`; at `t = 0` this is the right derivative.
    pub fn derivative(&self, t: f64) -> Result<f64> {
        if t.is_nan() || t < 0.0 {
            return Err(Error::Domain(format!(
                "penalty derivative needs t >= 0, got {t}"
            )));
        }
        Ok(self.weight(t))
    }

    /// `P'(|t|)` without the domain check; this is the LLA weight.
    pub(crate) fn weight(&self, t: f64) -> f64 {
        let t = t.abs();
        let lambda = self.lambda;
        match self.family {
            Family::Scad => {
                if t <= lambda {
                    lambda
                } else {
                    (self.a * lambda - t).max(0.0) / (self.a - 1.0)
                }
            }
            Family::Mcp => (lambda - t / self.a).max(0.0),
            Family::HardThreshold => {
                if t < lambda {
                    2.0 * (lambda - t)
                } else {
                    0.0
                }
            }
        }
    }

    /// `P(|t|)`.
    pub fn value(&self, t: f64) -> f64 {
        let t = t.abs();
        let lambda = self.lambda;
        let a = self.a;
        match self.family {
            Family::Scad => {
                if t <= lambda {
                    lambda * t
                } else if t <= a * lambda {
                    (2.0 * a * lambda * t - t * t - lambda * lambda) / (2.0 * (a - 1.0))
                } else {
                    (a + 1.0) * lambda * lambda / 2.0
                }
            }
            Family::Mcp => {
                if t <= a * lambda {
                    lambda * t - t * t / (2.0 * a)
                } else {
                    a * lambda * lambda / 2.0
                }
            }
            Family::HardThreshold => {
                if t < lambda {
                    lambda * lambda - (t - lambda) * (t - lambda)
                } else {
                    lambda * lambda
                }
            }
        }
    }
}
