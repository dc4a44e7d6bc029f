use serde::{Deserialize, Serialize};

use super::{ExperimentConfig, MethodSpec, ModelId};
use crate::error::{Error, Result};

pub const PRESET_NAMES: [&str; 5] = ["table1-m1", "table1-m2", "table1-m3", "table2-m4", "table2-m5"];

/// `Desk` shrinks the dimension (p = 200, q = 40) and the replication
/// count so a table runs in minutes; `Full` uses the published sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scale {
    #[default]
    Desk,
    Full,
}

impl std::str::FromStr for Scale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "desk" => Ok(Scale::Desk),
            "full" => Ok(Scale::Full),
            other => Err(Error::Validation(format!("unknown scale '{other}' (expected desk or full)"))),
        }
    }
}

/// A comparison table: one experiment per column block.
#[derive(Debug, Clone)]
pub struct Preset {
    pub name: &'static str,
    pub title: String,
    /// Column-block caption and its experiment.
    pub experiments: Vec<(String, ExperimentConfig)>,
    /// Deviations from the published setup.
    pub notes: Vec<String>,
}

const REGRESSION_METHODS: [&str; 9] = [
    "lasso",
    "scad-3slla0",
    "scad-lla0",
    "scad-2slla*",
    "scad-lla*",
    "mcp-3slla0",
    "mcp-lla0",
    "mcp-2slla*",
    "mcp-lla*",
];

const PRECISION_METHODS: [&str; 10] = [
    "lasso",
    "clime",
    "scad-3slla0",
    "scad-lla0",
    "scad-2slla*",
    "scad-lla*",
    "mcp-3slla0",
    "mcp-lla0",
    "mcp-2slla*",
    "mcp-lla*",
];

fn methods(list: &[&str]) -> Vec<MethodSpec> {
    list.iter().map(|m| m.parse().expect("preset method labels parse")).collect()
}

/// The named preset at the given scale.
pub fn preset(name: &str, scale: Scale, master_seed: u64) -> Result<Preset> {
    let desk = scale == Scale::Desk;
    let mut notes = Vec::new();
    let mut regression = |model: ModelId, n: usize, full_p: usize, title: &str| {
        let p = if desk { 200 } else { full_p };
        let reps = if desk { 50 } else { 100 };
        if desk {
            notes.push(format!("desk scale: p = {p} (published: {full_p}), {reps} replications (published: 100)"));
        }
        let cfg = ExperimentConfig::new(model, n, p, methods(&REGRESSION_METHODS), reps, master_seed);
        (title.to_string(), cfg)
    };
    let (title, experiments) = match name {
        "table1-m1" => (
            "Sparse linear regression (model 1)",
            vec![regression(ModelId::M1, 100, 1000, "model 1 (linear regression)")],
        ),
        "table1-m2" => (
            "Sparse logistic regression (model 2)",
            vec![regression(ModelId::M2, 200, 1000, "model 2 (logistic regression)")],
        ),
        "table1-m3" => {
            let (c1, mut a) = regression(ModelId::M3, 100, 400, "model 3, tau = 0.3");
            a.tau = 0.3;
            let (c2, mut b) = (c1.replace("0.3", "0.5"), a.clone());
            b.tau = 0.5;
            ("Sparse quantile regression (model 3)", vec![(c1, a), (c2, b)])
        }
        "table2-m4" | "table2-m5" => {
            let model = if name == "table2-m4" { ModelId::M4 } else { ModelId::M5 };
            let q = if desk { 40 } else { 100 };
            let reps = if desk { 30 } else { 100 };
            if desk {
                notes.push(format!("desk scale: q = {q} (published: 100), {reps} replications (published: 100)"));
            }
            let mut cfg = ExperimentConfig::new(model, 100, q, methods(&PRECISION_METHODS), reps, master_seed);
            cfg.lambda_grid.count = if desk { 20 } else { 50 };
            let caption = format!("model {}", &model.label()[1..]);
            ("Sparse precision matrix estimation", vec![(caption, cfg)])
        }
        other => {
            return Err(Error::Validation(format!(
                "unknown preset '{other}'; available: {}",
                PRESET_NAMES.join(", ")
            )))
        }
    };
    Ok(Preset {
        name: PRESET_NAMES.iter().find(|p| **p == name).expect("matched above"),
        title: title.to_string(),
        experiments,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table1_m1_lists_paper_methods() {
        let p = preset("table1-m1", Scale::Desk, 1).unwrap();
        let labels: Vec<String> = p.experiments[0].1.methods.iter().map(|m| m.label(false)).collect();
        for want in ["LASSO", "SCAD-2slla*", "SCAD-lla*", "SCAD-3slla0", "MCP-lla0"] {
            assert!(labels.iter().any(|l| l == want), "{want}");
        }
        assert_eq!(p.experiments[0].1.dim, 200);
        assert!(!p.notes.is_empty());
    }

    #[test]
    fn all_presets_validate() {
        for name in PRESET_NAMES {
            for scale in [Scale::Desk, Scale::Full] {
                for (_, cfg) in preset(name, scale, 0).unwrap().experiments {
                    cfg.validate().unwrap();
                }
            }
        }
        assert!(preset("table9", Scale::Desk, 0).is_err());
    }
}
