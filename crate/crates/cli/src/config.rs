//! Config files: TOML with one section per concern, plus `--set` overrides.

use std::path::PathBuf;

use lla_core::lla::{InitializerKind, LlaConfig, LlaMode};
use lla_core::simulation::{ExperimentConfig, InitSpec, Scale};
use lla_core::wl1::SolverOptions;
use lla_core::{Family, PenaltySpec};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Every accepted key: (subcommand, dotted key, type, default, meaning).
/// `docs/config.md` is generated from this table.
pub const KEYS: &[(&str, &str, &str, &str, &str)] = &[
    ("fit", "data.path", "path", "required", "dataset file; relative paths resolve against the config file"),
    ("fit", "penalty.family", "string", "required", "scad, mcp or hard"),
    ("fit", "penalty.lambda", "float", "required", "penalty level, > 0"),
    ("fit", "penalty.a", "float", "family default", "concavity (3.7 for SCAD, 2 for MCP; ignored for hard)"),
    ("fit", "lla.mode", "string", "two-step", "one-step, two-step, <k>-step or converged"),
    ("fit", "lla.max_iters", "int", "50", "iteration cap in converged mode"),
    ("fit", "lla.convergence_tol", "float", "1e-8", "max-norm change that counts as a fixed point"),
    ("fit", "init.kind", "string", "zero", "zero, lasso, clime or diag-inverse"),
    ("fit", "init.lambda", "float", "penalty.lambda", "level of the lasso or CLIME initializer"),
    ("fit", "solver.tol", "float", "1e-8", "KKT residual target of each weighted-l1 solve"),
    ("fit", "solver.max_iter", "int", "10000", "iteration cap of each weighted-l1 solve"),
    ("fit", "solver.inner_tol", "float", "1e-11", "tolerance of inner quadratic solves"),
    ("simulate|diagnose", "experiment.model", "string", "required", "m1, m2, m3 (regression) or m4, m5 (precision)"),
    ("simulate|diagnose", "experiment.n", "int", "required", "training sample size (validation uses the same n)"),
    ("simulate|diagnose", "experiment.dim", "int", "required", "p for regression, q for precision models"),
    ("simulate|diagnose", "experiment.tau", "float", "0.5", "quantile level (m3)"),
    ("simulate|diagnose", "experiment.signal_scale", "float", "1", "multiplies the true coefficients (m1-m3)"),
    ("simulate|diagnose", "experiment.methods", "string list", "[]", "method labels, e.g. lasso, clime, scad-2slla*, mcp-lla0"),
    ("simulate|diagnose", "experiment.reps", "int", "required", "number of replications"),
    ("simulate|diagnose", "experiment.master_seed", "int", "required", "master seed; --seed overrides it"),
    ("simulate|diagnose", "experiment.max_lla_iters", "int", "50", "iteration cap of converged LLA methods"),
    ("simulate|diagnose", "experiment.lambda_grid.values", "float list", "unset", "explicit ascending grid"),
    ("simulate|diagnose", "experiment.lambda_grid.count", "int", "50", "log-spaced grid size"),
    ("simulate|diagnose", "experiment.lambda_grid.min_ratio", "float", "0.01", "smallest grid value over lambda_max"),
    ("simulate|diagnose", "experiment.solver.tol", "float", "1e-8", "KKT residual target"),
    ("simulate|diagnose", "experiment.solver.max_iter", "int", "10000", "solver iteration cap"),
    ("simulate|diagnose", "experiment.solver.inner_tol", "float", "1e-11", "inner solve tolerance"),
    ("diagnose", "diagnose.family", "string", "scad", "penalty family the events refer to"),
    ("diagnose", "diagnose.lambda", "float", "required", "penalty level"),
    ("diagnose", "diagnose.a", "float", "family default", "concavity"),
    ("diagnose", "diagnose.init", "string", "tuned", "initial estimate: null, tuned, truth or fixed:<level>"),
    ("diagnose", "diagnose.reps", "int", "experiment.reps", "replications used for the estimates"),
    ("diagnose", "diagnose.export_reps", "int list", "[]", "replications whose data, oracle and initial estimate are written out"),
    ("reproduce", "reproduce.preset", "string", "required", "table1-m1, table1-m2, table1-m3, table2-m4 or table2-m5"),
    ("reproduce", "reproduce.scale", "string", "desk", "desk or full; --scale overrides it"),
    ("reproduce", "reproduce.master_seed", "int", "20240601", "master seed; --seed overrides it"),
    ("reproduce", "reproduce.reps", "int", "preset", "replication count override, for quick checks"),
];

/// Markdown reference of all keys.
pub fn reference() -> String {
    let mut out = String::from(
        "# Configuration reference\n\n\
         Config files are TOML. Any key can also be given on the command line as\n\
         `--set section.key=value`; the value is read as a TOML value and falls\n\
         back to a plain string. Unknown keys are rejected.\n\n\
         This file is generated by `lla keys`.\n",
    );
    for cmd in ["fit", "simulate", "diagnose", "reproduce"] {
        out.push_str(&format!("\n## {cmd}\n\n| key | type | default | meaning |\n|---|---|---|---|\n"));
        for (cmds, key, ty, default, meaning) in KEYS {
            if cmds.split('|').any(|c| c == cmd) {
                out.push_str(&format!("| `{key}` | {ty} | {default} | {meaning} |\n"));
            }
        }
    }
    out
}

fn known(cmd: &str, key: &str) -> bool {
    KEYS.iter().any(|(cmds, k, ..)| *k == key && cmds.split('|').any(|c| c == cmd))
}

/// Parses `text`, applies `key=value` overrides and deserializes.
pub fn load<T: DeserializeOwned>(cmd: &str, text: &str, overrides: &[String]) -> Result<T, CliError> {
    let mut table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| CliError::input(format!("config: {e}")))?;
    for item in overrides {
        let (key, raw) = item
            .split_once('=')
            .ok_or_else(|| CliError::input(format!("--set expects key=value, got '{item}'")))?;
        let key = key.trim();
        if !known(cmd, key) {
            return Err(CliError::input(format!(
                "unknown key '{key}' for {cmd}; run `lla keys` for the list"
            )));
        }
        set_path(&mut table, key, parse_value(raw.trim()))?;
    }
    T::deserialize(toml::Value::Table(table)).map_err(|e| CliError::input(format!("config: {e}")))
}

fn parse_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

fn set_path(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<(), CliError> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().expect("split yields one part");
    let mut cur = table;
    for part in parts {
        let entry = cur
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| CliError::input(format!("'{part}' in '{key}' is not a section")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

pub fn to_toml<T: Serialize>(value: &T) -> String {
    toml::to_string(value).expect("configs serialize to TOML")
}

// --- fit --------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    pub data: DataSection,
    pub penalty: PenaltySection,
    #[serde(default)]
    pub lla: LlaSection,
    #[serde(default)]
    pub init: InitSection,
    #[serde(default)]
    pub solver: SolverOptions,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub path: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PenaltySection {
    pub family: String,
    pub lambda: f64,
    pub a: Option<f64>,
}

impl PenaltySection {
    pub fn spec(&self) -> Result<PenaltySpec, CliError> {
        penalty_spec(&self.family, self.lambda, self.a)
    }
}

fn penalty_spec(family: &str, lambda: f64, a: Option<f64>) -> Result<PenaltySpec, CliError> {
    let family: Family = family.parse().map_err(CliError::from_core)?;
    PenaltySpec::new(family, lambda, a.unwrap_or(family.default_a())).map_err(CliError::from_core)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LlaSection {
    pub mode: String,
    pub max_iters: usize,
    pub convergence_tol: f64,
}

impl Default for LlaSection {
    fn default() -> Self {
        Self {
            mode: "two-step".into(),
            max_iters: 50,
            convergence_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitSection {
    pub kind: String,
    pub lambda: Option<f64>,
}

impl Default for InitSection {
    fn default() -> Self {
        Self {
            kind: "zero".into(),
            lambda: None,
        }
    }
}

impl FitConfig {
    pub fn lla_config(&self) -> Result<LlaConfig, CliError> {
        let mode: LlaMode = self.lla.mode.parse().map_err(CliError::from_core)?;
        let mut cfg = LlaConfig::new(mode, self.penalty.spec()?);
        cfg.max_lla_iters = self.lla.max_iters;
        cfg.convergence_tol = self.lla.convergence_tol;
        cfg.solver_opts = self.solver;
        cfg.validate().map_err(CliError::from_core)?;
        Ok(cfg)
    }

    pub fn initializer(&self) -> Result<InitializerKind, CliError> {
        let level = self.init.lambda.unwrap_or(self.penalty.lambda);
        match self.init.kind.to_ascii_lowercase().as_str() {
            "zero" => Ok(InitializerKind::Zero),
            "lasso" => Ok(InitializerKind::LassoTuned(level)),
            "clime" => Ok(InitializerKind::Clime(level)),
            "diag-inverse" => Ok(InitializerKind::DiagInverse),
            other => Err(CliError::input(format!(
                "unknown init.kind '{other}' (expected zero, lasso, clime or diag-inverse)"
            ))),
        }
    }
}

// --- simulate / diagnose -----------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub experiment: ExperimentConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnoseConfig {
    pub experiment: ExperimentConfig,
    pub diagnose: DiagnoseSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnoseSection {
    #[serde(default = "default_family")]
    pub family: String,
    pub lambda: f64,
    pub a: Option<f64>,
    #[serde(default = "default_init")]
    pub init: InitSpec,
    pub reps: Option<usize>,
    #[serde(default)]
    pub export_reps: Vec<usize>,
}

fn default_family() -> String {
    "scad".into()
}

fn default_init() -> InitSpec {
    InitSpec::Tuned
}

impl DiagnoseSection {
    pub fn spec(&self) -> Result<PenaltySpec, CliError> {
        penalty_spec(&self.family, self.lambda, self.a)
    }
}

// --- reproduce --------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReproduceConfig {
    pub reproduce: ReproduceSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReproduceSection {
    pub preset: String,
    #[serde(default)]
    pub scale: Scale,
    #[serde(default = "default_seed")]
    pub master_seed: u64,
    pub reps: Option<usize>,
}

pub const DEFAULT_SEED: u64 = 20240601;

fn default_seed() -> u64 {
    DEFAULT_SEED
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_create_sections_and_parse_types() {
        let cfg: FitConfig = load(
            "fit",
            "[data]\npath = \"d.csv\"\n[penalty]\nfamily = \"scad\"\nlambda = 1.0\n",
            &["penalty.lambda=0.25".into(), "lla.mode=one-step".into(), "init.kind=lasso".into()],
        )
        .unwrap();
        assert_eq!(cfg.penalty.lambda, 0.25);
        assert_eq!(cfg.lla.mode, "one-step");
        assert_eq!(cfg.initializer().unwrap(), InitializerKind::LassoTuned(0.25));
    }

    #[test]
    fn unknown_keys_are_input_errors() {
        let text = "[data]\npath = \"d.csv\"\n[penalty]\nfamily = \"scad\"\nlambda = 1.0\n";
        let err = load::<FitConfig>("fit", text, &["penalty.lambdaa=1".into()]).unwrap_err();
        assert_eq!(err.code(), 1);
        let err = load::<FitConfig>("fit", &format!("{text}colour = 3\n"), &[]).unwrap_err();
        assert_eq!(err.code(), 1);
        // experiment keys are not fit keys
        assert!(load::<FitConfig>("fit", text, &["experiment.n=3".into()]).is_err());
    }

    #[test]
    fn list_values_parse() {
        let text = "[experiment]\nmodel = \"m1\"\nn = 50\ndim = 20\nreps = 2\nmaster_seed = 1\n";
        let cfg: SimulateConfig = load(
            "simulate",
            text,
            &["experiment.methods=[\"lasso\", \"scad-2slla*\"]".into(), "experiment.lambda_grid.count=5".into()],
        )
        .unwrap();
        assert_eq!(cfg.experiment.methods.len(), 2);
        assert_eq!(cfg.experiment.lambda_grid.count, 5);
    }

    #[test]
    fn resolved_config_round_trips() {
        let text = "[experiment]\nmodel = \"m4\"\nn = 50\ndim = 8\nreps = 2\nmaster_seed = 1\nmethods = [\"lasso\"]\n";
        let cfg: SimulateConfig = load("simulate", text, &[]).unwrap();
        let again: SimulateConfig = load("simulate", &to_toml(&cfg), &[]).unwrap();
        assert_eq!(cfg.experiment, again.experiment);
    }

    #[test]
    fn every_key_is_documented_once() {
        let r = reference();
        for (_, key, ..) in KEYS {
            assert!(r.contains(&format!("`{key}`")));
        }
    }
}
