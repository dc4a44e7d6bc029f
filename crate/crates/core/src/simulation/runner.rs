use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use super::{compute_metrics, generate, tune_lambda, ExperimentConfig, MethodSpec, MetricsRow, RepContext};
use crate::error::{Error, Result};

/// One method on one replication.
#[derive(Debug, Clone, Serialize)]
pub struct MethodOutcome {
    pub rep: usize,
    pub method: String,
    pub metrics: Option<MetricsRow>,
    /// Failure message when `metrics` is `None`.
    pub error: Option<String>,
    /// The failure came from the numerics (non-convergence, singularity)
    /// rather than from the input.
    pub numerical: bool,
    /// Grid points skipped during tuning.
    pub tuning_failures: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct MetricSummary {
    pub name: &'static str,
    pub mean: f64,
    /// Sample standard deviation over `sqrt(ok)`.
    pub std_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MethodSummary {
    pub method: String,
    pub ok: usize,
    pub failed: usize,
    pub metrics: Vec<MetricSummary>,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub precision: bool,
    /// Replication-major, methods in config order.
    pub rows: Vec<MethodOutcome>,
    pub summary: Vec<MethodSummary>,
}

impl ExperimentResult {
    pub fn method(&self, label: &str) -> Option<&MethodSummary> {
        self.summary.iter().find(|m| m.method == label)
    }
}

impl MethodSummary {
    pub fn mean(&self, metric: &str) -> Option<f64> {
        self.metrics.iter().find(|m| m.name == metric).map(|m| m.mean)
    }
}

/// Generates replication `rep` and runs every configured method on it.
pub fn run_replication(config: &ExperimentConfig, rep: usize) -> Vec<MethodOutcome> {
    let precision = config.model.is_precision();
    let fail_all = |e: &Error| -> Vec<MethodOutcome> {
        config
            .methods
            .iter()
            .map(|m| MethodOutcome {
                rep,
                method: m.label(precision),
                metrics: None,
                error: Some(e.to_string()),
                numerical: e.is_numerical(),
                tuning_failures: 0,
            })
            .collect()
    };
    let data = match generate(config, rep) {
        Ok(d) => d,
        Err(e) => return fail_all(&e),
    };
    let mut ctx = match RepContext::new(config, &data) {
        Ok(c) => c,
        Err(e) => return fail_all(&e),
    };
    config
        .methods
        .iter()
        .map(|&m| run_method(&mut ctx, m, rep))
        .collect()
}

fn run_method(ctx: &mut RepContext<'_>, method: MethodSpec, rep: usize) -> MethodOutcome {
    let label = method.label(ctx.rep.train.is_precision());
    match tune_lambda(ctx, method) {
        Ok(t) => {
            let mut row = compute_metrics(&t.estimate, &ctx.rep.truth, &ctx.rep.support);
            row.chosen_lambda = t.lambda;
            row.validation_error = t.validation_error;
            MethodOutcome {
                rep,
                method: label,
                metrics: Some(row),
                error: None,
                numerical: false,
                tuning_failures: t.failures,
            }
        }
        Err(e) => MethodOutcome {
            rep,
            method: label,
            metrics: None,
            error: Some(e.to_string()),
            numerical: e.is_numerical(),
            tuning_failures: match e {
                Error::TuningFailed { attempts, .. } => attempts,
                _ => 0,
            },
        },
    }
}

/// Runs all replications on the current rayon pool. Rows come back in
/// replication order whatever the scheduling.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    if config.methods.is_empty() {
        return Err(Error::Validation("no methods configured".into()));
    }
    let per_rep: Vec<Vec<MethodOutcome>> = (0..config.reps)
        .into_par_iter()
        .map(|rep| run_replication(config, rep))
        .collect();
    let rows: Vec<MethodOutcome> = per_rep.into_iter().flatten().collect();
    let precision = config.model.is_precision();
    let summary = config
        .methods
        .iter()
        .map(|m| summarize(&m.label(precision), &rows, precision))
        .collect();
    Ok(ExperimentResult {
        precision,
        rows,
        summary,
    })
}

fn metric_names(precision: bool) -> [&'static str; 4] {
    if precision {
        ["op_norm_loss", "frob_loss", "fp", "fn"]
    } else {
        ["l1_loss", "l2_loss", "fp", "fn"]
    }
}

fn metric_value(row: &MetricsRow, name: &str) -> f64 {
    match name {
        "l1_loss" => row.l1_loss,
        "l2_loss" => row.l2_loss,
        "op_norm_loss" => row.op_norm_loss,
        "frob_loss" => row.frob_loss,
        "fp" => Some(row.false_positives as f64),
        "fn" => Some(row.false_negatives as f64),
        _ => None,
    }
    .unwrap_or(f64::NAN)
}

fn summarize(label: &str, rows: &[MethodOutcome], precision: bool) -> MethodSummary {
    let mine: Vec<&MethodOutcome> = rows.iter().filter(|r| r.method == label).collect();
    let ok: Vec<&MetricsRow> = mine.iter().filter_map(|r| r.metrics.as_ref()).collect();
    let metrics = metric_names(precision)
        .into_iter()
        .map(|name| {
            let vals: Vec<f64> = ok.iter().map(|r| metric_value(r, name)).collect();
            let (mean, std_error) = mean_se(&vals);
            MetricSummary { name, mean, std_error }
        })
        .collect();
    MethodSummary {
        method: label.to_string(),
        ok: ok.len(),
        failed: mine.len() - ok.len(),
        metrics,
    }
}

fn mean_se(v: &[f64]) -> (f64, f64) {
    let k = v.len();
    if k == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = v.iter().sum::<f64>() / k as f64;
    if k == 1 {
        return (mean, f64::NAN);
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (k - 1) as f64;
    (mean, (var / k as f64).sqrt())
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// One line per replication and method:
/// `rep, method, status, chosen_lambda, validation_error, <losses>, fp, fn`.
pub fn write_rows_csv<W: Write>(result: &ExperimentResult, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let [a, b, _, _] = metric_names(result.precision);
    w.write_record(["rep", "method", "status", "chosen_lambda", "validation_error", a, b, "fp", "fn"])
        .map_err(csv_err)?;
    for r in &result.rows {
        let record: Vec<String> = match &r.metrics {
            Some(m) => {
                let (la, lb) = if result.precision {
                    (m.op_norm_loss, m.frob_loss)
                } else {
                    (m.l1_loss, m.l2_loss)
                };
                vec![
                    r.rep.to_string(),
                    r.method.clone(),
                    "ok".into(),
                    m.chosen_lambda.to_string(),
                    m.validation_error.to_string(),
                    opt(la),
                    opt(lb),
                    m.false_positives.to_string(),
                    m.false_negatives.to_string(),
                ]
            }
            None => {
                let mut v = vec![
                    r.rep.to_string(),
                    r.method.clone(),
                    format!("failed: {}", r.error.as_deref().unwrap_or("unknown")),
                ];
                v.extend(std::iter::repeat_n(String::new(), 6));
                v
            }
        };
        w.write_record(&record).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// One line per method: `method, ok, failed, <metric>_mean, <metric>_se...`.
pub fn write_summary_csv<W: Write>(result: &ExperimentResult, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["method".to_string(), "ok".into(), "failed".into()];
    for name in metric_names(result.precision) {
        header.push(format!("{name}_mean"));
        header.push(format!("{name}_se"));
    }
    w.write_record(&header).map_err(csv_err)?;
    for s in &result.summary {
        let mut rec = vec![s.method.clone(), s.ok.to_string(), s.failed.to_string()];
        for m in &s.metrics {
            rec.push(m.mean.to_string());
            rec.push(m.std_error.to_string());
        }
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulation::{LambdaGrid, ModelId};

    fn small() -> ExperimentConfig {
        let mut c = ExperimentConfig::new(
            ModelId::M1,
            40,
            20,
            vec![MethodSpec::Lasso, "scad-2slla*".parse().unwrap()],
            3,
            11,
        );
        c.lambda_grid = LambdaGrid {
            values: None,
            count: 8,
            min_ratio: 0.05,
        };
        c
    }

    fn csv_bytes(r: &ExperimentResult) -> (Vec<u8>, Vec<u8>) {
        let mut a = Vec::new();
        let mut b = Vec::new();
        write_rows_csv(r, &mut a).unwrap();
        write_summary_csv(r, &mut b).unwrap();
        (a, b)
    }

    #[test]
    fn rerun_is_byte_identical() {
        let c = small();
        let a = run_experiment(&c).unwrap();
        let b = run_experiment(&c).unwrap();
        assert_eq!(csv_bytes(&a), csv_bytes(&b));
        assert_eq!(a.rows.len(), 6);
    }

    #[test]
    fn summary_mean_matches_rows() {
        let r = run_experiment(&small()).unwrap();
        let s = r.method("LASSO").unwrap();
        let vals: Vec<f64> = r
            .rows
            .iter()
            .filter(|o| o.method == "LASSO")
            .map(|o| o.metrics.unwrap().l2_loss.unwrap())
            .collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        assert!((s.mean("l2_loss").unwrap() - mean).abs() < 1e-12);
    }

    #[test]
    fn mean_se_formula() {
        let (m, se) = mean_se(&[1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((se - (1.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }
}
