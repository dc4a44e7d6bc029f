use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use lla_core::io::{read_dataset, write_dataset, write_estimate, write_trace, Dataset};
use lla_core::lla::{estimate_deltas, lla_run, make_initializer, oracle_estimator, DeltaReport, LlaTrace};
use lla_core::simulation::{
    generate, preset, resolve_initial, run_experiment, write_rows_csv, write_summary_csv, ExperimentResult, RepContext,
};
use lla_core::wl1::kkt::kkt_residual;
use lla_core::{Error, Estimate, Problem};
use serde_json::json;

use crate::config::{self, DiagnoseConfig, FitConfig, ReproduceConfig, SimulateConfig};
use crate::manifest::{self, Manifest};
use crate::{CliError, Command, Common};

pub fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Fit(c) => fit(&c),
        Command::Simulate(c) => simulate(&c),
        Command::Diagnose(c) => diagnose(&c),
        Command::Reproduce { common, preset, scale } => reproduce(&common, preset, scale),
        Command::Keys => {
            print!("{}", config::reference());
            Ok(())
        }
    }
}

/// Reads the config text (empty without `--config`) and sets up threads
/// and the output directory.
fn prepare(c: &Common) -> Result<(String, usize), CliError> {
    let text = match &c.config {
        Some(p) => fs::read_to_string(p).map_err(|e| CliError::input(format!("{}: {e}", p.display())))?,
        None => String::new(),
    };
    let threads = match c.threads {
        Some(0) => return Err(CliError::input("--threads must be at least 1")),
        Some(n) => {
            // a second call in the same process keeps the first pool
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            n
        }
        None => rayon::current_num_threads(),
    };
    fs::create_dir_all(&c.out).map_err(|e| CliError::input(format!("{}: {e}", c.out.display())))?;
    Ok((text, threads))
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn core<T>(r: lla_core::Result<T>) -> Result<T, CliError> {
    r.map_err(CliError::from_core)
}

fn to_json<T: serde::Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).unwrap_or(serde_json::Value::Null)
}

struct Finish<'a> {
    command: &'static str,
    common: &'a Common,
    seed: Option<u64>,
    threads: usize,
    resolved: String,
    config: serde_json::Value,
    inputs: Vec<Vec<u8>>,
    outputs: Vec<String>,
    diagnostics: serde_json::Value,
}

impl Finish<'_> {
    fn write(self, error: Option<&CliError>) -> Result<(), CliError> {
        let files: Vec<&[u8]> = self.inputs.iter().map(|v| v.as_slice()).collect();
        let m = Manifest {
            command: self.command,
            version: env!("CARGO_PKG_VERSION"),
            seed: self.seed,
            threads: self.threads,
            inputs_sha256: manifest::inputs_hash(&self.resolved, &files),
            config: self.config,
            outputs: self.outputs,
            status: match error {
                None => "ok",
                Some(e) if e.code() == 2 => "numerical-failure",
                Some(_) => "input-error",
            },
            exit_code: error.map_or(0, |e| e.code()),
            diagnostics: self.diagnostics,
        };
        manifest::write(&self.common.out, &self.resolved, &m)
    }
}

// --- fit --------------------------------------------------------------------

fn fit(c: &Common) -> Result<(), CliError> {
    let (text, threads) = prepare(c)?;
    let mut cfg: FitConfig = config::load("fit", &text, &c.overrides)?;
    if cfg.data.path.is_relative() {
        let base = c.config.as_deref().and_then(Path::parent).map(Path::to_path_buf).unwrap_or_default();
        cfg.data.path = absolute(&base.join(&cfg.data.path));
    }
    let lla = cfg.lla_config()?;
    let init_kind = cfg.initializer()?;
    let bytes = fs::read(&cfg.data.path).map_err(|e| CliError::input(format!("{}: {e}", cfg.data.path.display())))?;
    let data = read_dataset(bytes.as_slice())
        .map_err(|e| CliError::input(format!("{}: {e}", cfg.data.path.display())))?;
    let problem = core(data.to_problem())?;
    let initial = core(make_initializer(init_kind, &problem, &cfg.solver))?;

    let (estimate, trace, failure) = match lla_run(&problem, &lla, &initial) {
        Ok((est, trace)) => {
            let failure = (!trace.converged).then(|| {
                CliError::numerical(format!(
                    "LLA did not reach a fixed point within {} iterations",
                    lla.max_lla_iters
                ))
            });
            (est, Some(trace), failure)
        }
        Err(e) if e.is_numerical() => (last_iterate(&e).unwrap_or(initial), None, Some(CliError::from_core(e))),
        Err(e) => return Err(CliError::from_core(e)),
    };

    write_estimate(&estimate, create(&c.out.join("estimate.csv"))?).map_err(CliError::from_core)?;
    let mut outputs = vec!["estimate.csv".to_string()];
    if let Some(t) = &trace {
        write_trace(t, create(&c.out.join("trace.csv"))?).map_err(CliError::from_core)?;
        outputs.push("trace.csv".into());
    }
    let diagnostics = fit_diagnostics(&problem, &estimate, trace.as_ref());
    println!(
        "fit: {} steps, converged {}, {} nonzeros",
        trace.as_ref().map_or(0, LlaTrace::steps),
        trace.as_ref().is_some_and(|t| t.converged),
        estimate.support().len()
    );
    let resolved = config::to_toml(&cfg);
    Finish {
        command: "fit",
        common: c,
        seed: c.seed,
        threads,
        config: to_json(&cfg),
        resolved,
        inputs: vec![bytes],
        outputs,
        diagnostics,
    }
    .write(failure.as_ref())?;
    failure.map_or(Ok(()), Err)
}

fn absolute(p: &Path) -> PathBuf {
    std::path::absolute(p).unwrap_or_else(|_| p.to_path_buf())
}

fn last_iterate(e: &Error) -> Option<Estimate> {
    match e {
        Error::Convergence(f) => Some(f.last.clone()),
        Error::LlaStep { source, .. } => last_iterate(source),
        _ => None,
    }
}

fn fit_diagnostics(problem: &Problem, est: &Estimate, trace: Option<&LlaTrace>) -> serde_json::Value {
    let Some(t) = trace else {
        return json!({ "converged": false, "nonzeros": est.support().len() });
    };
    // the last solve used the weights of the iterate before it
    let kkt = (t.weights.len() >= 2)
        .then(|| kkt_residual(problem, &t.weights[t.weights.len() - 2], est).ok())
        .flatten();
    json!({
        "steps": t.steps(),
        "converged": t.converged,
        "fixed_point": t.fixed_point,
        "objective": t.objectives.last(),
        "max_change": t.changes.last(),
        "kkt_residual": kkt,
        "nonzeros": est.support().len(),
    })
}

// --- simulate ---------------------------------------------------------------

fn simulate(c: &Common) -> Result<(), CliError> {
    let (text, threads) = prepare(c)?;
    let mut cfg: SimulateConfig = config::load("simulate", &text, &c.overrides)?;
    if let Some(s) = c.seed {
        cfg.experiment.master_seed = s;
    }
    core(cfg.experiment.validate())?;
    let result = core(run_experiment(&cfg.experiment))?;
    write_rows_csv(&result, create(&c.out.join("rows.csv"))?).map_err(CliError::from_core)?;
    write_summary_csv(&result, create(&c.out.join("summary.csv"))?).map_err(CliError::from_core)?;
    print!("{}", summary_text(&result));

    let dead: Vec<&str> = result.summary.iter().filter(|s| s.ok == 0).map(|s| s.method.as_str()).collect();
    let failure = (!dead.is_empty()).then(|| {
        eprintln!("{:<20} {:>6} {:>6}", "method", "ok", "failed");
        for s in &result.summary {
            eprintln!("{:<20} {:>6} {:>6}", s.method, s.ok, s.failed);
        }
        CliError::numerical(format!("failed on every replication: {}", dead.join(", ")))
    });
    Finish {
        command: "simulate",
        common: c,
        seed: Some(cfg.experiment.master_seed),
        threads,
        config: to_json(&cfg),
        resolved: config::to_toml(&cfg),
        inputs: vec![],
        outputs: vec!["rows.csv".into(), "summary.csv".into()],
        diagnostics: json!({ "summary": to_json(&result.summary) }),
    }
    .write(failure.as_ref())?;
    failure.map_or(Ok(()), Err)
}

fn summary_text(result: &ExperimentResult) -> String {
    let mut out = String::new();
    let names: Vec<&str> = result.summary.first().map_or(vec![], |s| s.metrics.iter().map(|m| m.name).collect());
    out.push_str(&format!("{:<20}", "method"));
    for n in &names {
        out.push_str(&format!(" {:>18}", n));
    }
    out.push_str(&format!(" {:>7}\n", "failed"));
    for s in &result.summary {
        out.push_str(&format!("{:<20}", s.method));
        for m in &s.metrics {
            out.push_str(&format!(" {:>18}", format!("{:.3} ({:.3})", m.mean, m.std_error)));
        }
        out.push_str(&format!(" {:>7}\n", s.failed));
    }
    out
}

// --- diagnose ---------------------------------------------------------------

fn diagnose(c: &Common) -> Result<(), CliError> {
    let (text, threads) = prepare(c)?;
    let mut cfg: DiagnoseConfig = config::load("diagnose", &text, &c.overrides)?;
    if let Some(s) = c.seed {
        cfg.experiment.master_seed = s;
    }
    core(cfg.experiment.validate())?;
    let penalty = cfg.diagnose.spec()?;
    let reps = cfg.diagnose.reps.unwrap_or(cfg.experiment.reps);
    let report = core(estimate_deltas(&cfg.experiment, &penalty, cfg.diagnose.init, reps))?;

    write_deltas(&report, create(&c.out.join("deltas.csv"))?)?;
    write_events(&report, create(&c.out.join("events.csv"))?)?;
    let mut outputs = vec!["deltas.csv".to_string(), "events.csv".into()];
    for (name, p) in [("delta0", report.delta0), ("delta1", report.delta1), ("delta2", report.delta2)] {
        println!("{name} = {:.4} (se {:.4}, {}/{})", p.estimate, p.std_error, p.count, p.trials);
    }
    if report.failed > 0 {
        println!("{} of {reps} replications failed", report.failed);
    }
    for &rep in &cfg.diagnose.export_reps {
        outputs.extend(export_rep(&cfg, rep, &c.out)?);
    }

    let failure = (report.ok == 0).then(|| CliError::numerical("every replication failed"));
    Finish {
        command: "diagnose",
        common: c,
        seed: Some(cfg.experiment.master_seed),
        threads,
        config: to_json(&cfg),
        resolved: config::to_toml(&cfg),
        inputs: vec![],
        outputs,
        diagnostics: json!({
            "delta0": report.delta0, "delta1": report.delta1, "delta2": report.delta2,
            "ok": report.ok, "failed": report.failed,
        }),
    }
    .write(failure.as_ref())?;
    failure.map_or(Ok(()), Err)
}

fn write_deltas(r: &DeltaReport, mut w: impl Write) -> Result<(), CliError> {
    writeln!(w, "quantity,estimate,std_error,count,trials")?;
    for (name, p) in [("delta0", r.delta0), ("delta1", r.delta1), ("delta2", r.delta2)] {
        writeln!(w, "{name},{},{},{},{}", p.estimate, p.std_error, p.count, p.trials)?;
    }
    Ok(())
}

fn write_events(r: &DeltaReport, mut w: impl Write) -> Result<(), CliError> {
    writeln!(
        w,
        "rep,status,init_close,init_close_margin,gradient_small,gradient_small_margin,\
         signal_large,signal_large_margin,a0,a0_margin,e1,e2"
    )?;
    for (rep, ev) in r.per_rep.iter().enumerate() {
        match ev {
            Ok(e) => {
                let flags = [e.e1_init_close, e.e1_gradient_small, e.e2_signal_large, e.a0_signal_condition];
                let cells: Vec<String> = flags.iter().map(|f| format!("{},{}", f.holds, f.margin)).collect();
                writeln!(w, "{rep},ok,{},{},{}", cells.join(","), e.e1(), e.e2())?;
            }
            Err(msg) => writeln!(w, "{rep},\"failed: {}\",,,,,,,,,,", msg.replace('"', "'"))?,
        }
    }
    Ok(())
}

/// Writes the training data, truth, initial estimate and oracle fit of one
/// replication to `<out>/rep-<k>/`.
fn export_rep(cfg: &DiagnoseConfig, rep: usize, out: &Path) -> Result<Vec<String>, CliError> {
    let dir_name = format!("rep-{rep}");
    let dir = out.join(&dir_name);
    fs::create_dir_all(&dir)?;
    let data = core(generate(&cfg.experiment, rep))?;
    let mut ctx = core(RepContext::new(&cfg.experiment, &data))?;
    let initial = core(resolve_initial(&mut ctx, cfg.diagnose.init))?;
    let oracle = core(oracle_estimator(&data.train, &data.support, &cfg.experiment.solver))?;
    let mut files = Vec::new();
    if let (Some(x), Some(y)) = (data.train.design(), data.train.response()) {
        let ds = Dataset::regression(data.train.kind(), x.clone(), y.clone());
        write_dataset(&ds, create(&dir.join("train.csv"))?).map_err(CliError::from_core)?;
        files.push("train.csv");
    } else if let Some(s) = data.train.sample_cov() {
        write_estimate(&Estimate::Matrix(s.clone()), create(&dir.join("covariance.csv"))?)
            .map_err(CliError::from_core)?;
        files.push("covariance.csv");
    }
    for (name, est) in [("truth.csv", &data.truth), ("initial.csv", &initial), ("oracle.csv", &oracle.estimate)] {
        write_estimate(est, create(&dir.join(name))?).map_err(CliError::from_core)?;
        files.push(name);
    }
    Ok(files.into_iter().map(|f| format!("{dir_name}/{f}")).collect())
}

// --- reproduce --------------------------------------------------------------

fn reproduce(c: &Common, preset_flag: Option<String>, scale: Option<lla_core::simulation::Scale>) -> Result<(), CliError> {
    let (text, threads) = prepare(c)?;
    let mut overrides = c.overrides.clone();
    if let Some(p) = preset_flag {
        overrides.push(format!("reproduce.preset=\"{p}\""));
    }
    let mut cfg: ReproduceConfig = config::load("reproduce", &text, &overrides)?;
    if let Some(s) = scale {
        cfg.reproduce.scale = s;
    }
    if let Some(s) = c.seed {
        cfg.reproduce.master_seed = s;
    }
    let r = &cfg.reproduce;
    let mut table = core(preset(&r.preset, r.scale, r.master_seed))?;
    if let Some(reps) = r.reps {
        for (_, exp) in &mut table.experiments {
            exp.reps = reps;
        }
        table.notes.push(format!("replications overridden to {reps}"));
    }

    let mut results = Vec::new();
    let mut outputs = Vec::new();
    for (i, (caption, exp)) in table.experiments.iter().enumerate() {
        eprintln!("running {caption} ({} replications)", exp.reps);
        let result = core(run_experiment(exp))?;
        let rows = format!("{}-rows-{}.csv", table.name, i + 1);
        write_rows_csv(&result, create(&c.out.join(&rows))?).map_err(CliError::from_core)?;
        outputs.push(rows);
        results.push(result);
    }
    let blocks: Vec<(&str, &ExperimentResult)> =
        table.experiments.iter().map(|(cap, _)| cap.as_str()).zip(results.iter()).collect();
    let csv_name = format!("{}.csv", table.name);
    let txt_name = format!("{}.txt", table.name);
    write_table_csv(&blocks, create(&c.out.join(&csv_name))?)?;
    let txt = table_text(&table.title, &table.notes, r.scale, &blocks);
    fs::write(c.out.join(&txt_name), &txt)?;
    print!("{txt}");
    outputs.extend([csv_name, txt_name]);

    Finish {
        command: "reproduce",
        common: c,
        seed: Some(r.master_seed),
        threads,
        config: json!({ "reproduce": to_json(r), "experiments": to_json(&table.experiments) }),
        resolved: config::to_toml(&cfg),
        inputs: vec![],
        outputs,
        diagnostics: json!({ "notes": table.notes }),
    }
    .write(None)
}

fn write_table_csv(blocks: &[(&str, &ExperimentResult)], out: impl Write) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| CliError::input(e.to_string());
    let mut header = vec!["method".to_string()];
    for (caption, r) in blocks {
        if let Some(s) = r.summary.first() {
            for m in &s.metrics {
                header.push(format!("{caption}: {}_mean", m.name));
                header.push(format!("{caption}: {}_se", m.name));
            }
        }
        header.push(format!("{caption}: failed"));
    }
    w.write_record(&header).map_err(csv_err)?;
    let methods: Vec<&str> = blocks
        .first()
        .map_or(vec![], |(_, r)| r.summary.iter().map(|s| s.method.as_str()).collect());
    for method in methods {
        let mut rec = vec![method.to_string()];
        for (_, r) in blocks {
            let s = r.method(method).expect("same methods in every block");
            for m in &s.metrics {
                rec.push(m.mean.to_string());
                rec.push(m.std_error.to_string());
            }
            rec.push(s.failed.to_string());
        }
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn table_text(
    title: &str,
    notes: &[String],
    scale: lla_core::simulation::Scale,
    blocks: &[(&str, &ExperimentResult)],
) -> String {
    let mut out = format!("{title} ({scale:?} scale)\n");
    let mut seen = Vec::new();
    for n in notes {
        if !seen.contains(&n) {
            out.push_str(&format!("  note: {n}\n"));
            seen.push(n);
        }
    }
    for (caption, r) in blocks {
        out.push_str(&format!("\n{caption}\n"));
        out.push_str(&summary_text(r));
    }
    out
}
