use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::Serialize;

use super::config::RunConfig;
use crate::bounds::{spectrum, write_bound_csv, write_spectrum_csv, BoundContext, BoundReport};
use crate::data::{
    load_csv_with_schema, load_features_with_schema, normalize, synth_generate_with, write_csv, CsvOptions, Dataset,
    Nonlinearity, SynthOptions,
};
use crate::error::{arg_err, KlrError, Result};
use crate::kernel::gram;
use crate::klr::{ModelMetadata, RestrictedOptions, TrainedModel};
use crate::landmarks::{select, Sketch};
use crate::metrics::EvalReport;
use crate::nystrom::build;
use crate::optim::{Method, OptConfig};
use crate::pipeline::{grid_search, optimize, prepare, train_and_evaluate, Prepared, TrainOptions, TrainPath};

/// `println!` that tolerates a closed stdout, e.g. when piped into `head`.
macro_rules! say {
    ($($t:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout(), $($t)*);
    }};
}

fn out_dir(cfg: &RunConfig) -> Result<PathBuf> {
    fs::create_dir_all(&cfg.output.dir)?;
    Ok(cfg.output.dir.clone())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

#[derive(Serialize)]
struct TrainReport<'a> {
    train: &'a EvalReport,
    test: Option<&'a EvalReport>,
    final_loss: f64,
    iterations: usize,
    termination: crate::optim::Termination,
    retained_rank: usize,
    landmarks: usize,
    seconds: f64,
    grid: Option<&'a crate::pipeline::GridResult>,
}

pub fn cmd_train(cfg: &RunConfig, grid: bool) -> Result<()> {
    let (train, test, split_seed) = cfg.load_partitions()?;
    let mut opts = cfg.train_options()?;
    let dir = out_dir(cfg)?;
    let grid_result = if grid {
        let res = grid_search(&train, &opts, &cfg.grid, cfg.folds, cfg.seed)?;
        write_json(&dir.join("grid.json"), &res)?;
        opts = res.best.apply(&opts)?;
        say!(
            "grid: best kernel_c={} lambda={} delta0={} gamma={} landmarks={}",
            res.best.kernel_c, res.best.lambda, res.best.delta0, res.best.gamma, res.best.landmarks
        );
        Some(res)
    } else {
        None
    };
    let run = train_and_evaluate(&train, Some(&test), &opts, split_seed)?;
    let model_path = dir.join("model.json");
    run.outcome.model.save(&model_path)?;

    let reloaded = TrainedModel::load(&model_path)?;
    let (p_mem, _) = run.outcome.model.predict(&test.features)?;
    let (p_disk, _) = reloaded.predict(&test.features)?;
    if (p_mem.values - p_disk.values).amax() > 1e-12 {
        return Err(KlrError::Numeric("reloaded model predictions differ from the in-memory model".into()));
    }

    run.outcome.trace.save_csv(dir.join("trace.csv"))?;
    let report = TrainReport {
        train: &run.train_report,
        test: run.test_report.as_ref(),
        final_loss: run.outcome.trace.final_loss(),
        iterations: run.outcome.trace.iterations,
        termination: run.outcome.trace.termination,
        retained_rank: run.outcome.prepared.factor.retained_rank,
        landmarks: run.outcome.prepared.selection.len(),
        seconds: run.outcome.trace.seconds(),
        grid: grid_result.as_ref(),
    };
    write_json(&dir.join("report.json"), &report)?;
    say!(
        "trained {} landmarks ({}), {} iterations, final loss {:.6}",
        report.landmarks, opts.landmarks.strategy, report.iterations, report.final_loss
    );
    say!("train: {}", run.train_report.summary());
    if let Some(t) = &run.test_report {
        say!("test:  {}", t.summary());
    }
    say!("wrote {}", dir.display());
    Ok(())
}

fn model_csv_options(model: &TrainedModel, label_column: &str) -> CsvOptions {
    let mut categorical: Vec<String> = Vec::new();
    for name in &model.feature_names {
        if let Some((col, _)) = name.split_once('=') {
            if !categorical.iter().any(|c| c == col) {
                categorical.push(col.to_string());
            }
        }
    }
    CsvOptions {
        label_column: label_column.to_string(),
        categorical_columns: categorical,
        ..CsvOptions::default()
    }
}

pub fn cmd_predict(model_path: &Path, input: &Path, output: &Path) -> Result<()> {
    let model = TrainedModel::load(model_path)?;
    let x = load_features_with_schema(input, &model_csv_options(&model, ""), &model.feature_names)?;
    let (p, labels) = model.predict(&x)?;
    let mut w = csv::Writer::from_path(output)?;
    let mut header: Vec<String> = model.class_names.iter().map(|c| format!("p_{c}")).collect();
    header.push("predicted".into());
    w.write_record(&header)?;
    for (n, &l) in labels.iter().enumerate() {
        let mut rec: Vec<String> = p.values.row(n).iter().map(|v| format!("{v:.16e}")).collect();
        rec.push(model.class_names[l].clone());
        w.write_record(&rec)?;
    }
    w.flush()?;
    say!("predicted {} rows -> {}", labels.len(), output.display());
    Ok(())
}

pub fn cmd_evaluate(model_path: &Path, data: &Path, label_column: &str, output: Option<&Path>) -> Result<()> {
    let model = TrainedModel::load(model_path)?;
    let ds = load_csv_with_schema(data, &model_csv_options(&model, label_column), &model.feature_names)?
        .align_classes(&model.class_names)?;
    let (p, _) = model.predict(&ds.features)?;
    let report = EvalReport::compute(&p, &ds.labels, &model.class_names)?;
    match output {
        Some(path) => {
            write_json(path, &report)?;
            say!("{}", report.summary());
        }
        None => say!("{}", serde_json::to_string_pretty(&report)?),
    }
    Ok(())
}

fn normalized_train(cfg: &RunConfig) -> Result<(Dataset, Dataset)> {
    let (train, test, _) = cfg.load_partitions()?;
    let (tr, rest, _) = normalize(&train, &[test])?;
    let te = rest.into_iter().next().expect("one partition");
    Ok((tr, te))
}

pub fn cmd_landmarks(cfg: &RunConfig) -> Result<()> {
    let (train, _) = normalized_train(cfg)?;
    let opts = cfg.train_options()?;
    let sel = select(&train.features, &opts.landmarks, &opts.kernel)?;
    let dir = out_dir(cfg)?;
    let path = dir.join("landmarks.csv");
    let mut w = csv::Writer::from_path(&path)?;
    match &sel.sketch {
        Sketch::Columns { indices, weights } => {
            w.write_record(["landmark", "index", "weight"])?;
            for (j, (i, wt)) in indices.iter().zip(weights).enumerate() {
                w.write_record([j.to_string(), i.to_string(), format!("{wt:.16e}")])?;
            }
        }
        Sketch::Points { centroids } => {
            let mut header = vec!["landmark".to_string()];
            header.extend(train.feature_names.iter().cloned());
            w.write_record(&header)?;
            for j in 0..centroids.nrows() {
                let mut rec = vec![j.to_string()];
                rec.extend(centroids.row(j).iter().map(|v| format!("{v:.16e}")));
                w.write_record(&rec)?;
            }
        }
    }
    w.flush()?;
    let distinct = match &sel.sketch {
        Sketch::Columns { indices, .. } => {
            let mut u = indices.clone();
            u.sort_unstable();
            u.dedup();
            u.len()
        }
        Sketch::Points { centroids } => centroids.nrows(),
    };
    say!(
        "{}: {} landmarks ({} distinct) from {} rows -> {}",
        sel.strategy,
        sel.len(),
        distinct,
        train.len(),
        path.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct BoundsFile<'a> {
    lambda: f64,
    n: usize,
    fit_a: f64,
    fit_b: f64,
    log_log_correlation: f64,
    degenerate_fit: bool,
    reports: &'a [BoundReport],
}

pub fn cmd_bounds(cfg: &RunConfig) -> Result<Vec<BoundReport>> {
    let (train, _) = normalized_train(cfg)?;
    let opts = cfg.train_options()?;
    let n = train.len();
    let restricted = RestrictedOptions {
        tol: cfg.bounds.tol,
        ..RestrictedOptions::default()
    };
    let k = gram(&train.features, &train.features, &opts.kernel)?;
    let ctx = BoundContext::new(&k, &train.one_hot, cfg.lambda, restricted)?;
    let spec = spectrum(&k)?;
    let dir = out_dir(cfg)?;
    write_spectrum_csv(&spec, fs::File::create(dir.join("spectrum.csv"))?)?;

    let mut reports = Vec::new();
    for &c in &cfg.bounds.c_grid {
        if c < 1 || c > n {
            return arg_err(format!("C={c} outside 1..={n}"));
        }
        let mut lm = opts.landmarks.clone();
        lm.c = c;
        let sel = select(&train.features, &lm, &opts.kernel)?;
        let factor = build(&train.features, &sel, &opts.kernel, opts.pinv_threshold)?;
        let r = ctx.report(&factor, cfg.bounds.p)?;
        say!(
            "C={:<5} operator={:.4e} bound={:.4e} observed={:.4e} projection_residual={:.4e}",
            c,
            r.operator_term,
            r.bound,
            r.observed_error.unwrap_or(f64::NAN),
            r.projection_residual.unwrap_or(f64::NAN)
        );
        reports.push(r);
    }
    write_bound_csv(&reports, fs::File::create(dir.join("bounds.csv"))?)?;
    write_json(
        &dir.join("bounds.json"),
        &BoundsFile {
            lambda: cfg.lambda,
            n,
            fit_a: spec.fit_a,
            fit_b: spec.fit_b,
            log_log_correlation: spec.log_log_correlation,
            degenerate_fit: spec.degenerate,
            reports: &reports,
        },
    )?;
    say!(
        "spectrum fit: sigma_(C+1) = {:.4}/C^{:.4} (log-log corr {:.3}); wrote {}",
        spec.fit_a,
        spec.fit_b,
        spec.log_log_correlation,
        dir.display()
    );
    Ok(reports)
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareRow {
    pub method: Method,
    pub final_loss: f64,
    pub iterations: usize,
    pub seconds: f64,
    pub termination: String,
    pub test_dca: Option<f64>,
    pub test_gmpca: Option<f64>,
}

fn test_report(
    opts: &TrainOptions,
    prepared: &Prepared,
    params: &crate::klr::ParameterState,
    train: &Dataset,
    test: &Dataset,
    meta: ModelMetadata,
) -> Result<EvalReport> {
    let model = TrainedModel::from_training(
        opts.kernel,
        prepared.landmark_rows.clone(),
        &prepared.factor,
        params,
        crate::data::NormStats::identity(train.n_features()),
        train.feature_names.clone(),
        train.class_names.clone(),
        meta,
    )?;
    let (p, _) = model.predict(&test.features)?;
    EvalReport::compute(&p, &test.labels, &test.class_names)
}

pub fn cmd_compare_optimizers(cfg: &RunConfig) -> Result<Vec<CompareRow>> {
    let mut methods = cfg.compare.methods.clone();
    methods.dedup();
    let distinct: std::collections::HashSet<_> = methods.iter().collect();
    if distinct.len() < 2 {
        return arg_err("compare-optimizers needs at least two distinct methods");
    }
    let (train, test) = normalized_train(cfg)?;
    let opts = cfg.train_options()?;
    let prepared = prepare(&train.features, &opts)?;
    let dir = out_dir(cfg)?;
    let mut rows = Vec::new();
    for &method in &methods {
        let oc = OptConfig {
            method,
            max_iters: cfg.compare.budget,
            ..cfg.optimizer.clone()
        };
        match optimize(&prepared.factor, &train.one_hot, opts.lambda, opts.path, &oc) {
            Ok((params, trace)) => {
                trace.save_csv(dir.join(format!("trace_{method}.csv")))?;
                let meta = ModelMetadata {
                    strategy: opts.landmarks.strategy,
                    landmark_seed: opts.landmarks.seed,
                    split_seed: None,
                    optimizer: method,
                    trained_form: params.form,
                    iterations: trace.iterations,
                    final_loss: trace.final_loss(),
                    termination: trace.termination,
                };
                let rep = test_report(&opts, &prepared, &params, &train, &test, meta)?;
                rows.push(CompareRow {
                    method,
                    final_loss: trace.final_loss(),
                    iterations: trace.iterations,
                    seconds: trace.seconds(),
                    termination: format!("{:?}", trace.termination),
                    test_dca: Some(rep.dca),
                    test_gmpca: Some(rep.gmpca),
                });
            }
            Err(KlrError::Diverged { iter, trace }) => {
                trace.save_csv(dir.join(format!("trace_{method}.csv")))?;
                rows.push(CompareRow {
                    method,
                    final_loss: f64::INFINITY,
                    iterations: iter,
                    seconds: trace.seconds(),
                    termination: "Diverged".into(),
                    test_dca: None,
                    test_gmpca: None,
                });
            }
            Err(e) => return Err(e),
        }
    }
    rows.sort_by(|a, b| a.final_loss.total_cmp(&b.final_loss));
    let mut w = csv::Writer::from_path(dir.join("summary.csv"))?;
    w.write_record(["method", "final_loss", "iterations", "seconds", "termination", "test_dca", "test_gmpca"])?;
    let opt = |v: Option<f64>| v.map_or_else(String::new, |x| format!("{x:.6}"));
    say!("{:<10} {:>16} {:>8} {:>10} {:>10}", "method", "final_loss", "iters", "seconds", "GMPCA%");
    for r in &rows {
        w.write_record([
            r.method.to_string(),
            format!("{:.12e}", r.final_loss),
            r.iterations.to_string(),
            format!("{:.4}", r.seconds),
            r.termination.clone(),
            opt(r.test_dca),
            opt(r.test_gmpca),
        ])?;
        say!(
            "{:<10} {:>16.10} {:>8} {:>10.3} {:>10}",
            r.method.as_str(),
            r.final_loss,
            r.iterations,
            r.seconds,
            r.test_gmpca.map_or("-".into(), |g| format!("{:.2}", 100.0 * g))
        );
    }
    w.flush()?;
    Ok(rows)
}

#[derive(Debug, Clone, Serialize)]
pub struct ConstrainedSummary {
    pub lambda: f64,
    pub free_loss: f64,
    pub pinned_loss: f64,
    /// `pinned_loss − free_loss`.
    pub gap: f64,
    pub free_test_gmpca: f64,
    pub pinned_test_gmpca: f64,
    pub holds: bool,
}

pub fn cmd_constrained_experiment(cfg: &RunConfig) -> Result<ConstrainedSummary> {
    let (train, test) = normalized_train(cfg)?;
    let opts = cfg.train_options()?;
    let prepared = prepare(&train.features, &opts)?;
    let mut results = Vec::new();
    for path in [TrainPath::Full, TrainPath::FullPinned] {
        let (params, trace) = optimize(&prepared.factor, &train.one_hot, opts.lambda, path, &opts.optimizer)?;
        let meta = ModelMetadata {
            strategy: opts.landmarks.strategy,
            landmark_seed: opts.landmarks.seed,
            split_seed: None,
            optimizer: opts.optimizer.method,
            trained_form: params.form,
            iterations: trace.iterations,
            final_loss: trace.final_loss(),
            termination: trace.termination,
        };
        let rep = test_report(&opts, &prepared, &params, &train, &test, meta)?;
        results.push((trace.final_loss(), rep.gmpca));
    }
    let gap = results[1].0 - results[0].0;
    let summary = ConstrainedSummary {
        lambda: opts.lambda,
        free_loss: results[0].0,
        pinned_loss: results[1].0,
        gap,
        free_test_gmpca: results[0].1,
        pinned_test_gmpca: results[1].1,
        holds: gap >= -1e-9,
    };
    let dir = out_dir(cfg)?;
    write_json(&dir.join("constrained.json"), &summary)?;
    say!(
        "lambda={:e} free loss={:.10} pinned loss={:.10} gap={:.3e} test GMPCA free={:.2}% pinned={:.2}%",
        summary.lambda,
        summary.free_loss,
        summary.pinned_loss,
        summary.gap,
        100.0 * summary.free_test_gmpca,
        100.0 * summary.pinned_test_gmpca
    );
    if !summary.holds {
        return Err(KlrError::Numeric(format!(
            "pinned training reached a lower loss than free training (gap {gap:e})"
        )));
    }
    Ok(summary)
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub m: usize,
    #[arg(long)]
    pub classes: usize,
    /// linear or rbf_mixture.
    #[arg(long, default_value = "rbf_mixture")]
    pub nonlinearity: String,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub signal: Option<f64>,
    /// Draw features from this many separated Gaussian blobs.
    #[arg(long)]
    pub clusters: Option<usize>,
    #[arg(long, default_value = "choice")]
    pub label_column: String,
    #[arg(long)]
    pub output: PathBuf,
}

pub fn cmd_synth(args: &SynthArgs) -> Result<()> {
    let nl: Nonlinearity = args.nonlinearity.parse()?;
    let mut opts = SynthOptions::new(args.n, args.m, args.classes, nl, args.seed);
    if let Some(s) = args.signal {
        opts.signal = s;
    }
    opts.clusters = args.clusters;
    let ds = synth_generate_with(&opts)?;
    write_csv(&args.output, &ds, &args.label_column)?;
    say!(
        "wrote {} rows, {} features, {} classes -> {}",
        ds.len(),
        ds.n_features(),
        ds.n_classes(),
        args.output.display()
    );
    Ok(())
}
