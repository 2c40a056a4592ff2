//! Command-line front end for the `nklr` binary.
//!
//! Every subcommand reads an optional JSON config; `--kebab-case` flags and
//! `--set key.path=value` override individual keys.

mod commands;
pub mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde_json::Value;

use crate::error::{KlrError, Result};

pub use commands::{
    cmd_bounds, cmd_compare_optimizers, cmd_constrained_experiment, cmd_evaluate, cmd_landmarks, cmd_predict,
    cmd_synth, cmd_train, CompareRow, ConstrainedSummary, SynthArgs,
};
pub use config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "nklr", version, about = "Nyström kernel logistic regression")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a model and write model.json, trace.csv and report.json.
    Train {
        #[command(flatten)]
        run: RunArgs,
        /// Cross-validated search over the `grid` section before the final fit.
        #[arg(long)]
        grid: bool,
        #[arg(long)]
        folds: Option<usize>,
    },
    /// Score a CSV with a saved model.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Evaluation indices of a saved model on a labelled CSV.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "choice")]
        label_column: String,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run a landmark strategy and write the selection.
    Landmarks {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Spectrum and parameter-error bounds over a grid of landmark counts.
    Bounds {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated landmark counts.
        #[arg(long, value_delimiter = ',')]
        c_grid: Option<Vec<usize>>,
        /// Norm order: 1, 2 or inf.
        #[arg(long)]
        p: Option<String>,
    },
    /// Train one factor with several optimizers at an equal budget.
    CompareOptimizers {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated methods (gd, momentum, adam, lbfgs).
        #[arg(long, value_delimiter = ',')]
        methods: Option<Vec<String>>,
        #[arg(long)]
        budget: Option<usize>,
    },
    /// Free vs last-alternative-pinned training on the full-α path.
    ConstrainedExperiment {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Write a synthetic dataset as CSV.
    Synth(SynthArgs),
}

/// Flags shared by every config-driven subcommand.
#[derive(Debug, Args, Default)]
pub struct RunArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub train: Option<PathBuf>,
    #[arg(long)]
    pub test: Option<PathBuf>,
    #[arg(long)]
    pub label_column: Option<String>,
    #[arg(long, value_delimiter = ',')]
    pub categorical: Option<Vec<String>>,
    #[arg(long)]
    pub group_column: Option<String>,
    #[arg(long)]
    pub train_fraction: Option<f64>,
    #[arg(long)]
    pub kernel_c: Option<f64>,
    #[arg(long)]
    pub strategy: Option<String>,
    /// Number of landmarks C.
    #[arg(long)]
    pub landmarks: Option<usize>,
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long)]
    pub subset_size: Option<usize>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub kmeans_iters: Option<usize>,
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub delta0: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub history: Option<usize>,
    #[arg(long)]
    pub lambda: Option<f64>,
    /// reduced, full or full_pinned.
    #[arg(long)]
    pub path: Option<String>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Generic override, `key.path=value` (value parsed as JSON if possible).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

impl RunArgs {
    pub fn overrides(&self) -> Result<Vec<(String, Value)>> {
        let mut o: Vec<(String, Value)> = Vec::new();
        let mut put = |k: &str, v: Option<Value>| {
            if let Some(v) = v {
                o.push((k.to_string(), v));
            }
        };
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| Value::String(p.display().to_string()));
        put("seed", self.seed.map(Value::from));
        put("data.train", path(&self.train));
        put("data.test", path(&self.test));
        put("data.label_column", self.label_column.clone().map(Value::from));
        put("data.categorical_columns", self.categorical.clone().map(Value::from));
        put("data.group_column", self.group_column.clone().map(Value::from));
        put("split.train_fraction", self.train_fraction.map(Value::from));
        put("kernel.c", self.kernel_c.map(Value::from));
        put("landmarks.strategy", self.strategy.clone().map(|s| Value::from(s.replace('-', "_"))));
        put("landmarks.c", self.landmarks.map(Value::from));
        put("landmarks.mu", self.mu.map(Value::from));
        put("landmarks.subset_size", self.subset_size.map(Value::from));
        put("landmarks.batch", self.batch.map(Value::from));
        put("landmarks.iters", self.kmeans_iters.map(Value::from));
        put("optimizer.method", self.method.clone().map(|s| Value::from(s.replace('-', "_"))));
        put("optimizer.max_iters", self.max_iters.map(Value::from));
        put("optimizer.tol", self.tol.map(Value::from));
        put("optimizer.delta0", self.delta0.map(Value::from));
        put("optimizer.gamma", self.gamma.map(Value::from));
        put("optimizer.history", self.history.map(Value::from));
        put("lambda", self.lambda.map(Value::from));
        put("path", self.path.clone().map(|s| Value::from(s.replace('-', "_"))));
        put("output.dir", path(&self.out_dir));
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| KlrError::Schema(format!("--set expects KEY=VALUE, got '{kv}'")))?;
            o.push((k.trim().to_string(), config::parse_value(v.trim())));
        }
        Ok(o)
    }

    pub fn load(&self, extra: Vec<(String, Value)>) -> Result<RunConfig> {
        let mut o = self.overrides()?;
        o.extend(extra);
        RunConfig::load(self.config.as_deref(), &o)
    }
}

pub fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train { run, grid, folds } => {
            let extra = folds.map(|f| vec![("folds".to_string(), Value::from(f))]).unwrap_or_default();
            cmd_train(&run.load(extra)?, grid)
        }
        Command::Predict { model, input, output } => cmd_predict(&model, &input, &output),
        Command::Evaluate {
            model,
            data,
            label_column,
            output,
        } => cmd_evaluate(&model, &data, &label_column, output.as_deref()),
        Command::Landmarks { run } => cmd_landmarks(&run.load(Vec::new())?),
        Command::Bounds { run, c_grid, p } => {
            let mut extra = Vec::new();
            if let Some(g) = c_grid {
                extra.push(("bounds.c_grid".to_string(), Value::from(g)));
            }
            if let Some(p) = p {
                extra.push(("bounds.p".to_string(), Value::from(p)));
            }
            cmd_bounds(&run.load(extra)?).map(|_| ())
        }
        Command::CompareOptimizers { run, methods, budget } => {
            let mut extra = Vec::new();
            if let Some(m) = methods {
                extra.push(("compare.methods".to_string(), Value::from(m)));
            }
            if let Some(b) = budget {
                extra.push(("compare.budget".to_string(), Value::from(b)));
            }
            cmd_compare_optimizers(&run.load(extra)?).map(|_| ())
        }
        Command::ConstrainedExperiment { run } => cmd_constrained_experiment(&run.load(Vec::new())?).map(|_| ()),
        Command::Synth(args) => cmd_synth(&args),
    }
}

/// Parse arguments, run, and map any error to its exit code with a JSON
/// description on stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            let body = serde_json::json!({
                "error": {
                    "kind": e.kind(),
                    "message": e.to_string(),
                    "exit_code": e.exit_code(),
                }
            });
            eprintln!("{body}");
            e.exit_code()
        }
    }
}
