//! End-to-end training: landmarks, factor, optimization and packaging.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{kfold_indices, normalize, split, Dataset, NormStats, SplitSpec};
use crate::error::{arg_err, KlrError, Result};
use crate::kernel::KernelConfig;
use crate::klr::{
    loss_grad_nystrom, loss_grad_nystrom_pinned, loss_grad_reduced, ModelMetadata, ParamForm, ParameterState,
    TrainedModel,
};
use crate::landmarks::{select, LandmarkParams, LandmarkSelection};
use crate::metrics::EvalReport;
use crate::nystrom::{build, NystromFactor, DEFAULT_PINV_THRESHOLD};
use crate::optim::{minimize, OptConfig, OptTrace};

/// Default Tikhonov parameter.
pub const DEFAULT_LAMBDA: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TrainPath {
    /// Optimize `θ` over the feature map.
    #[default]
    Reduced,
    /// Optimize `α` with `K̂` applied through the factor.
    Full,
    /// Full path with the last alternative's coefficients fixed at zero.
    FullPinned,
}

impl std::str::FromStr for TrainPath {
    type Err = KlrError;
    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "reduced" => Ok(TrainPath::Reduced),
            "full" => Ok(TrainPath::Full),
            "full_pinned" | "pinned" => Ok(TrainPath::FullPinned),
            other => arg_err(format!("unknown training path '{other}'")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOptions {
    pub kernel: KernelConfig,
    pub landmarks: LandmarkParams,
    pub optimizer: OptConfig,
    pub lambda: f64,
    pub path: TrainPath,
    pub pinv_threshold: f64,
}

impl TrainOptions {
    pub fn new(kernel: KernelConfig, landmarks: LandmarkParams, optimizer: OptConfig) -> Self {
        Self {
            kernel,
            landmarks,
            optimizer,
            lambda: DEFAULT_LAMBDA,
            path: TrainPath::Reduced,
            pinv_threshold: DEFAULT_PINV_THRESHOLD,
        }
    }
}

/// The pieces of a fit that exist before optimization starts.
pub struct Prepared {
    pub selection: LandmarkSelection,
    pub factor: NystromFactor,
    pub landmark_rows: DMatrix<f64>,
}

pub fn prepare(x: &DMatrix<f64>, opts: &TrainOptions) -> Result<Prepared> {
    let selection = select(x, &opts.landmarks, &opts.kernel)?;
    let factor = build(x, &selection, &opts.kernel, opts.pinv_threshold)?;
    let landmark_rows = selection.landmark_rows(x)?;
    Ok(Prepared {
        selection,
        factor,
        landmark_rows,
    })
}

/// Optimize the configured objective on a prepared factor.
pub fn optimize(
    factor: &NystromFactor,
    y: &DMatrix<f64>,
    lambda: f64,
    path: TrainPath,
    optimizer: &OptConfig,
) -> Result<(ParameterState, OptTrace)> {
    let classes = y.ncols();
    let (form, values, trace) = match path {
        TrainPath::Reduced => {
            let x0 = DMatrix::zeros(factor.retained_rank, classes);
            let (t, tr) = minimize(|t| loss_grad_reduced(factor, t, y, lambda), &x0, optimizer)?;
            (ParamForm::Reduced, t, tr)
        }
        TrainPath::Full => {
            let x0 = DMatrix::zeros(factor.n(), classes);
            let (a, tr) = minimize(|a| loss_grad_nystrom(factor, a, y, lambda), &x0, optimizer)?;
            (ParamForm::Full, a, tr)
        }
        TrainPath::FullPinned => {
            let x0 = DMatrix::zeros(factor.n(), classes);
            let (a, tr) = minimize(|a| loss_grad_nystrom_pinned(factor, a, y, lambda), &x0, optimizer)?;
            (ParamForm::Full, a, tr)
        }
    };
    Ok((ParameterState::new(form, values, lambda)?, trace))
}

pub struct FitOutcome {
    pub model: TrainedModel,
    pub prepared: Prepared,
    /// Parameters in the form they were trained in.
    pub params: ParameterState,
    pub trace: OptTrace,
}

/// Fit on an already-normalized training set.
pub fn fit(train: &Dataset, norm: &NormStats, opts: &TrainOptions, split_seed: Option<u64>) -> Result<FitOutcome> {
    let prepared = prepare(&train.features, opts)?;
    let (params, trace) = optimize(&prepared.factor, &train.one_hot, opts.lambda, opts.path, &opts.optimizer)?;
    let metadata = ModelMetadata {
        strategy: opts.landmarks.strategy,
        landmark_seed: opts.landmarks.seed,
        split_seed,
        optimizer: opts.optimizer.method,
        trained_form: params.form,
        iterations: trace.iterations,
        final_loss: trace.final_loss(),
        termination: trace.termination,
    };
    let model = TrainedModel::from_training(
        opts.kernel,
        prepared.landmark_rows.clone(),
        &prepared.factor,
        &params,
        norm.clone(),
        train.feature_names.clone(),
        train.class_names.clone(),
        metadata,
    )?;
    Ok(FitOutcome {
        model,
        prepared,
        params,
        trace,
    })
}

pub struct TrainRun {
    pub outcome: FitOutcome,
    pub train_report: EvalReport,
    pub test_report: Option<EvalReport>,
}

/// Normalize on `train`, fit, and score on train and (optionally) test.
pub fn train_and_evaluate(
    train: &Dataset,
    test: Option<&Dataset>,
    opts: &TrainOptions,
    split_seed: Option<u64>,
) -> Result<TrainRun> {
    let others: Vec<Dataset> = test.into_iter().cloned().collect();
    let (train_n, _, norm) = normalize(train, &others)?;
    let outcome = fit(&train_n, &norm, opts, split_seed)?;
    let report = |d: &Dataset| -> Result<EvalReport> {
        let (p, _) = outcome.model.predict(&d.features)?;
        EvalReport::compute(&p, &d.labels, &d.class_names)
    };
    let train_report = report(train)?;
    let test_report = match test {
        Some(t) => Some(report(&t.align_classes(&train.class_names)?)?),
        None => None,
    };
    Ok(TrainRun {
        outcome,
        train_report,
        test_report,
    })
}

/// Split `data`, then [`train_and_evaluate`].
pub fn split_train_evaluate(data: &Dataset, spec: &SplitSpec, opts: &TrainOptions) -> Result<TrainRun> {
    let (train, test) = split(data, spec)?;
    train_and_evaluate(&train, Some(&test), opts, Some(spec.seed))
}

/// Candidate values per hyperparameter; empty lists keep the base value.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSpec {
    pub kernel_c: Vec<f64>,
    pub lambda: Vec<f64>,
    pub delta0: Vec<f64>,
    pub gamma: Vec<f64>,
    pub landmarks: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub kernel_c: f64,
    pub lambda: f64,
    pub delta0: f64,
    pub gamma: f64,
    pub landmarks: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridScore {
    pub point: GridPoint,
    /// Mean held-out cross-entropy over folds.
    pub mean_cel: f64,
    pub fold_cel: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridResult {
    pub folds: usize,
    pub scores: Vec<GridScore>,
    pub best: GridPoint,
}

impl GridSpec {
    pub fn points(&self, base: &TrainOptions) -> Vec<GridPoint> {
        let or = |v: &Vec<f64>, d: f64| if v.is_empty() { vec![d] } else { v.clone() };
        let lm = if self.landmarks.is_empty() {
            vec![base.landmarks.c]
        } else {
            self.landmarks.clone()
        };
        let mut out = Vec::new();
        for &kernel_c in &or(&self.kernel_c, base.kernel.c) {
            for &lambda in &or(&self.lambda, base.lambda) {
                for &delta0 in &or(&self.delta0, base.optimizer.delta0) {
                    for &gamma in &or(&self.gamma, base.optimizer.gamma) {
                        for &landmarks in &lm {
                            out.push(GridPoint {
                                kernel_c,
                                lambda,
                                delta0,
                                gamma,
                                landmarks,
                            });
                        }
                    }
                }
            }
        }
        out
    }
}

impl GridPoint {
    pub fn apply(&self, base: &TrainOptions) -> Result<TrainOptions> {
        let mut o = base.clone();
        o.kernel = KernelConfig::rbf(self.kernel_c)?;
        o.lambda = self.lambda;
        o.optimizer.delta0 = self.delta0;
        o.optimizer.gamma = self.gamma;
        o.landmarks.c = self.landmarks;
        Ok(o)
    }
}

/// k-fold cross-validated grid search on held-out cross-entropy. Folds of
/// one grid point run in parallel; the fold assignment derives from `seed`.
pub fn grid_search(data: &Dataset, base: &TrainOptions, grid: &GridSpec, folds: usize, seed: u64) -> Result<GridResult> {
    let points = grid.points(base);
    let splits = kfold_indices(data.len(), folds, seed)?;
    let mut scores = Vec::with_capacity(points.len());
    for point in points {
        let opts = point.apply(base)?;
        let fold_cel = splits
            .par_iter()
            .map(|(tr, te)| -> Result<f64> {
                let train = data.subset(tr)?;
                let test = data.subset(te)?;
                let mut fold_opts = opts.clone();
                fold_opts.landmarks.c = fold_opts.landmarks.c.min(train.len());
                let run = train_and_evaluate(&train, Some(&test), &fold_opts, None)?;
                Ok(run.test_report.expect("test fold present").cel)
            })
            .collect::<Result<Vec<f64>>>()?;
        let mean_cel = fold_cel.iter().sum::<f64>() / fold_cel.len() as f64;
        scores.push(GridScore {
            point,
            mean_cel,
            fold_cel,
        });
    }
    let best = scores
        .iter()
        .filter(|s| s.mean_cel.is_finite())
        .min_by(|a, b| a.mean_cel.total_cmp(&b.mean_cel))
        .ok_or_else(|| KlrError::Numeric("no grid point produced a finite score".into()))?
        .point
        .clone();
    Ok(GridResult { folds, scores, best })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synth_generate, Nonlinearity};
    use crate::landmarks::Strategy;
    use crate::optim::Method;

    fn options(path: TrainPath) -> TrainOptions {
        let mut o = TrainOptions::new(
            KernelConfig::rbf(0.5).unwrap(),
            LandmarkParams::new(Strategy::Uniform, 10, 1),
            OptConfig {
                tol: 1e-9,
                ..OptConfig::new(Method::Lbfgs)
            },
        );
        o.lambda = 1e-3;
        o.path = path;
        o
    }

    #[test]
    fn reduced_and_full_paths_agree() {
        let data = synth_generate(100, 2, 3, Nonlinearity::RbfMixture, 4).unwrap();
        let (tr, _, norm) = normalize(&data, &[]).unwrap();
        let a = fit(&tr, &norm, &options(TrainPath::Reduced), None).unwrap();
        let b = fit(&tr, &norm, &options(TrainPath::Full), None).unwrap();
        assert!((a.trace.final_loss() - b.trace.final_loss()).abs() < 1e-6);
        let (pa, _) = a.model.predict(&data.features).unwrap();
        let (pb, _) = b.model.predict(&data.features).unwrap();
        assert!((pa.values - pb.values).amax() < 1e-3);
    }

    #[test]
    fn prediction_reproduces_training_probabilities() {
        let data = synth_generate(80, 3, 2, Nonlinearity::Linear, 5).unwrap();
        let (tr, _, norm) = normalize(&data, &[]).unwrap();
        let out = fit(&tr, &norm, &options(TrainPath::Reduced), None).unwrap();
        let f = out.prepared.factor.features() * &out.params.values;
        let p_train = crate::klr::probabilities(&f).unwrap();
        let (p, _) = out.model.predict(&data.features).unwrap();
        assert!((p.values - p_train.values).amax() < 1e-10);
    }

    #[test]
    fn grid_search_picks_a_point() {
        let data = synth_generate(60, 2, 2, Nonlinearity::Linear, 6).unwrap();
        let grid = GridSpec {
            lambda: vec![1e-4, 1e-1],
            ..GridSpec::default()
        };
        let base = options(TrainPath::Reduced);
        let res = grid_search(&data, &base, &grid, 3, 1).unwrap();
        assert_eq!(res.scores.len(), 2);
        assert_eq!(res.scores[0].fold_cel.len(), 3);
    }
}
