//! Run configuration: a JSON document whose keys can be overridden from the
//! command line.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::bounds::NormOrder;
use crate::data::{load_csv, split, CsvOptions, Dataset, SplitSpec, SynthOptions};
use crate::error::{KlrError, Result};
use crate::kernel::KernelConfig;
use crate::landmarks::{LandmarkParams, Strategy};
use crate::optim::{Method, OptConfig};
use crate::pipeline::{GridSpec, TrainOptions, TrainPath, DEFAULT_LAMBDA};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Root seed; every random stream derives from it unless overridden.
    pub seed: u64,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub split: SplitConfig,
    #[serde(default)]
    pub kernel: KernelSection,
    #[serde(default)]
    pub landmarks: LandmarkSection,
    #[serde(default)]
    pub optimizer: OptConfig,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default)]
    pub path: TrainPath,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default)]
    pub bounds: BoundsSection,
    #[serde(default)]
    pub compare: CompareSection,
}

fn default_lambda() -> f64 {
    DEFAULT_LAMBDA
}

fn default_folds() -> usize {
    5
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub train: Option<PathBuf>,
    /// Held-out file; when absent the training file is split.
    pub test: Option<PathBuf>,
    pub label_column: String,
    pub categorical_columns: Vec<String>,
    pub group_column: Option<String>,
    pub drop_columns: Vec<String>,
    /// Generate data in-process instead of reading `train`.
    pub synth: Option<SynthOptions>,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            train: None,
            test: None,
            label_column: "choice".into(),
            categorical_columns: Vec::new(),
            group_column: None,
            drop_columns: Vec::new(),
            synth: None,
        }
    }
}

impl DataConfig {
    pub fn csv_options(&self) -> CsvOptions {
        CsvOptions {
            label_column: self.label_column.clone(),
            categorical_columns: self.categorical_columns.clone(),
            group_column: self.group_column.clone(),
            drop_columns: self.drop_columns.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub train_fraction: f64,
    pub group_key: Option<String>,
    pub seed: Option<u64>,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            train_fraction: 0.8,
            group_key: None,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelSection {
    pub c: f64,
}

impl Default for KernelSection {
    fn default() -> Self {
        Self { c: 0.1 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LandmarkSection {
    pub strategy: Strategy,
    pub c: usize,
    pub mu: Option<f64>,
    pub subset_size: Option<usize>,
    pub batch: usize,
    pub iters: usize,
    pub seed: Option<u64>,
}

impl Default for LandmarkSection {
    fn default() -> Self {
        Self {
            strategy: Strategy::Uniform,
            c: 50,
            mu: None,
            subset_size: None,
            batch: 1024,
            iters: 100,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("nklr-out"),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundsSection {
    pub c_grid: Vec<usize>,
    pub p: NormOrder,
    /// Gradient tolerance of the restricted solves.
    pub tol: f64,
}

impl Default for BoundsSection {
    fn default() -> Self {
        Self {
            c_grid: vec![5, 10, 20, 40],
            p: NormOrder::Two,
            tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareSection {
    pub methods: Vec<Method>,
    pub budget: usize,
}

impl Default for CompareSection {
    fn default() -> Self {
        Self {
            methods: Method::ALL.to_vec(),
            budget: 2000,
        }
    }
}

/// Set `value` at a dotted key path, creating objects on the way.
pub fn set_path(root: &mut Value, key: &str, value: Value) -> Result<()> {
    let mut cur = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        if !cur.is_object() {
            if cur.is_null() {
                *cur = Value::Object(Map::new());
            } else {
                return Err(KlrError::Schema(format!("config key '{key}' crosses a non-object value")));
            }
        }
        let obj = cur.as_object_mut().expect("object");
        if i + 1 == parts.len() {
            obj.insert((*part).to_string(), value);
            return Ok(());
        }
        cur = obj.entry((*part).to_string()).or_insert(Value::Null);
    }
    Ok(())
}

/// Interpret a `--set` value as JSON, falling back to a plain string.
pub fn parse_value(raw: &str) -> Value {
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()))
}

impl RunConfig {
    /// Read `path` (if any), apply `overrides` in order, then validate.
    pub fn load(path: Option<&Path>, overrides: &[(String, Value)]) -> Result<Self> {
        let mut root = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| KlrError::Schema(format!("cannot read config {}: {e}", p.display())))?;
                serde_json::from_str(&text).map_err(|e| KlrError::Schema(format!("config {}: {e}", p.display())))?
            }
            None => Value::Object(Map::new()),
        };
        for (k, v) in overrides {
            set_path(&mut root, k, v.clone())?;
        }
        let cfg: RunConfig = serde_json::from_value(root).map_err(|e| KlrError::Schema(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        for p in [&self.data.train, &self.data.test].into_iter().flatten() {
            if !p.is_file() {
                return Err(KlrError::Schema(format!("dataset file {} does not exist", p.display())));
            }
        }
        if self.data.train.is_some() && self.data.synth.is_some() {
            return Err(KlrError::Schema("set either data.train or data.synth, not both".into()));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(KlrError::Schema(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        self.optimizer.validate().map_err(|e| KlrError::Schema(e.to_string()))?;
        KernelConfig::rbf(self.kernel.c).map_err(|e| KlrError::Schema(e.to_string()))?;
        if self.folds < 2 {
            return Err(KlrError::Schema("folds must be >= 2".into()));
        }
        Ok(())
    }

    pub fn split_seed(&self) -> u64 {
        self.split.seed.unwrap_or(self.seed)
    }

    pub fn split_spec(&self) -> SplitSpec {
        SplitSpec {
            train_fraction: self.split.train_fraction,
            seed: self.split_seed(),
            group_key: self.split.group_key.clone(),
        }
    }

    pub fn train_options(&self) -> Result<TrainOptions> {
        let lm = &self.landmarks;
        let landmarks = LandmarkParams {
            strategy: lm.strategy,
            c: lm.c,
            mu: lm.mu,
            subset_size: lm.subset_size,
            batch: lm.batch,
            iters: lm.iters,
            seed: lm.seed.unwrap_or(self.seed),
        };
        let mut o = TrainOptions::new(KernelConfig::rbf(self.kernel.c)?, landmarks, self.optimizer.clone());
        o.lambda = self.lambda;
        o.path = self.path;
        Ok(o)
    }

    /// The full labelled dataset named by the config.
    pub fn load_dataset(&self) -> Result<Dataset> {
        if let Some(s) = &self.data.synth {
            return crate::data::synth_generate_with(s);
        }
        let path = self
            .data
            .train
            .as_ref()
            .ok_or_else(|| KlrError::Schema("config needs data.train or data.synth".into()))?;
        load_csv(path, &self.data.csv_options())
    }

    /// Training and test partitions: the explicit test file when given,
    /// otherwise a split of the training data.
    pub fn load_partitions(&self) -> Result<(Dataset, Dataset, Option<u64>)> {
        let data = self.load_dataset()?;
        match &self.data.test {
            Some(p) => {
                let test = crate::data::load_csv_with_schema(p, &self.data.csv_options(), &data.feature_names)?;
                let test = test.align_classes(&data.class_names)?;
                Ok((data, test, None))
            }
            None => {
                let (tr, te) = split(&data, &self.split_spec())?;
                Ok((tr, te, Some(self.split_seed())))
            }
        }
    }
}
