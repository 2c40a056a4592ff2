//! Dataset ingestion, encoding, normalization, splitting and synthetic
//! generation.
//!
//! Labels are stored 0-based (`0..I`); class names keep the original label
//! strings in first-appearance order.

use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{arg_err, KlrError, Result};

/// Upper bound on the number of levels of a categorical column.
pub const MAX_CATEGORIES: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// N×M feature matrix.
    pub features: DMatrix<f64>,
    /// Class index of every row, in `0..I`.
    pub labels: Vec<usize>,
    /// N×I indicator matrix.
    pub one_hot: DMatrix<f64>,
    pub feature_names: Vec<String>,
    pub class_names: Vec<String>,
    /// Grouping key per row, when the source declared a group column.
    pub groups: Option<Vec<String>>,
    pub group_column: Option<String>,
}

impl Dataset {
    pub fn new(
        features: DMatrix<f64>,
        labels: Vec<usize>,
        feature_names: Vec<String>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        let n = features.nrows();
        let m = features.ncols();
        let classes = class_names.len();
        if n == 0 {
            return Err(KlrError::EmptyInput("dataset has no rows".into()));
        }
        if m == 0 {
            return Err(KlrError::Schema("dataset has no feature columns".into()));
        }
        if classes < 2 {
            return Err(KlrError::Schema(format!(
                "need at least 2 classes, found {classes}"
            )));
        }
        if labels.len() != n {
            return Err(KlrError::Schema(format!(
                "{} labels for {} rows",
                labels.len(),
                n
            )));
        }
        if feature_names.len() != m {
            return Err(KlrError::Schema(format!(
                "{} feature names for {} columns",
                feature_names.len(),
                m
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
            return Err(KlrError::Schema(format!(
                "label index {bad} out of range for {classes} classes"
            )));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(KlrError::Numeric("features contain NaN or infinite values".into()));
        }
        let one_hot = one_hot(&labels, classes);
        Ok(Self {
            features,
            labels,
            one_hot,
            feature_names,
            class_names,
            groups: None,
            group_column: None,
        })
    }

    pub fn with_groups(mut self, column: impl Into<String>, groups: Vec<String>) -> Result<Self> {
        if groups.len() != self.len() {
            return Err(KlrError::Schema("group vector length differs from row count".into()));
        }
        self.group_column = Some(column.into());
        self.groups = Some(groups);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.features.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    /// Rows selected by `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(KlrError::EmptyInput("subset has no rows".into()));
        }
        let features = self.features.select_rows(indices.iter());
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        let mut out = Dataset::new(
            features,
            labels,
            self.feature_names.clone(),
            self.class_names.clone(),
        )?;
        if let (Some(col), Some(groups)) = (&self.group_column, &self.groups) {
            out = out.with_groups(col.clone(), indices.iter().map(|&i| groups[i].clone()).collect())?;
        }
        Ok(out)
    }

    /// Re-express the labels against another class list (e.g. a trained
    /// model's). Every class of `self` must be present in `classes`.
    pub fn align_classes(&self, classes: &[String]) -> Result<Self> {
        let lookup: HashMap<&str, usize> = classes
            .iter()
            .enumerate()
            .map(|(i, c)| (c.as_str(), i))
            .collect();
        let mut labels = Vec::with_capacity(self.len());
        for &l in &self.labels {
            let name = &self.class_names[l];
            match lookup.get(name.as_str()) {
                Some(&idx) => labels.push(idx),
                None => {
                    return Err(KlrError::Schema(format!(
                        "class '{name}' is unknown to the model"
                    )))
                }
            }
        }
        let mut out = Dataset::new(
            self.features.clone(),
            labels,
            self.feature_names.clone(),
            classes.to_vec(),
        )?;
        out.groups = self.groups.clone();
        out.group_column = self.group_column.clone();
        Ok(out)
    }

    /// Per-class row counts.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }
}

pub fn one_hot(labels: &[usize], classes: usize) -> DMatrix<f64> {
    let mut y = DMatrix::zeros(labels.len(), classes);
    for (n, &l) in labels.iter().enumerate() {
        y[(n, l)] = 1.0;
    }
    y
}

// ---------------------------------------------------------------------------
// CSV ingestion

/// Column roles for [`load_csv`].
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CsvOptions {
    pub label_column: String,
    #[serde(default)]
    pub categorical_columns: Vec<String>,
    /// Column kept aside as the grouping key (not used as a feature).
    #[serde(default)]
    pub group_column: Option<String>,
    /// Columns ignored entirely.
    #[serde(default)]
    pub drop_columns: Vec<String>,
}

impl CsvOptions {
    pub fn new(label_column: impl Into<String>) -> Self {
        Self {
            label_column: label_column.into(),
            ..Self::default()
        }
    }
}

struct RawTable {
    headers: Vec<String>,
    rows: Vec<Vec<String>>,
}

fn read_table<R: Read>(reader: R) -> Result<RawTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .delimiter(b',')
        .quote(b'"')
        .double_quote(true)
        .from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if headers.is_empty() || headers.iter().all(|h| h.is_empty()) {
        return Err(KlrError::EmptyInput("CSV has no header row".into()));
    }
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record?;
        rows.push(record.iter().map(|v| v.trim().to_string()).collect());
    }
    if rows.is_empty() {
        return Err(KlrError::EmptyInput("CSV has a header but no data rows".into()));
    }
    Ok(RawTable { headers, rows })
}

fn column_index(headers: &[String], name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| KlrError::Schema(format!("column '{name}' not found in CSV header")))
}

/// Load a labelled dataset from a CSV file.
pub fn load_csv(path: impl AsRef<Path>, options: &CsvOptions) -> Result<Dataset> {
    let file = std::fs::File::open(path.as_ref())?;
    load_csv_from_reader(file, options, None)
}

/// Load a CSV whose features must line up with an existing schema: numeric
/// columns by name, categorical indicators as `column=level`.
pub fn load_csv_with_schema(
    path: impl AsRef<Path>,
    options: &CsvOptions,
    feature_names: &[String],
) -> Result<Dataset> {
    let file = std::fs::File::open(path.as_ref())?;
    load_csv_from_reader(file, options, Some(feature_names))
}

/// Reader-based variant of [`load_csv`].
pub fn load_csv_from_reader<R: Read>(
    reader: R,
    options: &CsvOptions,
    schema: Option<&[String]>,
) -> Result<Dataset> {
    let table = read_table(reader)?;
    let label_idx = column_index(&table.headers, &options.label_column)?;
    let labels_raw: Vec<&str> = table.rows.iter().map(|r| r[label_idx].as_str()).collect();
    let mut class_names: Vec<String> = Vec::new();
    let mut class_lookup: HashMap<&str, usize> = HashMap::new();
    let mut labels = Vec::with_capacity(labels_raw.len());
    for (row, &v) in labels_raw.iter().enumerate() {
        if v.is_empty() {
            return Err(KlrError::Parse {
                row,
                column: options.label_column.clone(),
                message: "empty label".into(),
            });
        }
        let next = class_lookup.len();
        let idx = *class_lookup.entry(v).or_insert_with(|| {
            class_names.push(v.to_string());
            next
        });
        labels.push(idx);
    }
    let (features, feature_names) = encode_features(&table, options, label_idx, schema)?;
    let mut ds = Dataset::new(features, labels, feature_names, class_names)?;
    if let Some(group) = &options.group_column {
        let gi = column_index(&table.headers, group)?;
        let groups = table.rows.iter().map(|r| r[gi].clone()).collect();
        ds = ds.with_groups(group.clone(), groups)?;
    }
    Ok(ds)
}

/// Feature matrix laid out as `feature_names`; the label column may be
/// absent.
pub fn load_features_with_schema(
    path: impl AsRef<Path>,
    options: &CsvOptions,
    feature_names: &[String],
) -> Result<DMatrix<f64>> {
    let table = read_table(std::fs::File::open(path.as_ref())?)?;
    Ok(encode_features(&table, options, usize::MAX, Some(feature_names))?.0)
}

enum ColumnPlan {
    Numeric(usize),
    Indicator { column: usize, level: String },
}

fn encode_features(
    table: &RawTable,
    options: &CsvOptions,
    label_idx: usize,
    schema: Option<&[String]>,
) -> Result<(DMatrix<f64>, Vec<String>)> {
    for c in &options.categorical_columns {
        column_index(&table.headers, c)?;
    }
    let excluded = |h: &str| {
        h == options.label_column
            || options.group_column.as_deref() == Some(h)
            || options.drop_columns.iter().any(|d| d == h)
    };
    let is_categorical = |h: &str| options.categorical_columns.iter().any(|c| c == h);

    let mut plan = Vec::new();
    let mut names = Vec::new();
    match schema {
        None => {
            for (ci, h) in table.headers.iter().enumerate() {
                if ci == label_idx || excluded(h) {
                    continue;
                }
                if is_categorical(h) {
                    let mut levels: Vec<String> = Vec::new();
                    for r in &table.rows {
                        if !levels.iter().any(|l| l == &r[ci]) {
                            levels.push(r[ci].clone());
                        }
                    }
                    if levels.len() > MAX_CATEGORIES {
                        return Err(KlrError::Schema(format!(
                            "categorical column '{h}' has {} levels (max {MAX_CATEGORIES})",
                            levels.len()
                        )));
                    }
                    for level in levels {
                        names.push(format!("{h}={level}"));
                        plan.push(ColumnPlan::Indicator { column: ci, level });
                    }
                } else {
                    names.push(h.clone());
                    plan.push(ColumnPlan::Numeric(ci));
                }
            }
        }
        Some(expected) => {
            for name in expected {
                if let Some(ci) = table.headers.iter().position(|h| h == name) {
                    plan.push(ColumnPlan::Numeric(ci));
                } else if let Some((col, level)) = name.split_once('=') {
                    let ci = column_index(&table.headers, col)?;
                    plan.push(ColumnPlan::Indicator {
                        column: ci,
                        level: level.to_string(),
                    });
                } else {
                    return Err(KlrError::Schema(format!("column '{name}' not found in CSV header")));
                }
                names.push(name.clone());
            }
            // Levels outside the schema cannot be represented.
            for c in &options.categorical_columns {
                let ci = column_index(&table.headers, c)?;
                for (row, r) in table.rows.iter().enumerate() {
                    if !expected.iter().any(|n| *n == format!("{c}={}", r[ci])) {
                        return Err(KlrError::Parse {
                            row,
                            column: c.clone(),
                            message: format!("level '{}' unknown to the schema", r[ci]),
                        });
                    }
                }
            }
        }
    }
    if plan.is_empty() {
        return Err(KlrError::Schema("no feature columns remain after column roles".into()));
    }

    let n = table.rows.len();
    let mut x = DMatrix::zeros(n, plan.len());
    for (j, p) in plan.iter().enumerate() {
        match p {
            ColumnPlan::Numeric(ci) => {
                for (row, r) in table.rows.iter().enumerate() {
                    let raw = &r[*ci];
                    let v: f64 = raw.parse().map_err(|_| KlrError::Parse {
                        row,
                        column: table.headers[*ci].clone(),
                        message: format!("'{raw}' is not a number"),
                    })?;
                    if !v.is_finite() {
                        return Err(KlrError::Parse {
                            row,
                            column: table.headers[*ci].clone(),
                            message: format!("'{raw}' is not finite"),
                        });
                    }
                    x[(row, j)] = v;
                }
            }
            ColumnPlan::Indicator { column, level } => {
                for (row, r) in table.rows.iter().enumerate() {
                    if &r[*column] == level {
                        x[(row, j)] = 1.0;
                    }
                }
            }
        }
    }
    Ok((x, names))
}

/// Write a dataset as CSV (features, then the label column).
pub fn write_csv(path: impl AsRef<Path>, ds: &Dataset, label_column: &str) -> Result<()> {
    let mut w = csv::Writer::from_path(path.as_ref())?;
    let mut header: Vec<String> = ds.feature_names.clone();
    header.push(label_column.to_string());
    w.write_record(&header)?;
    for n in 0..ds.len() {
        let mut rec: Vec<String> = (0..ds.n_features())
            .map(|j| format!("{:?}", ds.features[(n, j)]))
            .collect();
        rec.push(ds.class_names[ds.labels[n]].clone());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Normalization

/// Column means and standard deviations estimated on a training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl NormStats {
    /// Population statistics per column; constant columns get std 1.
    pub fn fit(x: &DMatrix<f64>) -> Self {
        let n = x.nrows() as f64;
        let mut mean = Vec::with_capacity(x.ncols());
        let mut std = Vec::with_capacity(x.ncols());
        for col in x.column_iter() {
            let mu = col.iter().sum::<f64>() / n;
            let var = col.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / n;
            let sd = var.sqrt();
            mean.push(mu);
            std.push(if sd > 1e-12 * (1.0 + mu.abs()) { sd } else { 1.0 });
        }
        Self { mean, std }
    }

    pub fn identity(m: usize) -> Self {
        Self {
            mean: vec![0.0; m],
            std: vec![1.0; m],
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.ncols() != self.dim() {
            return Err(KlrError::Schema(format!(
                "expected {} feature columns, got {}",
                self.dim(),
                x.ncols()
            )));
        }
        let mut out = x.clone();
        for (j, mut col) in out.column_iter_mut().enumerate() {
            let (mu, sd) = (self.mean[j], self.std[j]);
            col.apply(|v| *v = (*v - mu) / sd);
        }
        Ok(out)
    }
}

/// Z-score every dataset with statistics estimated on `train` only.
pub fn normalize(train: &Dataset, others: &[Dataset]) -> Result<(Dataset, Vec<Dataset>, NormStats)> {
    for o in others {
        if o.feature_names != train.feature_names {
            return Err(KlrError::Schema(
                "datasets disagree on feature columns; normalize needs a shared schema".into(),
            ));
        }
    }
    let stats = NormStats::fit(&train.features);
    let transform = |d: &Dataset| -> Result<Dataset> {
        let mut out = d.clone();
        out.features = stats.apply(&d.features)?;
        Ok(out)
    };
    let t = transform(train)?;
    let rest = others.iter().map(transform).collect::<Result<Vec<_>>>()?;
    Ok((t, rest, stats))
}

// ---------------------------------------------------------------------------
// Splitting

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
    #[serde(default)]
    pub group_key: Option<String>,
}

impl SplitSpec {
    pub fn new(train_fraction: f64, seed: u64) -> Self {
        Self {
            train_fraction,
            seed,
            group_key: None,
        }
    }
}

/// Row indices for train and test under `spec`.
pub fn split_indices(dataset: &Dataset, spec: &SplitSpec) -> Result<(Vec<usize>, Vec<usize>)> {
    let f = spec.train_fraction;
    if !(f > 0.0 && f < 1.0) {
        return arg_err(format!("train_fraction must lie in (0,1), got {f}"));
    }
    let n = dataset.len();
    if n < 2 {
        return arg_err("need at least 2 rows to split");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let target = (f * n as f64).round().clamp(1.0, (n - 1) as f64) as usize;

    let (mut train, mut test) = match &spec.group_key {
        None => {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(&mut rng);
            let test = idx.split_off(target);
            (idx, test)
        }
        Some(key) => {
            let keys = group_keys(dataset, key)?;
            // Groups in first-appearance order, then shuffled.
            let mut order: Vec<&str> = Vec::new();
            let mut members: HashMap<&str, Vec<usize>> = HashMap::new();
            for (i, k) in keys.iter().enumerate() {
                members
                    .entry(k.as_str())
                    .or_insert_with(|| {
                        order.push(k.as_str());
                        Vec::new()
                    })
                    .push(i);
            }
            order.shuffle(&mut rng);
            let (mut train, mut test) = (Vec::new(), Vec::new());
            for g in order {
                let rows = &members[g];
                let now = train.len() as f64 - target as f64;
                let after = now + rows.len() as f64;
                if after.abs() < now.abs() {
                    train.extend_from_slice(rows);
                } else {
                    test.extend_from_slice(rows);
                }
            }
            (train, test)
        }
    };
    if train.is_empty() || test.is_empty() {
        return arg_err("split left one partition empty (too few groups?)");
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

fn group_keys(dataset: &Dataset, key: &str) -> Result<Vec<String>> {
    if dataset.group_column.as_deref() == Some(key) {
        if let Some(g) = &dataset.groups {
            return Ok(g.clone());
        }
    }
    if let Some(j) = dataset.feature_names.iter().position(|f| f == key) {
        return Ok(dataset
            .features
            .column(j)
            .iter()
            .map(|v| format!("{:?}", v))
            .collect());
    }
    Err(KlrError::Schema(format!("group column '{key}' not present in dataset")))
}

/// Deterministic train/test partition.
pub fn split(dataset: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset)> {
    let (train, test) = split_indices(dataset, spec)?;
    Ok((dataset.subset(&train)?, dataset.subset(&test)?))
}

/// `k` folds of row indices for cross-validation.
pub fn kfold_indices(n: usize, k: usize, seed: u64) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
    if k < 2 || k > n {
        return arg_err(format!("k-fold needs 2 <= k <= N, got k={k}, N={n}"));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut folds = Vec::with_capacity(k);
    for f in 0..k {
        let lo = f * n / k;
        let hi = (f + 1) * n / k;
        let mut valid: Vec<usize> = idx[lo..hi].to_vec();
        let mut train: Vec<usize> = idx[..lo].iter().chain(&idx[hi..]).copied().collect();
        valid.sort_unstable();
        train.sort_unstable();
        folds.push((train, valid));
    }
    Ok(folds)
}

// ---------------------------------------------------------------------------
// Synthetic generator

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Nonlinearity {
    Linear,
    RbfMixture,
}

impl std::str::FromStr for Nonlinearity {
    type Err = KlrError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Self::Linear),
            "rbf_mixture" | "rbf-mixture" => Ok(Self::RbfMixture),
            other => arg_err(format!("unknown nonlinearity '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthOptions {
    pub n: usize,
    pub m: usize,
    pub classes: usize,
    pub nonlinearity: Nonlinearity,
    pub seed: u64,
    /// Multiplier on the ground-truth latent functions (0 gives uniform
    /// class probabilities).
    #[serde(default = "default_signal")]
    pub signal: f64,
    /// When set, features are drawn from this many well-separated unit
    /// Gaussian blobs instead of a single standard normal.
    #[serde(default)]
    pub clusters: Option<usize>,
}

fn default_signal() -> f64 {
    3.0
}

impl SynthOptions {
    pub fn new(n: usize, m: usize, classes: usize, nonlinearity: Nonlinearity, seed: u64) -> Self {
        Self {
            n,
            m,
            classes,
            nonlinearity,
            seed,
            signal: default_signal(),
            clusters: None,
        }
    }
}

/// Standard-normal features with labels drawn from a softmax over
/// ground-truth latent functions.
pub fn synth_generate(
    n: usize,
    m: usize,
    classes: usize,
    nonlinearity: Nonlinearity,
    seed: u64,
) -> Result<Dataset> {
    synth_generate_with(&SynthOptions::new(n, m, classes, nonlinearity, seed))
}

pub fn synth_generate_with(opts: &SynthOptions) -> Result<Dataset> {
    let (n, m, classes) = (opts.n, opts.m, opts.classes);
    if m < 1 || classes < 2 || n < classes {
        return arg_err(format!(
            "synthetic sizes need n >= i >= 2 and m >= 1 (got n={n}, m={m}, i={classes})"
        ));
    }
    if !opts.signal.is_finite() {
        return arg_err("signal must be finite");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let normal = |rng: &mut ChaCha8Rng| -> f64 { rng.sample(StandardNormal) };

    let mut x = DMatrix::zeros(n, m);
    match opts.clusters {
        None | Some(0) | Some(1) => {
            for v in x.iter_mut() {
                *v = normal(&mut rng);
            }
        }
        Some(k) => {
            let centers: Vec<Vec<f64>> = (0..k)
                .map(|_| (0..m).map(|_| 4.0 * normal(&mut rng)).collect())
                .collect();
            for row in 0..n {
                let c = &centers[rng.random_range(0..k)];
                for j in 0..m {
                    x[(row, j)] = c[j] + normal(&mut rng);
                }
            }
        }
    }

    let mut latent = DMatrix::zeros(n, classes);
    match opts.nonlinearity {
        Nonlinearity::Linear => {
            let scale = opts.signal / (m as f64).sqrt();
            let w = DMatrix::from_fn(m, classes, |_, _| normal(&mut rng) * scale);
            latent = &x * w;
        }
        Nonlinearity::RbfMixture => {
            let bumps = 2 * classes + 2;
            // Bump centres sit on data points so every bump is populated.
            let centers: Vec<usize> = (0..bumps).map(|_| rng.random_range(0..n)).collect();
            let amps = DMatrix::from_fn(bumps, classes, |_, _| normal(&mut rng) * opts.signal);
            let width2 = 2.0 * (m as f64).max(1.0) * 0.5;
            for row in 0..n {
                for (b, &ci) in centers.iter().enumerate() {
                    let d2: f64 = (0..m).map(|j| (x[(row, j)] - x[(ci, j)]).powi(2)).sum();
                    let phi = (-d2 / width2).exp();
                    for i in 0..classes {
                        latent[(row, i)] += amps[(b, i)] * phi;
                    }
                }
            }
        }
    }

    let mut labels = Vec::with_capacity(n);
    for row in 0..n {
        let mx = (0..classes).map(|i| latent[(row, i)]).fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = (0..classes).map(|i| (latent[(row, i)] - mx).exp()).collect();
        let total: f64 = w.iter().sum();
        let mut u = rng.random::<f64>() * total;
        let mut pick = classes - 1;
        for (i, wi) in w.iter().enumerate() {
            if u < *wi {
                pick = i;
                break;
            }
            u -= wi;
        }
        labels.push(pick);
    }
    let feature_names = (0..m).map(|j| format!("x{}", j + 1)).collect();
    let class_names = (0..classes).map(|i| format!("{}", i + 1)).collect();
    Dataset::new(x, labels, feature_names, class_names)
}
