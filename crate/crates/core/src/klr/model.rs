//! Trained models and their JSON persistence.

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;

use super::{probabilities, ProbMatrix};
use crate::data::NormStats;
use crate::error::{arg_err, KlrError, Result};
use crate::kernel::{gram, KernelConfig, KernelKind, RBF_CONVENTION};
use crate::landmarks::Strategy;
use crate::linalg::check_finite;
use crate::nystrom::NystromFactor;
use crate::optim::{Method, Termination};

pub const MODEL_FORMAT: &str = "nystrom-klr-model/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamForm {
    /// α, one row per training sample.
    Full,
    /// θ = Φᵀα, one row per retained feature.
    Reduced,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParameterState {
    pub form: ParamForm,
    pub values: DMatrix<f64>,
    pub lambda: f64,
}

impl ParameterState {
    pub fn new(form: ParamForm, values: DMatrix<f64>, lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return arg_err(format!("lambda must be >= 0, got {lambda}"));
        }
        check_finite(&values, "parameter matrix")?;
        Ok(Self { form, values, lambda })
    }

    /// Coefficients on the feature map, `θ = Φᵀα` for the full form.
    pub fn theta(&self, factor: &NystromFactor) -> Result<DMatrix<f64>> {
        match self.form {
            ParamForm::Reduced => {
                if self.values.nrows() != factor.retained_rank {
                    return arg_err("theta rows differ from the factor rank");
                }
                Ok(self.values.clone())
            }
            ParamForm::Full => {
                if self.values.nrows() != factor.n() {
                    return arg_err("alpha rows differ from the factor size");
                }
                Ok(factor.features().tr_mul(&self.values))
            }
        }
    }

    /// Minimum-norm α with `Φᵀα = θ`, i.e. `α = Φ(ΦᵀΦ)⁻¹θ`.
    pub fn alpha(&self, factor: &NystromFactor) -> Result<DMatrix<f64>> {
        match self.form {
            ParamForm::Full => Ok(self.values.clone()),
            ParamForm::Reduced => {
                let phi = factor.features();
                let gram = phi.tr_mul(phi);
                let chol = gram
                    .cholesky()
                    .ok_or_else(|| KlrError::Numeric("feature Gram matrix is not positive definite".into()))?;
                Ok(phi * chol.solve(&self.values))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMetadata {
    pub strategy: Strategy,
    pub landmark_seed: u64,
    pub split_seed: Option<u64>,
    pub optimizer: Method,
    pub trained_form: ParamForm,
    pub iterations: usize,
    pub final_loss: f64,
    pub termination: Termination,
}

/// Everything needed to score new rows: normalization, landmarks, the
/// landmark-to-feature projection and the coefficients on those features.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub kernel: KernelConfig,
    /// Normalized landmark coordinates (C×M).
    pub landmark_rows: DMatrix<f64>,
    pub landmark_weights: Vec<f64>,
    /// C×r map from weighted kernel rows to features.
    pub projection: DMatrix<f64>,
    /// Always stored in reduced form.
    pub params: ParameterState,
    pub norm: NormStats,
    pub feature_names: Vec<String>,
    pub class_names: Vec<String>,
    pub metadata: ModelMetadata,
}

impl TrainedModel {
    #[allow(clippy::too_many_arguments)]
    pub fn from_training(
        kernel: KernelConfig,
        landmark_rows: DMatrix<f64>,
        factor: &NystromFactor,
        params: &ParameterState,
        norm: NormStats,
        feature_names: Vec<String>,
        class_names: Vec<String>,
        metadata: ModelMetadata,
    ) -> Result<Self> {
        let theta = params.theta(factor)?;
        let model = Self {
            kernel,
            landmark_rows,
            landmark_weights: factor.weights.clone(),
            projection: factor.projection.clone(),
            params: ParameterState::new(ParamForm::Reduced, theta, params.lambda)?,
            norm,
            feature_names,
            class_names,
            metadata,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        self.kernel.validate()?;
        let c = self.landmark_rows.nrows();
        if self.landmark_rows.ncols() != self.norm.dim() {
            return Err(KlrError::Schema(format!(
                "landmarks have {} columns but normalization has {}",
                self.landmark_rows.ncols(),
                self.norm.dim()
            )));
        }
        if self.feature_names.len() != self.norm.dim() {
            return Err(KlrError::Schema("feature names differ from normalization width".into()));
        }
        if self.landmark_weights.len() != c || self.projection.nrows() != c {
            return Err(KlrError::Schema("landmark weights or projection disagree with landmark count".into()));
        }
        if self.params.form != ParamForm::Reduced || self.params.values.nrows() != self.projection.ncols() {
            return Err(KlrError::Schema("parameter rows differ from the feature rank".into()));
        }
        if self.params.values.ncols() != self.class_names.len() {
            return Err(KlrError::Schema("parameter columns differ from class count".into()));
        }
        check_finite(&self.landmark_rows, "landmark rows")?;
        check_finite(&self.projection, "projection")?;
        check_finite(&self.params.values, "parameters")?;
        Ok(())
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    /// Feature-map rows for already-normalized inputs.
    pub fn features(&self, x_norm: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let mut block = gram(x_norm, &self.landmark_rows, &self.kernel)?;
        for (j, &w) in self.landmark_weights.iter().enumerate() {
            block.column_mut(j).scale_mut(w);
        }
        Ok(block * &self.projection)
    }

    /// Latent utilities for raw (un-normalized) rows.
    pub fn latents(&self, x_new: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let xn = self.norm.apply(x_new)?;
        Ok(self.features(&xn)? * &self.params.values)
    }

    pub fn predict(&self, x_new: &DMatrix<f64>) -> Result<(ProbMatrix, Vec<usize>)> {
        let p = probabilities(&self.latents(x_new)?)?;
        let labels = p.argmax();
        Ok((p, labels))
    }

    pub fn to_json(&self) -> Result<String> {
        self.validate()?;
        let file = ModelFile {
            format: MODEL_FORMAT.to_string(),
            kernel: KernelJson {
                kind: self.kernel.kind,
                c: Real(self.kernel.c),
                convention: RBF_CONVENTION.to_string(),
            },
            landmarks: LandmarksJson {
                rows: MatrixJson::from(&self.landmark_rows),
                weights: self.landmark_weights.iter().copied().map(Real).collect(),
                projection: MatrixJson::from(&self.projection),
            },
            params: ParamsJson {
                form: self.params.form,
                lambda: Real(self.params.lambda),
                values: MatrixJson::from(&self.params.values),
            },
            norm: NormJson {
                mean: self.norm.mean.iter().copied().map(Real).collect(),
                std: self.norm.std.iter().copied().map(Real).collect(),
            },
            feature_names: self.feature_names.clone(),
            class_names: self.class_names.clone(),
            metadata: MetadataJson {
                strategy: self.metadata.strategy,
                landmark_seed: self.metadata.landmark_seed,
                split_seed: self.metadata.split_seed,
                optimizer: self.metadata.optimizer,
                trained_form: self.metadata.trained_form,
                iterations: self.metadata.iterations,
                final_loss: Real(self.metadata.final_loss),
                termination: self.metadata.termination,
            },
        };
        let mut s = serde_json::to_string_pretty(&file)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text).map_err(|e| KlrError::Schema(format!("model file: {e}")))?;
        if file.format != MODEL_FORMAT {
            return Err(KlrError::Schema(format!("unsupported model format '{}'", file.format)));
        }
        if file.kernel.convention != RBF_CONVENTION {
            return Err(KlrError::Schema(format!(
                "unexpected kernel convention '{}'",
                file.kernel.convention
            )));
        }
        let unreal = |v: &[Real]| v.iter().map(|r| r.0).collect::<Vec<_>>();
        let model = Self {
            kernel: KernelConfig {
                kind: file.kernel.kind,
                c: file.kernel.c.0,
            },
            landmark_rows: file.landmarks.rows.to_matrix()?,
            landmark_weights: unreal(&file.landmarks.weights),
            projection: file.landmarks.projection.to_matrix()?,
            params: ParameterState::new(file.params.form, file.params.values.to_matrix()?, file.params.lambda.0)?,
            norm: NormStats {
                mean: unreal(&file.norm.mean),
                std: unreal(&file.norm.std),
            },
            feature_names: file.feature_names,
            class_names: file.class_names,
            metadata: ModelMetadata {
                strategy: file.metadata.strategy,
                landmark_seed: file.metadata.landmark_seed,
                split_seed: file.metadata.split_seed,
                optimizer: file.metadata.optimizer,
                trained_form: file.metadata.trained_form,
                iterations: file.metadata.iterations,
                final_loss: file.metadata.final_loss.0,
                termination: file.metadata.termination,
            },
        };
        if model.norm.std.len() != model.norm.mean.len() {
            return Err(KlrError::Schema("normalization mean and std lengths differ".into()));
        }
        model.validate()?;
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let text = self.to_json()?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// A real serialized with 17 significant digits.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(transparent)]
struct Real(f64);

impl Serialize for Real {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::Error;
        if !self.0.is_finite() {
            return Err(S::Error::custom("non-finite real in model file"));
        }
        let raw = RawValue::from_string(format!("{:.16e}", self.0)).map_err(S::Error::custom)?;
        raw.serialize(serializer)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MatrixJson {
    rows: usize,
    cols: usize,
    /// Row-major entries.
    data: Vec<Real>,
}

impl From<&DMatrix<f64>> for MatrixJson {
    fn from(m: &DMatrix<f64>) -> Self {
        let data = m.transpose().iter().copied().map(Real).collect();
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            data,
        }
    }
}

impl MatrixJson {
    fn to_matrix(&self) -> Result<DMatrix<f64>> {
        if self.data.len() != self.rows * self.cols {
            return Err(KlrError::Schema(format!(
                "matrix declares {}x{} but holds {} values",
                self.rows,
                self.cols,
                self.data.len()
            )));
        }
        Ok(DMatrix::from_row_iterator(self.rows, self.cols, self.data.iter().map(|r| r.0)))
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct KernelJson {
    kind: KernelKind,
    c: Real,
    convention: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LandmarksJson {
    rows: MatrixJson,
    weights: Vec<Real>,
    projection: MatrixJson,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamsJson {
    form: ParamForm,
    lambda: Real,
    values: MatrixJson,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NormJson {
    mean: Vec<Real>,
    std: Vec<Real>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MetadataJson {
    strategy: Strategy,
    landmark_seed: u64,
    split_seed: Option<u64>,
    optimizer: Method,
    trained_form: ParamForm,
    iterations: usize,
    final_loss: Real,
    termination: Termination,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    format: String,
    kernel: KernelJson,
    landmarks: LandmarksJson,
    params: ParamsJson,
    norm: NormJson,
    feature_names: Vec<String>,
    class_names: Vec<String>,
    metadata: MetadataJson,
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn toy_model(theta_scale: f64) -> TrainedModel {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let c = 4;
        let rows = DMatrix::from_fn(c, 2, |_, _| rng.random_range(-1.0..1.0));
        let projection = DMatrix::from_fn(c, 3, |_, _| rng.random_range(-1.0..1.0));
        let theta = DMatrix::from_fn(3, 3, |_, _| theta_scale * rng.random_range(-1.0..1.0));
        TrainedModel {
            kernel: KernelConfig::rbf(0.7).unwrap(),
            landmark_rows: rows,
            landmark_weights: vec![1.0 / 3.0; c],
            projection,
            params: ParameterState::new(ParamForm::Reduced, theta, 1e-6).unwrap(),
            norm: NormStats {
                mean: vec![0.1, -0.2],
                std: vec![1.5, 0.3],
            },
            feature_names: vec!["a".into(), "b".into()],
            class_names: vec!["x".into(), "y".into(), "z".into()],
            metadata: ModelMetadata {
                strategy: Strategy::Uniform,
                landmark_seed: 3,
                split_seed: Some(1),
                optimizer: Method::Lbfgs,
                trained_form: ParamForm::Reduced,
                iterations: 10,
                final_loss: 0.123456789,
                termination: Termination::GradientTolerance,
            },
        }
    }

    #[test]
    fn json_round_trip_is_exact() {
        let m = toy_model(1.0);
        let text = m.to_json().unwrap();
        let back = TrainedModel::from_json(&text).unwrap();
        assert_eq!(m, back);
        assert_eq!(back.to_json().unwrap(), text);
        assert!(text.contains(RBF_CONVENTION));
    }

    #[test]
    fn zero_theta_predicts_uniform_first_class() {
        let m = toy_model(0.0);
        let x = DMatrix::from_row_slice(2, 2, &[0.3, 1.0, -2.0, 4.0]);
        let (p, labels) = m.predict(&x).unwrap();
        assert_eq!(labels, vec![0, 0]);
        assert!(p.values.iter().all(|&v| (v - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn dimension_mismatch_is_schema_error() {
        let m = toy_model(1.0);
        assert!(matches!(m.predict(&DMatrix::zeros(1, 3)), Err(KlrError::Schema(_))));
    }

    #[test]
    fn corrupted_file_rejected() {
        let text = toy_model(1.0).to_json().unwrap().replace("\"rows\": 4", "\"rows\": 5");
        assert!(matches!(TrainedModel::from_json(&text), Err(KlrError::Schema(_))));
        assert!(TrainedModel::from_json("{}").is_err());
    }

    #[test]
    fn reals_have_seventeen_digits() {
        let s = serde_json::to_string(&Real(0.1)).unwrap();
        assert_eq!(s, "1.0000000000000001e-1");
        let back: f64 = serde_json::from_str(&s).unwrap();
        assert_eq!(back, 0.1);
    }
}
