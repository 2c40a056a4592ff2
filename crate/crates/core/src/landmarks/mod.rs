//! Landmark / column-selection strategies for the Nyström sketch.
//!
//! Column strategies return sampled column indices (with replacement) and
//! rescaling weights `1/√(C·q_i)`; k-means returns centroid points.

mod kmeans;
mod leverage;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{arg_err, KlrError, Result};
use crate::kernel::KernelConfig;

pub use kmeans::{select_kmeans, select_kmeans_with, KmeansOptions};
pub use leverage::{
    dac_leverage_scores, default_mu, leverage_scores_exact, rls_leverage_scores, select_dac_leverage,
    select_exact_leverage, select_rls_leverage, LeverageScores,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Uniform,
    #[serde(alias = "k_means")]
    Kmeans,
    #[serde(alias = "dac")]
    DacLeverage,
    #[serde(alias = "rls")]
    RlsLeverage,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [
        Strategy::Uniform,
        Strategy::Kmeans,
        Strategy::DacLeverage,
        Strategy::RlsLeverage,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Strategy::Uniform => "uniform",
            Strategy::Kmeans => "kmeans",
            Strategy::DacLeverage => "dac_leverage",
            Strategy::RlsLeverage => "rls_leverage",
        }
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Strategy {
    type Err = KlrError;
    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "uniform" => Ok(Strategy::Uniform),
            "kmeans" | "k_means" => Ok(Strategy::Kmeans),
            "dac_leverage" | "dac" => Ok(Strategy::DacLeverage),
            "rls_leverage" | "rls" => Ok(Strategy::RlsLeverage),
            other => arg_err(format!("unknown landmark strategy '{other}'")),
        }
    }
}

/// The sketching matrix in factored form.
#[derive(Debug, Clone, PartialEq)]
pub enum Sketch {
    /// Sampled columns of K and their rescaling weights.
    Columns { indices: Vec<usize>, weights: Vec<f64> },
    /// Landmark points (C×M) not necessarily in the data.
    Points { centroids: DMatrix<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkSelection {
    pub strategy: Strategy,
    pub seed: u64,
    pub sketch: Sketch,
}

impl LandmarkSelection {
    pub fn len(&self) -> usize {
        match &self.sketch {
            Sketch::Columns { indices, .. } => indices.len(),
            Sketch::Points { centroids } => centroids.nrows(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Landmark feature rows (C×M).
    pub fn landmark_rows(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        match &self.sketch {
            Sketch::Columns { indices, .. } => {
                if let Some(&bad) = indices.iter().find(|&&i| i >= x.nrows()) {
                    return arg_err(format!("landmark index {bad} out of range for {} rows", x.nrows()));
                }
                Ok(x.select_rows(indices.iter()))
            }
            Sketch::Points { centroids } => {
                if centroids.ncols() != x.ncols() {
                    return arg_err("centroid dimension differs from the data");
                }
                Ok(centroids.clone())
            }
        }
    }

    /// Per-landmark column weights (all ones in points mode).
    pub fn weights(&self) -> Vec<f64> {
        match &self.sketch {
            Sketch::Columns { weights, .. } => weights.clone(),
            Sketch::Points { centroids } => vec![1.0; centroids.nrows()],
        }
    }
}

/// Parameters for [`select`], covering every strategy.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LandmarkParams {
    pub strategy: Strategy,
    /// Number of landmarks C.
    pub c: usize,
    /// Ridge parameter; `None` uses [`default_mu`].
    #[serde(default)]
    pub mu: Option<f64>,
    /// DAC block size; `None` uses `max(2C, 500)` capped at N.
    #[serde(default)]
    pub subset_size: Option<usize>,
    #[serde(default = "default_batch")]
    pub batch: usize,
    #[serde(default = "default_iters")]
    pub iters: usize,
    pub seed: u64,
}

fn default_batch() -> usize {
    1024
}

fn default_iters() -> usize {
    100
}

impl LandmarkParams {
    pub fn new(strategy: Strategy, c: usize, seed: u64) -> Self {
        Self {
            strategy,
            c,
            mu: None,
            subset_size: None,
            batch: default_batch(),
            iters: default_iters(),
            seed,
        }
    }
}

/// Run the configured strategy on the feature rows `x`.
pub fn select(x: &DMatrix<f64>, params: &LandmarkParams, kernel: &KernelConfig) -> Result<LandmarkSelection> {
    let n = x.nrows();
    let mu = params.mu.unwrap_or_else(|| default_mu(n as f64, n));
    match params.strategy {
        Strategy::Uniform => select_uniform(n, params.c, params.seed),
        Strategy::Kmeans => select_kmeans(x, params.c, params.batch, params.iters, params.seed),
        Strategy::DacLeverage => {
            let s = params
                .subset_size
                .unwrap_or_else(|| (2 * params.c).max(500))
                .min(n.max(1));
            select_dac_leverage(x, params.c, mu, s, kernel, params.seed)
        }
        Strategy::RlsLeverage => select_rls_leverage(x, params.c, mu, kernel, params.seed),
    }
}

pub(crate) fn check_count(n: usize, c: usize) -> Result<()> {
    if c < 1 || c > n {
        return arg_err(format!("landmark count C={c} must satisfy 1 <= C <= N={n}"));
    }
    Ok(())
}

/// Generator for one named random stream derived from `seed`.
pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub(crate) const SAMPLING_STREAM: u64 = 0;
pub(crate) const PARTITION_STREAM: u64 = 1;
pub(crate) const RECURSION_STREAM: u64 = 2;

/// Draw `c` indices i.i.d. from probabilities `q` (with replacement),
/// returning indices and weights `1/√(c·q_i)`.
pub(crate) fn sample_columns(q: &[f64], c: usize, rng: &mut ChaCha8Rng) -> Result<(Vec<usize>, Vec<f64>)> {
    let total: f64 = q.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(KlrError::Numeric("sampling probabilities sum to zero".into()));
    }
    let mut cdf = Vec::with_capacity(q.len());
    let mut acc = 0.0;
    for &v in q {
        acc += v.max(0.0);
        cdf.push(acc);
    }
    let mut indices = Vec::with_capacity(c);
    let mut weights = Vec::with_capacity(c);
    for _ in 0..c {
        let u = rng.random::<f64>() * acc;
        let mut i = cdf.partition_point(|&v| v <= u);
        // Never land on a zero-probability slot.
        while i < q.len() && q[i] <= 0.0 {
            i += 1;
        }
        let i = i.min(q.len() - 1);
        indices.push(i);
        weights.push(1.0 / ((c as f64) * q[i] / total).sqrt());
    }
    Ok((indices, weights))
}

/// `c` columns drawn uniformly with replacement; weights `√(n/c)`.
pub fn select_uniform(n: usize, c: usize, seed: u64) -> Result<LandmarkSelection> {
    check_count(n, c)?;
    let mut rng = stream_rng(seed, SAMPLING_STREAM);
    let indices: Vec<usize> = (0..c).map(|_| rng.random_range(0..n)).collect();
    let w = (n as f64 / c as f64).sqrt();
    Ok(LandmarkSelection {
        strategy: Strategy::Uniform,
        seed,
        sketch: Sketch::Columns {
            indices,
            weights: vec![w; c],
        },
    })
}
