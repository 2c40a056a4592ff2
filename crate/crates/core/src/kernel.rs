//! RBF kernel evaluation and Gram-matrix blocks.
//!
//! The kernel is `k(x, x') = exp(−c·‖x − x'‖²₂)` with a single positive
//! parameter `c`. Squared distances use the expansion
//! `‖x‖² + ‖x'‖² − 2⟨x, x'⟩`, clamped at zero.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{arg_err, KlrError, Result};

/// Formula convention recorded in model files.
pub const RBF_CONVENTION: &str = "k(x,x') = exp(-c * ||x - x'||_2^2)";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    #[default]
    Rbf,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    pub kind: KernelKind,
    pub c: f64,
}

impl KernelConfig {
    pub fn rbf(c: f64) -> Result<Self> {
        let cfg = Self {
            kind: KernelKind::Rbf,
            c,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return arg_err(format!("kernel parameter c must be positive, got {}", self.c));
        }
        Ok(())
    }
}

pub fn rbf_eval(x: &[f64], y: &[f64], c: f64) -> Result<f64> {
    if x.len() != y.len() {
        return arg_err(format!(
            "kernel arguments have dimensions {} and {}",
            x.len(),
            y.len()
        ));
    }
    let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((-c * d2).exp())
}

fn dot_rows(a: &DMatrix<f64>, i: usize, b: &DMatrix<f64>, j: usize) -> f64 {
    let mut s = 0.0;
    for k in 0..a.ncols() {
        s += a[(i, k)] * b[(j, k)];
    }
    s
}

fn row_sq_norms(a: &DMatrix<f64>) -> Vec<f64> {
    (0..a.nrows()).map(|i| dot_rows(a, i, a, i)).collect()
}

/// Kernel block between the rows of `x1` (N1×M) and `x2` (N2×M).
pub fn gram(x1: &DMatrix<f64>, x2: &DMatrix<f64>, config: &KernelConfig) -> Result<DMatrix<f64>> {
    config.validate()?;
    if x1.ncols() != x2.ncols() {
        return arg_err(format!(
            "gram blocks need equal feature dimension, got {} and {}",
            x1.ncols(),
            x2.ncols()
        ));
    }
    let c = config.c;
    let n1 = row_sq_norms(x1);
    let n2 = row_sq_norms(x2);
    let (r, k) = (x1.nrows(), x2.nrows());
    // Row-major fill in parallel; every entry is computed independently.
    let rows: Vec<Vec<f64>> = (0..r)
        .into_par_iter()
        .map(|i| {
            (0..k)
                .map(|j| {
                    let d2 = (n1[i] + n2[j] - 2.0 * dot_rows(x1, i, x2, j)).max(0.0);
                    (-c * d2).exp()
                })
                .collect()
        })
        .collect();
    Ok(DMatrix::from_fn(r, k, |i, j| rows[i][j]))
}

/// Columns `indices` of the N×N Gram matrix of `x`, without building it.
pub fn gram_columns(x: &DMatrix<f64>, indices: &[usize], config: &KernelConfig) -> Result<DMatrix<f64>> {
    let n = x.nrows();
    if let Some(&bad) = indices.iter().find(|&&i| i >= n) {
        return Err(KlrError::Argument(format!(
            "column index {bad} out of range for {n} points"
        )));
    }
    let landmarks = x.select_rows(indices.iter());
    gram(x, &landmarks, config)
}
