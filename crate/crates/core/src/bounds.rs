//! Spectral diagnostics and parameter-error bounds for Nyström KLR.
//!
//! For a Nyström factor with column space `L(K̂)` and projector `Π`, the
//! restricted solutions satisfy, per alternative,
//!
//! ```text
//! ‖ℵ*_i − ℵ̂*_i‖_p ≲ ‖ℵ*_i‖_p · ‖[K² − K Π K]^{1/2} K†‖_p,   ‖ℵ*_i‖_p ≤ (2/(Nλ))‖1‖_p.
//! ```

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{arg_err, KlrError, Result};
use crate::klr::{restricted_solve_factor, restricted_solve_with, RestrictedOptions, RestrictedSolution};
use crate::linalg::{column_basis, pinv_sym, singular_values, symmetrize, SymEigen};
use crate::nystrom::{best_rank_factor, NystromFactor, MATERIALIZE_LIMIT};

/// Number of C values in the power-law fit grid.
pub const FIT_GRID_POINTS: usize = 32;
/// Largest C used by the fit.
pub const FIT_MAX_C: usize = 2000;
/// Eigenvalues below this fraction of σ₁ are treated as numerical noise.
pub const SPECTRUM_NOISE_FLOOR: f64 = 1e-12;
const DENSE_LIMIT: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NormOrder {
    #[serde(rename = "1")]
    One,
    #[serde(rename = "2")]
    Two,
    #[serde(rename = "inf")]
    Inf,
}

impl NormOrder {
    pub fn as_str(&self) -> &'static str {
        match self {
            NormOrder::One => "1",
            NormOrder::Two => "2",
            NormOrder::Inf => "inf",
        }
    }
}

impl std::fmt::Display for NormOrder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for NormOrder {
    type Err = KlrError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "1" => Ok(NormOrder::One),
            "2" | "fro" => Ok(NormOrder::Two),
            "inf" | "infinity" => Ok(NormOrder::Inf),
            other => arg_err(format!("norm order must be 1, 2 or inf, got '{other}'")),
        }
    }
}

fn p_norm(values: impl Iterator<Item = f64>, p: NormOrder) -> f64 {
    match p {
        NormOrder::One => values.map(f64::abs).sum(),
        NormOrder::Two => values.map(|v| v * v).sum::<f64>().sqrt(),
        NormOrder::Inf => values.fold(0.0, |m, v| m.max(v.abs())),
    }
}

/// Schatten p-norm: the ℓ_p norm of the singular values.
pub fn schatten_norm(a: &DMatrix<f64>, p: NormOrder) -> f64 {
    match p {
        NormOrder::Two => a.norm(),
        _ => p_norm(singular_values(a).into_iter(), p),
    }
}

pub fn vector_norm(v: &[f64], p: NormOrder) -> f64 {
    p_norm(v.iter().copied(), p)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    /// Descending, nonnegative.
    pub singular_values: Vec<f64>,
    /// Fit `σ_{C+1} = a / C^b`.
    pub fit_a: f64,
    pub fit_b: f64,
    /// Pearson correlation of `(ln C, ln σ_{C+1})` over the fit points.
    pub log_log_correlation: f64,
    pub fit_points: usize,
    /// True when the fit has no usable decay signal.
    pub degenerate: bool,
}

impl SpectrumReport {
    pub fn predicted(&self, c: usize) -> f64 {
        self.fit_a / (c as f64).powf(self.fit_b)
    }
}

/// Log-spaced integer grid over `1..=max`, without repeats.
pub fn log_grid(max: usize, points: usize) -> Vec<usize> {
    if max == 0 {
        return Vec::new();
    }
    let mut grid: Vec<usize> = (0..points)
        .map(|k| {
            let t = if points > 1 { k as f64 / (points - 1) as f64 } else { 0.0 };
            (max as f64).powf(t).round() as usize
        })
        .map(|c| c.clamp(1, max))
        .collect();
    grid.dedup();
    grid
}

/// OLS fit of `ln σ_{C+1} = ln a − b ln C` on a log-spaced grid over the
/// descending spectrum `sigma`.
pub fn fit_power_law(sigma: &[f64]) -> SpectrumReport {
    let n = sigma.len();
    let s1 = sigma.first().copied().unwrap_or(0.0);
    let max_c = n.saturating_sub(1).min(FIT_MAX_C);
    let pts: Vec<(f64, f64)> = log_grid(max_c, FIT_GRID_POINTS)
        .into_iter()
        .filter(|&c| sigma[c] > SPECTRUM_NOISE_FLOOR * s1)
        .map(|c| ((c as f64).ln(), sigma[c].ln()))
        .collect();
    let k = pts.len() as f64;
    let mut report = SpectrumReport {
        singular_values: sigma.to_vec(),
        fit_a: s1,
        fit_b: 0.0,
        log_log_correlation: 0.0,
        fit_points: pts.len(),
        degenerate: true,
    };
    if pts.len() < 2 {
        return report;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    report.fit_b = -slope;
    report.fit_a = (my - slope * mx).exp();
    // A flat log-spectrum carries no decay information.
    if syy > 1e-20 * k {
        report.log_log_correlation = sxy / (sxx * syy).sqrt();
        report.degenerate = false;
    } else {
        report.fit_b = 0.0;
    }
    report
}

/// Full spectrum of a symmetric Gram matrix plus the power-law fit.
pub fn spectrum(k: &DMatrix<f64>) -> Result<SpectrumReport> {
    if k.nrows() > MATERIALIZE_LIMIT {
        return Err(KlrError::Size {
            what: "spectrum N",
            actual: k.nrows(),
            limit: MATERIALIZE_LIMIT,
        });
    }
    let eig = SymEigen::new(k)?;
    let mut sigma: Vec<f64> = eig.values.iter().map(|v| v.abs()).collect();
    sigma.sort_by(|a, b| b.total_cmp(a));
    Ok(fit_power_law(&sigma))
}

/// Factor reproducing the best rank-`c` approximation of `k`.
pub fn best_rank_sketch(k: &DMatrix<f64>, c: usize) -> Result<NystromFactor> {
    best_rank_factor(k, c)
}

/// `[K² − K Π K]^{1/2}` for the projector onto the factor's column space,
/// with the smallest eigenvalue seen before clamping.
pub fn residual_sqrt(k: &DMatrix<f64>, factor: &NystromFactor) -> Result<(DMatrix<f64>, f64)> {
    let q = column_basis(factor.features(), 1e-12);
    let kq = k * &q;
    let m = symmetrize(&(k * k - &kq * kq.transpose()));
    let eig = SymEigen::new(&m)?;
    let min = eig.values.iter().copied().fold(f64::INFINITY, f64::min);
    let n = k.nrows();
    // Eigenvalues at roundoff level carry no residual.
    let floor = n as f64 * f64::EPSILON * k.norm_squared();
    let mut out = DMatrix::zeros(n, n);
    for j in 0..n {
        let v = eig.values[j];
        if v > floor {
            let u = eig.vectors.column(j);
            out += (u * u.transpose()) * v.sqrt();
        }
    }
    Ok((symmetrize(&out), min))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub p: NormOrder,
    /// Landmark count of the factor.
    pub c: usize,
    /// `σ_{C+1}(K)` when C < N.
    pub sigma_next: Option<f64>,
    pub operator_term: f64,
    /// Operator term through the explicit square root and `K†`.
    pub operator_term_direct: f64,
    /// Largest per-alternative `‖ℵ*_i‖_p`.
    pub param_norm: f64,
    /// `(2/(Nλ))‖1‖_p`.
    pub param_bound: f64,
    pub bound: f64,
    pub observed_error: Option<f64>,
    pub projection_residual: Option<f64>,
    /// Smallest eigenvalue of `K² − KΠK` before clamping.
    pub residual_min_eigenvalue: f64,
}

impl BoundReport {
    pub fn holds(&self) -> bool {
        self.observed_error.is_none_or(|e| e <= self.bound * (1.0 + 1e-6))
    }
}

fn column_norm_max(a: &DMatrix<f64>, p: NormOrder) -> f64 {
    a.column_iter()
        .map(|c| p_norm(c.iter().copied(), p))
        .fold(0.0, f64::max)
}

/// Shared state for bound reports over many factors of one kernel matrix.
pub struct BoundContext {
    pub k: DMatrix<f64>,
    pub y: DMatrix<f64>,
    pub lambda: f64,
    pub eig: SymEigen,
    pub rank: usize,
    pub solution: RestrictedSolution,
    pub options: RestrictedOptions,
    k_pinv: DMatrix<f64>,
}

impl BoundContext {
    pub fn new(k: &DMatrix<f64>, y: &DMatrix<f64>, lambda: f64, options: RestrictedOptions) -> Result<Self> {
        if k.nrows() > DENSE_LIMIT {
            return Err(KlrError::Size {
                what: "bound report N",
                actual: k.nrows(),
                limit: DENSE_LIMIT,
            });
        }
        if !(lambda > 0.0) {
            return arg_err(format!("bounds need lambda > 0, got {lambda}"));
        }
        let eig = SymEigen::new(k)?;
        let rank = eig.rank(options.threshold);
        let (k_pinv, _) = pinv_sym(k, options.threshold)?;
        let solution = restricted_solve_with(k, y, lambda, &options)?;
        Ok(Self {
            k: k.clone(),
            y: y.clone(),
            lambda,
            eig,
            rank,
            solution,
            options,
            k_pinv,
        })
    }

    /// Eigenvalues of K, descending.
    pub fn sigma(&self) -> &DVector<f64> {
        &self.eig.values
    }

    pub fn report(&self, factor: &NystromFactor, p: NormOrder) -> Result<BoundReport> {
        let n = self.k.nrows();
        if factor.n() != n {
            return arg_err("factor size differs from K");
        }
        let q = column_basis(factor.features(), 1e-12);
        let u_r = self.eig.leading_vectors(self.rank);
        // Singular values of [K²−KΠK]^{1/2}K† coincide with those of (I−Π)U_R.
        let resid = &u_r - &q * q.tr_mul(&u_r);
        let operator_term = schatten_norm(&resid, p);
        let (root, min_eig) = residual_sqrt(&self.k, factor)?;
        let operator_term_direct = schatten_norm(&(root * &self.k_pinv), p);

        let aleph = &self.solution.aleph;
        let param_norm = column_norm_max(aleph, p);
        let ones = match p {
            NormOrder::One => n as f64,
            NormOrder::Two => (n as f64).sqrt(),
            NormOrder::Inf => 1.0,
        };
        let param_bound = 2.0 / (n as f64 * self.lambda) * ones;

        let approx = restricted_solve_factor(factor, &self.y, self.lambda, &self.options)?;
        let observed = column_norm_max(&(aleph - &approx.aleph), p);
        let projected = &q * q.tr_mul(aleph);
        let projection_residual = column_norm_max(&(&approx.aleph - projected), p);
        let c = factor.n_columns();
        Ok(BoundReport {
            p,
            c,
            sigma_next: (c < n).then(|| self.eig.values[c].max(0.0)),
            operator_term,
            operator_term_direct,
            param_norm,
            param_bound,
            bound: param_norm * operator_term,
            observed_error: Some(observed),
            projection_residual: Some(projection_residual),
            residual_min_eigenvalue: min_eig,
        })
    }
}

pub fn bound_report(
    k: &DMatrix<f64>,
    factor: &NystromFactor,
    y: &DMatrix<f64>,
    lambda: f64,
    p: NormOrder,
) -> Result<BoundReport> {
    BoundContext::new(k, y, lambda, RestrictedOptions::default())?.report(factor, p)
}

pub fn write_bound_csv<W: Write>(reports: &[BoundReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "C",
        "sigma_{C+1}",
        "operator_term",
        "bound",
        "observed_error",
        "projection_residual",
    ])?;
    let opt = |v: Option<f64>| v.map_or_else(String::new, |x| format!("{x:.10e}"));
    for r in reports {
        w.write_record([
            r.c.to_string(),
            opt(r.sigma_next),
            format!("{:.10e}", r.operator_term),
            format!("{:.10e}", r.bound),
            opt(r.observed_error),
            opt(r.projection_residual),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_spectrum_csv<W: Write>(report: &SpectrumReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["j", "sigma_j", "fit"])?;
    for (j, s) in report.singular_values.iter().enumerate() {
        let fit = if j >= 1 { format!("{:.10e}", report.predicted(j)) } else { String::new() };
        w.write_record([(j + 1).to_string(), format!("{s:.10e}"), fit])?;
    }
    w.flush()?;
    Ok(())
}
