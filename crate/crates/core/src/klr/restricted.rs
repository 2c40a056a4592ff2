//! Unique minimizer of the objective over the column space `L(K)`.
//!
//! With `K = U Σ Uᵀ` restricted to the retained spectrum and `α = U Σ^{-1/2} β`,
//! the objective becomes `−(1/N) Σ y log softmax(UΣ^{1/2} β) + (λ/2)‖β‖²`,
//! which is strictly convex in β.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{loss_grad_features, probabilities};
use crate::error::{arg_err, KlrError, Result};
use crate::linalg::SymEigen;
use crate::nystrom::NystromFactor;
use crate::optim::{minimize, Method, OptConfig, OptTrace};

/// Largest N accepted by the dense solver.
pub const RESTRICTED_LIMIT: usize = 2000;

#[derive(Debug, Clone)]
pub struct RestrictedOptions {
    /// Gradient max-norm target in β coordinates.
    pub tol: f64,
    pub max_iters: usize,
    /// Relative eigenvalue cutoff defining the retained spectrum.
    pub threshold: f64,
    pub history: usize,
    /// Random start for β; `None` starts at zero.
    pub init_seed: Option<u64>,
}

impl Default for RestrictedOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iters: 10_000,
            threshold: 1e-10,
            history: 20,
            init_seed: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RestrictedSolution {
    /// N×I coefficients lying in `L(K)`.
    pub aleph: DMatrix<f64>,
    pub beta: DMatrix<f64>,
    pub loss: f64,
    pub rank: usize,
    pub trace: OptTrace,
}

fn solve_spectral(
    u: DMatrix<f64>,
    sigma: &[f64],
    y: &DMatrix<f64>,
    lambda: f64,
    opts: &RestrictedOptions,
) -> Result<RestrictedSolution> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return arg_err(format!("restricted solve needs lambda > 0, got {lambda}"));
    }
    if u.nrows() != y.nrows() {
        return arg_err("label rows differ from the kernel size");
    }
    let r = sigma.len();
    let mut b = u.clone();
    for (j, &s) in sigma.iter().enumerate() {
        b.column_mut(j).scale_mut(s.sqrt());
    }
    let classes = y.ncols();
    let beta0 = match opts.init_seed {
        Some(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            DMatrix::from_fn(r, classes, |_, _| rng.random_range(-1.0..1.0))
        }
        None => DMatrix::zeros(r, classes),
    };
    let cfg = OptConfig {
        tol: opts.tol,
        rel_tol: 0.0,
        max_iters: opts.max_iters,
        history: opts.history,
        log_every_iter: false,
        ..OptConfig::new(Method::Lbfgs)
    };
    let (beta, trace) = minimize(|t| loss_grad_features(&b, t, y, lambda), &beta0, &cfg)?;
    // ℵ = UΣ^{-1/2}β, except along eigenvalues below Nλ where the data term's
    // curvature is dominated by λ: there the stationarity form
    // −uᵀ(p − Y)/(Nλ) avoids dividing optimizer error by √σ.
    let p = probabilities(&(&b * &beta))?;
    let n = y.nrows() as f64;
    let stationary = u.tr_mul(&(p.values - y)) * (-1.0 / (n * lambda));
    let mut coef = beta.clone();
    for (j, &s) in sigma.iter().enumerate() {
        if s < n * lambda {
            coef.row_mut(j).copy_from(&stationary.row(j));
        } else {
            coef.row_mut(j).scale_mut(1.0 / s.sqrt());
        }
    }
    let aleph = &u * coef;
    Ok(RestrictedSolution {
        aleph,
        beta,
        loss: trace.final_loss(),
        rank: r,
        trace,
    })
}

pub fn restricted_solve_with(
    k: &DMatrix<f64>,
    y: &DMatrix<f64>,
    lambda: f64,
    opts: &RestrictedOptions,
) -> Result<RestrictedSolution> {
    if k.nrows() > RESTRICTED_LIMIT {
        return Err(KlrError::Size {
            what: "restricted solve N",
            actual: k.nrows(),
            limit: RESTRICTED_LIMIT,
        });
    }
    if !(lambda > 0.0) {
        return arg_err(format!("restricted solve needs lambda > 0, got {lambda}"));
    }
    let eig = SymEigen::new(k)?;
    let r = eig.rank(opts.threshold);
    if r == 0 {
        return Err(KlrError::Numeric("kernel matrix has no positive eigenvalues".into()));
    }
    let sigma: Vec<f64> = eig.values.iter().take(r).copied().collect();
    solve_spectral(eig.leading_vectors(r), &sigma, y, lambda, opts)
}

/// `ℵ*` for a dense Gram matrix, solved to gradient max-norm `tol`.
pub fn restricted_solve(k: &DMatrix<f64>, y: &DMatrix<f64>, lambda: f64, tol: f64) -> Result<DMatrix<f64>> {
    let opts = RestrictedOptions {
        tol,
        ..RestrictedOptions::default()
    };
    Ok(restricted_solve_with(k, y, lambda, &opts)?.aleph)
}

/// Restricted solution for `K̂ = ΦΦᵀ`, with the spectrum taken from the
/// thin SVD of `Φ`.
pub fn restricted_solve_factor(
    factor: &NystromFactor,
    y: &DMatrix<f64>,
    lambda: f64,
    opts: &RestrictedOptions,
) -> Result<RestrictedSolution> {
    let phi = factor.features();
    let svd = phi.clone().svd(true, false);
    let u_all = svd.u.ok_or_else(|| KlrError::Numeric("SVD of the feature map failed".into()))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let s_max = svd.singular_values[order[0]].powi(2);
    let keep: Vec<usize> = order
        .into_iter()
        .filter(|&j| svd.singular_values[j].powi(2) > opts.threshold * s_max)
        .collect();
    if keep.is_empty() {
        return Err(KlrError::DegenerateSketch);
    }
    let mut u = DMatrix::zeros(phi.nrows(), keep.len());
    let mut sigma = Vec::with_capacity(keep.len());
    for (dst, &src) in keep.iter().enumerate() {
        u.set_column(dst, &u_all.column(src));
        sigma.push(svd.singular_values[src].powi(2));
    }
    solve_spectral(u, &sigma, y, lambda, opts)
}
