//! Multinomial kernel logistic regression objective.
//!
//! The training objective is the regularized negative log-likelihood
//!
//! ```text
//! L(α) = −(1/N) Σ_n Σ_i y_ni log p_ni + (λ/2) Σ_i α_iᵀ K α_i,
//! ```
//!
//! with `p_n = softmax((Kα)_n)`. Besides the dense path there is a Nyström
//! path over `K̂ = C W† Cᵀ` and a reduced path over `θ = Φᵀα`.

mod model;
mod restricted;

use nalgebra::DMatrix;

use crate::error::{arg_err, KlrError, Result};
use crate::nystrom::NystromFactor;

pub use model::{ModelMetadata, ParamForm, ParameterState, TrainedModel, MODEL_FORMAT};
pub use restricted::{
    restricted_solve, restricted_solve_factor, restricted_solve_with, RestrictedOptions, RestrictedSolution,
};

/// Lower bound applied to probabilities before taking logs.
pub const PROB_FLOOR: f64 = 1e-300;

/// Row-wise class probabilities (N×I).
#[derive(Debug, Clone, PartialEq)]
pub struct ProbMatrix {
    pub values: DMatrix<f64>,
}

impl ProbMatrix {
    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    /// Most probable class per row; ties go to the lowest index.
    pub fn argmax(&self) -> Vec<usize> {
        self.values
            .row_iter()
            .map(|row| {
                let mut best = 0;
                for j in 1..row.len() {
                    if row[j] > row[best] {
                        best = j;
                    }
                }
                best
            })
            .collect()
    }
}

/// Per-row log-softmax with max subtraction.
fn log_softmax(f: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if f.iter().any(|v| !v.is_finite()) {
        return Err(KlrError::Numeric("latent matrix has non-finite entries".into()));
    }
    let mut out = f.clone();
    for mut row in out.row_iter_mut() {
        let mx = row.max();
        let lse = mx + row.iter().map(|v| (v - mx).exp()).sum::<f64>().ln();
        row.apply(|v| *v -= lse);
    }
    Ok(out)
}

pub fn probabilities(f: &DMatrix<f64>) -> Result<ProbMatrix> {
    let values = log_softmax(f)?.map(f64::exp);
    Ok(ProbMatrix { values })
}

/// `−(1/N) Σ y log p` and `P − Y` for latents `f`.
fn nll_and_residual(f: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<(f64, DMatrix<f64>)> {
    if f.shape() != y.shape() {
        return arg_err(format!(
            "latent shape {:?} differs from label shape {:?}",
            f.shape(),
            y.shape()
        ));
    }
    let logp = log_softmax(f)?;
    let n = f.nrows() as f64;
    let mut nll = 0.0;
    for (lp, yv) in logp.iter().zip(y.iter()) {
        if *yv != 0.0 {
            nll -= yv * lp.max(PROB_FLOOR.ln());
        }
    }
    let resid = logp.map(f64::exp) - y;
    Ok((nll / n, resid))
}

fn check_square(k: &DMatrix<f64>, alpha: &DMatrix<f64>) -> Result<()> {
    if !k.is_square() || k.nrows() != alpha.nrows() {
        return arg_err(format!(
            "K is {}x{} but alpha has {} rows",
            k.nrows(),
            k.ncols(),
            alpha.nrows()
        ));
    }
    Ok(())
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return arg_err(format!("lambda must be >= 0, got {lambda}"));
    }
    Ok(())
}

/// Dense loss and gradient sharing a single `Kα` product.
pub fn loss_grad_full(k: &DMatrix<f64>, alpha: &DMatrix<f64>, y: &DMatrix<f64>, lambda: f64) -> Result<(f64, DMatrix<f64>)> {
    check_square(k, alpha)?;
    check_lambda(lambda)?;
    let f = k * alpha;
    let (nll, resid) = nll_and_residual(&f, y)?;
    let n = k.nrows() as f64;
    let loss = nll + 0.5 * lambda * alpha.dot(&f);
    let grad = k * (alpha * (n * lambda) + resid) / n;
    Ok((loss, grad))
}

pub fn loss_full(k: &DMatrix<f64>, alpha: &DMatrix<f64>, y: &DMatrix<f64>, lambda: f64) -> Result<f64> {
    check_square(k, alpha)?;
    check_lambda(lambda)?;
    let f = k * alpha;
    let (nll, _) = nll_and_residual(&f, y)?;
    Ok(nll + 0.5 * lambda * alpha.dot(&f))
}

/// `(1/N) K (Nλα + p − Y)`.
pub fn grad_full(k: &DMatrix<f64>, alpha: &DMatrix<f64>, y: &DMatrix<f64>, lambda: f64) -> Result<DMatrix<f64>> {
    Ok(loss_grad_full(k, alpha, y, lambda)?.1)
}

/// Loss and gradient in α with `K̂` applied through the factor.
pub fn loss_grad_nystrom(
    factor: &NystromFactor,
    alpha: &DMatrix<f64>,
    y: &DMatrix<f64>,
    lambda: f64,
) -> Result<(f64, DMatrix<f64>)> {
    check_lambda(lambda)?;
    let f = factor.apply(alpha)?;
    let (nll, resid) = nll_and_residual(&f, y)?;
    let n = alpha.nrows() as f64;
    let loss = nll + 0.5 * lambda * alpha.dot(&f);
    let grad = factor.apply(&(alpha * (n * lambda) + resid))? / n;
    Ok((loss, grad))
}

/// As [`loss_grad_nystrom`] with the last alternative's coefficients held
/// at zero: the gradient's last column is dropped.
pub fn loss_grad_nystrom_pinned(
    factor: &NystromFactor,
    alpha: &DMatrix<f64>,
    y: &DMatrix<f64>,
    lambda: f64,
) -> Result<(f64, DMatrix<f64>)> {
    let (loss, mut grad) = loss_grad_nystrom(factor, alpha, y, lambda)?;
    if let Some(last) = grad.ncols().checked_sub(1) {
        grad.column_mut(last).fill(0.0);
    }
    Ok((loss, grad))
}

/// Linear-in-features objective: latents `Φθ`, penalty `(λ/2)‖θ‖²_F`.
pub fn loss_grad_features(
    phi: &DMatrix<f64>,
    theta: &DMatrix<f64>,
    y: &DMatrix<f64>,
    lambda: f64,
) -> Result<(f64, DMatrix<f64>)> {
    check_lambda(lambda)?;
    if phi.ncols() != theta.nrows() {
        return arg_err(format!(
            "feature map has {} columns but theta has {} rows",
            phi.ncols(),
            theta.nrows()
        ));
    }
    let f = phi * theta;
    let (nll, resid) = nll_and_residual(&f, y)?;
    let n = phi.nrows() as f64;
    let loss = nll + 0.5 * lambda * theta.norm_squared();
    let grad = phi.tr_mul(&resid) / n + theta * lambda;
    Ok((loss, grad))
}

/// Reduced-parameter objective over the factor's feature map.
pub fn loss_grad_reduced(
    factor: &NystromFactor,
    theta: &DMatrix<f64>,
    y: &DMatrix<f64>,
    lambda: f64,
) -> Result<(f64, DMatrix<f64>)> {
    loss_grad_features(factor.features(), theta, y, lambda)
}

/// `‖K(Nλα + p − Y)‖_∞` with `p = softmax(Kα)`.
pub fn kkt_residual(k: &DMatrix<f64>, alpha: &DMatrix<f64>, y: &DMatrix<f64>, lambda: f64) -> Result<f64> {
    let (_, g) = loss_grad_full(k, alpha, y, lambda)?;
    Ok(g.amax() * k.nrows() as f64)
}

/// The same residual with `K̂` in place of `K`.
pub fn kkt_residual_factor(factor: &NystromFactor, alpha: &DMatrix<f64>, y: &DMatrix<f64>, lambda: f64) -> Result<f64> {
    let (_, g) = loss_grad_nystrom(factor, alpha, y, lambda)?;
    Ok(g.amax() * factor.n() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{gram, KernelConfig};
    use crate::landmarks::select_uniform;
    use crate::nystrom::{build, DEFAULT_PINV_THRESHOLD};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn instance(n: usize, i: usize, seed: u64) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(n, 3, |_, _| rng.random_range(-1.5..1.5));
        let k = gram(&x, &x, &KernelConfig::rbf(0.5).unwrap()).unwrap();
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..i)).collect();
        let y = crate::data::one_hot(&labels, i);
        (x, k, y)
    }

    #[test]
    fn softmax_cases() {
        let p = probabilities(&DMatrix::zeros(1, 4)).unwrap();
        assert!(p.values.iter().all(|&v| (v - 0.25).abs() < 1e-15));
        let p = probabilities(&DMatrix::from_row_slice(1, 2, &[2f64.ln(), 0.0])).unwrap();
        assert!((p.values[(0, 0)] - 2.0 / 3.0).abs() < 1e-15);
        assert!((p.values[(0, 1)] - 1.0 / 3.0).abs() < 1e-15);
        let f = DMatrix::from_row_slice(1, 3, &[0.5, -1.0, 2.0]);
        let shifted = f.add_scalar(1000.0);
        let a = probabilities(&f).unwrap().values;
        let b = probabilities(&shifted).unwrap().values;
        assert!((a - b).amax() < 1e-12);
        assert!(probabilities(&DMatrix::from_element(1, 2, f64::NAN)).is_err());
    }

    #[test]
    fn argmax_tie_break() {
        let p = ProbMatrix {
            values: DMatrix::from_row_slice(2, 3, &[0.4, 0.4, 0.2, 0.2, 0.3, 0.5]),
        };
        assert_eq!(p.argmax(), vec![0, 2]);
    }

    #[test]
    fn loss_at_origin_is_log_classes() {
        let (_, k, y) = instance(12, 4, 1);
        let l = loss_full(&k, &DMatrix::zeros(12, 4), &y, 0.3).unwrap();
        assert!((l - 4f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn single_sample_loss() {
        let k = DMatrix::from_element(1, 1, 1.0);
        let alpha = DMatrix::from_row_slice(1, 2, &[9f64.ln(), 0.0]);
        let y = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let l = loss_full(&k, &alpha, &y, 0.0).unwrap();
        assert!((l + 0.9f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn loss_matches_double_loop() {
        let (_, k, y) = instance(9, 3, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let alpha = DMatrix::from_fn(9, 3, |_, _| rng.random_range(-1.0..1.0));
        let lambda = 0.05;
        let mut nll = 0.0;
        let mut pen = 0.0;
        for n in 0..9 {
            let f: Vec<f64> = (0..3).map(|i| (0..9).map(|m| k[(n, m)] * alpha[(m, i)]).sum()).collect();
            let z: f64 = f.iter().map(|v| v.exp()).sum();
            for i in 0..3 {
                nll -= y[(n, i)] * (f[i].exp() / z).ln();
            }
        }
        for i in 0..3 {
            for a in 0..9 {
                for b in 0..9 {
                    pen += alpha[(a, i)] * k[(a, b)] * alpha[(b, i)];
                }
            }
        }
        let oracle = nll / 9.0 + 0.5 * lambda * pen;
        assert!((loss_full(&k, &alpha, &y, lambda).unwrap() - oracle).abs() < 1e-12);
    }

    #[test]
    fn kronecker_form_matches() {
        let (_, k, y) = instance(10, 3, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let alpha = DMatrix::from_fn(10, 3, |_, _| rng.random_range(-1.0..1.0));
        let lambda = 0.01;
        let g = grad_full(&k, &alpha, &y, lambda).unwrap();
        let p = probabilities(&(&k * &alpha)).unwrap().values;
        // Per-sample terms k_n ⊗ (p_n − y_n) plus the penalty column-wise.
        let mut oracle = &k * &alpha * lambda;
        for n in 0..10 {
            for i in 0..3 {
                let r = p[(n, i)] - y[(n, i)];
                for m in 0..10 {
                    oracle[(m, i)] += k[(m, n)] * r / 10.0;
                }
            }
        }
        assert!((g - oracle).amax() < 1e-12);
    }

    fn fd_check<F: Fn(&DMatrix<f64>) -> (f64, DMatrix<f64>)>(f: F, x: &DMatrix<f64>) -> f64 {
        let (_, g) = f(x);
        let h = 1e-6;
        let mut worst: f64 = 0.0;
        for idx in 0..x.len() {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[idx] += h;
            xm[idx] -= h;
            let fd = (f(&xp).0 - f(&xm).0) / (2.0 * h);
            let denom = g[idx].abs().max(fd.abs()).max(1e-6);
            worst = worst.max((fd - g[idx]).abs() / denom);
        }
        worst
    }

    #[test]
    fn gradients_match_finite_differences() {
        let (x, k, y) = instance(20, 3, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let alpha = DMatrix::from_fn(20, 3, |_, _| rng.random_range(-0.5..0.5));
        let err = fd_check(|a| loss_grad_full(&k, a, &y, 0.01).unwrap(), &alpha);
        assert!(err < 1e-5, "dense {err}");

        let factor = build(&x, &select_uniform(20, 5, 1).unwrap(), &KernelConfig::rbf(0.5).unwrap(), DEFAULT_PINV_THRESHOLD).unwrap();
        let err = fd_check(|a| loss_grad_nystrom(&factor, a, &y, 0.01).unwrap(), &alpha);
        assert!(err < 1e-5, "nystrom {err}");

        let theta = DMatrix::from_fn(factor.retained_rank, 3, |_, _| rng.random_range(-0.5..0.5));
        let err = fd_check(|t| loss_grad_reduced(&factor, t, &y, 0.01).unwrap(), &theta);
        assert!(err < 1e-5, "reduced {err}");
    }

    #[test]
    fn kkt_is_n_times_gradient() {
        let (_, k, y) = instance(15, 2, 8);
        let alpha = DMatrix::zeros(15, 2);
        let g = grad_full(&k, &alpha, &y, 0.1).unwrap();
        let r = kkt_residual(&k, &alpha, &y, 0.1).unwrap();
        assert_eq!(r, 15.0 * g.amax());
        if y.column(0).sum() != y.column(1).sum() {
            assert!(r > 0.0);
        }
    }

    #[test]
    fn pinned_gradient_keeps_last_column() {
        let (x, _, y) = instance(20, 3, 9);
        let factor = build(&x, &select_uniform(20, 6, 2).unwrap(), &KernelConfig::rbf(0.5).unwrap(), DEFAULT_PINV_THRESHOLD).unwrap();
        let (_, g) = loss_grad_nystrom_pinned(&factor, &DMatrix::zeros(20, 3), &y, 0.1).unwrap();
        assert!(g.column(2).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn shape_errors() {
        let (_, k, y) = instance(5, 2, 10);
        assert!(loss_full(&k, &DMatrix::zeros(4, 2), &y, 0.0).is_err());
        assert!(loss_full(&k, &DMatrix::zeros(5, 3), &y, 0.0).is_err());
        assert!(loss_full(&k, &DMatrix::zeros(5, 2), &y, -1.0).is_err());
    }
}
