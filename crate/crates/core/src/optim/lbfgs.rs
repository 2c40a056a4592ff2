use std::collections::VecDeque;

use nalgebra::DMatrix;

use super::{max_norm, OptConfig, Recorder, Termination};
use crate::error::{arg_err, Result};

const ARMIJO_C1: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 60;
const CURVATURE_EPS: f64 = 1e-12;
const ROUNDOFF: f64 = 8.0 * f64::EPSILON;

#[derive(Debug, Clone)]
pub struct CurvaturePair {
    pub s: DMatrix<f64>,
    pub y: DMatrix<f64>,
    pub rho: f64,
}

impl CurvaturePair {
    /// `None` when `sᵀy` is too small relative to `‖s‖‖y‖`.
    pub fn new(s: DMatrix<f64>, y: DMatrix<f64>) -> Option<Self> {
        let sy = s.dot(&y);
        if sy > CURVATURE_EPS * s.norm() * y.norm() {
            Some(Self { s, y, rho: 1.0 / sy })
        } else {
            None
        }
    }
}

/// Two-loop recursion: the inverse-Hessian estimate applied to `grad`,
/// with `H₀ = γI`. `history` is ordered oldest first.
pub fn two_loop(grad: &DMatrix<f64>, history: &[CurvaturePair], gamma: f64) -> DMatrix<f64> {
    let mut q = grad.clone();
    let mut a = vec![0.0; history.len()];
    for (i, p) in history.iter().enumerate().rev() {
        a[i] = p.rho * p.s.dot(&q);
        q -= &p.y * a[i];
    }
    let mut r = q * gamma;
    for (i, p) in history.iter().enumerate() {
        let b = p.rho * p.y.dot(&r);
        r += &p.s * (a[i] - b);
    }
    r
}

pub(super) fn minimize_lbfgs<F>(f: &mut F, x0: &DMatrix<f64>, config: &OptConfig) -> Result<(DMatrix<f64>, super::OptTrace)>
where
    F: FnMut(&DMatrix<f64>) -> Result<(f64, DMatrix<f64>)>,
{
    let mut rec = Recorder::new(config.method, config.log_every_iter);
    let mut x = x0.clone();
    let (mut loss, mut grad) = f(&x)?;
    if grad.shape() != x.shape() {
        return arg_err("gradient shape differs from the parameters");
    }
    rec.record(0, loss, max_norm(&grad), 0.0, &x)?;
    let mut history: VecDeque<CurvaturePair> = VecDeque::with_capacity(config.history);
    let mut termination = Termination::MaxIterations;

    for k in 0..config.max_iters {
        if max_norm(&grad) <= config.tol {
            termination = Termination::GradientTolerance;
            break;
        }
        let gamma = history
            .back()
            .map_or(1.0, |p| p.s.dot(&p.y) / p.y.norm_squared());
        let mut dir = -two_loop(&grad, history.make_contiguous(), gamma);
        let mut slope = grad.dot(&dir);
        if !(slope < 0.0) {
            history.clear();
            dir = -&grad;
            slope = -grad.norm_squared();
        }

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let trial = &x + &dir * step;
            let (tl, tg) = f(&trial)?;
            let armijo = tl <= loss + ARMIJO_C1 * step * slope;
            // Near the optimum loss differences fall below roundoff; accept a
            // flat trial if it reduces the gradient.
            let flat = (tl - loss).abs() <= ROUNDOFF * loss.abs().max(1.0) && max_norm(&tg) < max_norm(&grad);
            if tl.is_finite() && (armijo || flat) {
                accepted = Some((trial, tl, tg));
                break;
            }
            step *= 0.5;
        }
        let Some((xn, ln, gn)) = accepted else {
            termination = Termination::LineSearchFailed;
            break;
        };

        if config.history > 0 {
            if let Some(pair) = CurvaturePair::new(&xn - &x, &gn - &grad) {
                if history.len() == config.history {
                    history.pop_front();
                }
                history.push_back(pair);
            }
        }
        let rel = (loss - ln).abs() / loss.abs().max(ln.abs()).max(1.0);
        x = xn;
        loss = ln;
        grad = gn;
        rec.record(k + 1, loss, max_norm(&grad), step, &x)?;
        if config.rel_tol > 0.0 && rel <= config.rel_tol {
            termination = Termination::LossTolerance;
            break;
        }
    }
    if termination == Termination::MaxIterations && max_norm(&grad) <= config.tol {
        termination = Termination::GradientTolerance;
    }
    Ok(rec.finish(termination))
}
