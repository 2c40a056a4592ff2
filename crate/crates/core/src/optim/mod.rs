//! First-order line-search optimizers (GD, Momentum, Adam) and L-BFGS.
//!
//! Every method minimizes a loss/gradient callable over a parameter matrix.
//! The first-order methods take steps `x ← x − δ_t·d_t` with the time-decay
//! schedule `δ_t = δ₀/(1+γt)`.

mod lbfgs;

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{arg_err, KlrError, Result};

pub use lbfgs::{two_loop, CurvaturePair};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Gd,
    Momentum,
    Adam,
    Lbfgs,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Lbfgs, Method::Adam, Method::Momentum, Method::Gd];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Gd => "gd",
            Method::Momentum => "momentum",
            Method::Adam => "adam",
            Method::Lbfgs => "lbfgs",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = KlrError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "gd" | "gradient_descent" => Ok(Method::Gd),
            "momentum" => Ok(Method::Momentum),
            "adam" => Ok(Method::Adam),
            "lbfgs" | "l_bfgs" | "lbfgsb" | "l_bfgs_b" => Ok(Method::Lbfgs),
            other => arg_err(format!("unknown optimizer '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptConfig {
    pub method: Method,
    pub max_iters: usize,
    /// Stop once the gradient max-norm is at or below this.
    pub tol: f64,
    /// L-BFGS stops when the relative loss change falls to this.
    pub rel_tol: f64,
    pub delta0: f64,
    pub gamma: f64,
    pub beta: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub history: usize,
    /// Record every iteration; otherwise only the start and the end.
    pub log_every_iter: bool,
}

impl Default for OptConfig {
    fn default() -> Self {
        Self {
            method: Method::Lbfgs,
            max_iters: 10_000,
            tol: 1e-8,
            rel_tol: 1e-12,
            delta0: 0.1,
            gamma: 0.0,
            beta: 0.9,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            history: 10,
            log_every_iter: true,
        }
    }
}

impl OptConfig {
    pub fn new(method: Method) -> Self {
        Self {
            method,
            ..Self::default()
        }
    }

    /// A budget of zero iterations is allowed and evaluates only `x0`.
    pub fn validate(&self) -> Result<()> {
        if !(self.tol >= 0.0) || !(self.rel_tol >= 0.0) {
            return arg_err("tolerances must be >= 0");
        }
        if !(self.delta0 > 0.0 && self.delta0.is_finite()) {
            return arg_err(format!("delta0 must be positive, got {}", self.delta0));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return arg_err(format!("gamma must be >= 0, got {}", self.gamma));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return arg_err(format!("beta must lie in [0,1], got {}", self.beta));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return arg_err(format!("{name} must lie in [0,1), got {b}"));
            }
        }
        if !(self.epsilon > 0.0) {
            return arg_err(format!("epsilon must be positive, got {}", self.epsilon));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterRecord {
    pub iter: usize,
    pub loss: f64,
    pub grad_norm: f64,
    pub step: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    GradientTolerance,
    LossTolerance,
    MaxIterations,
    LineSearchFailed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptTrace {
    pub method: Method,
    pub records: Vec<IterRecord>,
    pub termination: Termination,
    pub iterations: usize,
    pub best_loss: f64,
}

impl OptTrace {
    fn new(method: Method) -> Self {
        Self {
            method,
            records: Vec::new(),
            termination: Termination::MaxIterations,
            iterations: 0,
            best_loss: f64::INFINITY,
        }
    }

    pub fn final_loss(&self) -> f64 {
        self.best_loss
    }

    pub fn seconds(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.seconds)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["iter", "loss", "grad_norm", "step", "seconds"])?;
        for r in &self.records {
            w.write_record([
                r.iter.to_string(),
                format!("{:.16e}", r.loss),
                format!("{:.16e}", r.grad_norm),
                format!("{:.16e}", r.step),
                format!("{:.6}", r.seconds),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

/// `δ₀ / (1 + γ t)`.
pub fn lr_schedule(t: usize, delta0: f64, gamma: f64) -> f64 {
    delta0 / (1.0 + gamma * t as f64)
}

fn same_shape(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<()> {
    if a.shape() != b.shape() {
        return arg_err(format!("shape mismatch: {:?} vs {:?}", a.shape(), b.shape()));
    }
    Ok(())
}

pub fn step_gd(grad: &DMatrix<f64>) -> DMatrix<f64> {
    grad.clone()
}

#[derive(Debug, Clone)]
pub struct MomentumState {
    pub g: DMatrix<f64>,
}

impl MomentumState {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            g: DMatrix::zeros(rows, cols),
        }
    }
}

/// `g ← β g + (1−β) ∇`; returns the new `g`.
pub fn step_momentum(state: &mut MomentumState, grad: &DMatrix<f64>, beta: f64) -> Result<DMatrix<f64>> {
    same_shape(&state.g, grad)?;
    state.g = &state.g * beta + grad * (1.0 - beta);
    Ok(state.g.clone())
}

#[derive(Debug, Clone)]
pub struct AdamState {
    pub m: DMatrix<f64>,
    pub v: DMatrix<f64>,
}

impl AdamState {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            m: DMatrix::zeros(rows, cols),
            v: DMatrix::zeros(rows, cols),
        }
    }
}

/// Adam update at step `t ≥ 1`; returns the bias-corrected direction.
pub fn step_adam(
    state: &mut AdamState,
    grad: &DMatrix<f64>,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    t: usize,
) -> Result<DMatrix<f64>> {
    same_shape(&state.m, grad)?;
    if t == 0 {
        return arg_err("Adam step counter starts at 1");
    }
    state.m = &state.m * beta1 + grad * (1.0 - beta1);
    state.v = &state.v * beta2 + grad.map(|g| g * g) * (1.0 - beta2);
    let scale = (1.0 - beta2.powi(t as i32)).sqrt() / (1.0 - beta1.powi(t as i32));
    Ok(state.m.zip_map(&state.v, |m, v| scale * m / (v.sqrt() + epsilon)))
}

pub(crate) fn max_norm(a: &DMatrix<f64>) -> f64 {
    a.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

/// Bookkeeping shared by every method.
pub(crate) struct Recorder {
    trace: OptTrace,
    start: Instant,
    log_every: bool,
    best: Option<(f64, DMatrix<f64>)>,
    pending: Option<IterRecord>,
}

impl Recorder {
    pub(crate) fn new(method: Method, log_every: bool) -> Self {
        Self {
            trace: OptTrace::new(method),
            start: Instant::now(),
            log_every,
            best: None,
            pending: None,
        }
    }

    pub(crate) fn record(&mut self, iter: usize, loss: f64, grad_norm: f64, step: f64, x: &DMatrix<f64>) -> Result<()> {
        let rec = IterRecord {
            iter,
            loss,
            grad_norm,
            step,
            seconds: self.start.elapsed().as_secs_f64(),
        };
        if !loss.is_finite() {
            self.trace.records.push(rec);
            self.trace.iterations = iter;
            return Err(KlrError::Diverged {
                iter,
                trace: Box::new(self.trace.clone()),
            });
        }
        if self.log_every || iter == 0 {
            self.trace.records.push(rec);
            self.pending = None;
        } else {
            self.pending = Some(rec);
        }
        self.trace.iterations = iter;
        if self.best.as_ref().is_none_or(|(b, _)| loss < *b) {
            self.best = Some((loss, x.clone()));
        }
        Ok(())
    }

    pub(crate) fn finish(mut self, termination: Termination) -> (DMatrix<f64>, OptTrace) {
        if let Some(rec) = self.pending.take() {
            self.trace.records.push(rec);
        }
        self.trace.termination = termination;
        let (loss, x) = self.best.expect("at least one evaluation recorded");
        self.trace.best_loss = loss;
        (x, self.trace)
    }
}

/// Minimize `f` from `x0`; returns the best iterate seen and the trace.
pub fn minimize<F>(mut f: F, x0: &DMatrix<f64>, config: &OptConfig) -> Result<(DMatrix<f64>, OptTrace)>
where
    F: FnMut(&DMatrix<f64>) -> Result<(f64, DMatrix<f64>)>,
{
    config.validate()?;
    if config.method == Method::Lbfgs {
        return lbfgs::minimize_lbfgs(&mut f, x0, config);
    }
    let (rows, cols) = x0.shape();
    let mut rec = Recorder::new(config.method, config.log_every_iter);
    let mut x = x0.clone();
    let (mut loss, mut grad) = f(&x)?;
    same_shape(&grad, &x)?;
    rec.record(0, loss, max_norm(&grad), 0.0, &x)?;
    let mut momentum = MomentumState::zeros(rows, cols);
    let mut adam = AdamState::zeros(rows, cols);
    let mut termination = Termination::MaxIterations;

    for t in 0..config.max_iters {
        if max_norm(&grad) <= config.tol {
            termination = Termination::GradientTolerance;
            break;
        }
        let dir = match config.method {
            Method::Gd => step_gd(&grad),
            Method::Momentum => step_momentum(&mut momentum, &grad, config.beta)?,
            Method::Adam => step_adam(&mut adam, &grad, config.beta1, config.beta2, config.epsilon, t + 1)?,
            Method::Lbfgs => unreachable!(),
        };
        let step = lr_schedule(t, config.delta0, config.gamma);
        x -= dir * step;
        (loss, grad) = f(&x)?;
        rec.record(t + 1, loss, max_norm(&grad), step, &x)?;
    }
    if termination == Termination::MaxIterations && max_norm(&grad) <= config.tol {
        termination = Termination::GradientTolerance;
    }
    Ok(rec.finish(termination))
}
