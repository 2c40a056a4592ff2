//! Ridge-leverage scores: exact, divide-and-conquer and recursive.

use log::warn;
use nalgebra::{Cholesky, DMatrix};
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{
    check_count, sample_columns, stream_rng, LandmarkSelection, Sketch, Strategy, PARTITION_STREAM,
    RECURSION_STREAM, SAMPLING_STREAM,
};
use crate::error::{arg_err, KlrError, Result};
use crate::kernel::{gram, KernelConfig};

const RLS_OVERSAMPLE: f64 = 2.0;

#[derive(Debug, Clone, PartialEq)]
pub struct LeverageScores {
    pub scores: Vec<f64>,
    pub mu: f64,
}

impl LeverageScores {
    /// Sampling probabilities `q_i = l_i / Σ l`.
    pub fn probabilities(&self) -> Result<Vec<f64>> {
        let total: f64 = self.scores.iter().sum();
        if !(total > 0.0) {
            return Err(KlrError::Numeric("leverage scores sum to zero".into()));
        }
        Ok(self.scores.iter().map(|l| l / total).collect())
    }

    pub fn sum(&self) -> f64 {
        self.scores.iter().sum()
    }
}

/// `μ = 10⁻⁶ · trace(K) / N`.
pub fn default_mu(trace: f64, n: usize) -> f64 {
    1e-6 * trace / n.max(1) as f64
}

fn check_mu(mu: f64) -> Result<()> {
    if !(mu > 0.0 && mu.is_finite()) {
        return arg_err(format!("ridge parameter mu must be positive, got {mu}"));
    }
    Ok(())
}

fn shifted_cholesky(k: &DMatrix<f64>, mu: f64) -> Result<Cholesky<f64, nalgebra::Dyn>> {
    let mut a = k.clone();
    for i in 0..a.nrows() {
        a[(i, i)] += mu;
    }
    Cholesky::new(a).ok_or_else(|| KlrError::Numeric("K + mu*I is not positive definite".into()))
}

/// Diagonal of `K (K + μI)⁻¹` through a Cholesky factorization of `K + μI`.
pub fn leverage_scores_exact(k: &DMatrix<f64>, mu: f64) -> Result<LeverageScores> {
    if !k.is_square() {
        return arg_err(format!("leverage scores need a square K, got {}x{}", k.nrows(), k.ncols()));
    }
    check_mu(mu)?;
    let chol = shifted_cholesky(k, mu)?;
    // (K+μI)⁻¹K and K(K+μI)⁻¹ share a diagonal.
    let z = chol.solve(k);
    let scores = (0..k.nrows()).map(|i| z[(i, i)].clamp(0.0, 1.0)).collect();
    Ok(LeverageScores { scores, mu })
}

fn columns_selection(strategy: Strategy, seed: u64, scores: &LeverageScores, c: usize) -> Result<LandmarkSelection> {
    let q = scores.probabilities()?;
    let mut rng = stream_rng(seed, SAMPLING_STREAM);
    let (indices, weights) = sample_columns(&q, c, &mut rng)?;
    Ok(LandmarkSelection {
        strategy,
        seed,
        sketch: Sketch::Columns { indices, weights },
    })
}

/// Sample from exact scores of the full Gram matrix (the one-block DAC case).
pub fn select_exact_leverage(
    x: &DMatrix<f64>,
    c: usize,
    mu: f64,
    config: &KernelConfig,
    seed: u64,
) -> Result<LandmarkSelection> {
    check_count(x.nrows(), c)?;
    let k = gram(x, x, config)?;
    let scores = leverage_scores_exact(&k, mu)?;
    columns_selection(Strategy::DacLeverage, seed, &scores, c)
}

/// Scores computed exactly inside disjoint random blocks of size `subset_size`.
pub fn dac_leverage_scores(
    x: &DMatrix<f64>,
    mu: f64,
    subset_size: usize,
    config: &KernelConfig,
    seed: u64,
) -> Result<LeverageScores> {
    let n = x.nrows();
    check_mu(mu)?;
    if subset_size < 1 {
        return arg_err("DAC subset size must be at least 1");
    }
    let mut order: Vec<usize> = (0..n).collect();
    if subset_size < n {
        order.shuffle(&mut stream_rng(seed, PARTITION_STREAM));
    }
    let blocks: Vec<&[usize]> = order.chunks(subset_size).collect();
    let per_block: Vec<Result<Vec<f64>>> = blocks
        .par_iter()
        .map(|rows| {
            let xb = x.select_rows(rows.iter());
            let kb = gram(&xb, &xb, config)?;
            Ok(leverage_scores_exact(&kb, mu)?.scores)
        })
        .collect();
    let mut scores = vec![0.0; n];
    for (rows, s) in blocks.iter().zip(per_block) {
        for (&r, v) in rows.iter().zip(s?) {
            scores[r] = v;
        }
    }
    Ok(LeverageScores { scores, mu })
}

pub fn select_dac_leverage(
    x: &DMatrix<f64>,
    c: usize,
    mu: f64,
    subset_size: usize,
    config: &KernelConfig,
    seed: u64,
) -> Result<LandmarkSelection> {
    check_count(x.nrows(), c)?;
    if subset_size < c {
        warn!("DAC subset size {subset_size} is smaller than C={c}");
    }
    let scores = dac_leverage_scores(x, mu, subset_size, config, seed)?;
    columns_selection(Strategy::DacLeverage, seed, &scores, c)
}

/// Approximate scores for the rows `idx` of `x` by recursive halving.
fn rls_recurse(
    x: &DMatrix<f64>,
    idx: &[usize],
    c: usize,
    mu: f64,
    config: &KernelConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>> {
    let xs = x.select_rows(idx.iter());
    if idx.len() <= 2 * c {
        let k = gram(&xs, &xs, config)?;
        return Ok(leverage_scores_exact(&k, mu)?.scores);
    }
    let mut shuffled = idx.to_vec();
    shuffled.shuffle(rng);
    let half = &shuffled[..idx.len().div_ceil(2)];
    let half_scores = LeverageScores {
        scores: rls_recurse(x, half, c, mu, config, rng)?,
        mu,
    };
    let size = level_sample_size(half_scores.sum(), c);
    let (local, weights) = if size >= half.len() {
        ((0..half.len()).collect(), vec![1.0; half.len()])
    } else {
        sample_columns(&half_scores.probabilities()?, size, rng)?
    };
    let landmarks: Vec<usize> = local.iter().map(|&j| half[j]).collect();

    // l̂_i = (K_ii − k_iS (SᵀKS + μI)⁻¹ k_Si) / μ with weighted landmarks S.
    let xl = x.select_rows(landmarks.iter());
    let mut ks = gram(&xs, &xl, config)?;
    let mut kll = gram(&xl, &xl, config)?;
    for (j, &w) in weights.iter().enumerate() {
        ks.column_mut(j).scale_mut(w);
        kll.column_mut(j).scale_mut(w);
        kll.row_mut(j).scale_mut(w);
    }
    let chol = shifted_cholesky(&kll, mu)?;
    let solved = chol.l().solve_lower_triangular(&ks.transpose()).ok_or_else(|| {
        KlrError::Numeric("triangular solve failed in recursive leverage scores".into())
    })?;
    let diag = gram_diagonal(&xs, config);
    Ok((0..idx.len())
        .map(|i| {
            let proj = solved.column(i).norm_squared();
            ((diag[i] - proj) / mu).clamp(0.0, 1.0)
        })
        .collect())
}

fn gram_diagonal(x: &DMatrix<f64>, _config: &KernelConfig) -> Vec<f64> {
    // exp(−c·0) for the RBF kernel.
    vec![1.0; x.nrows()]
}

/// Landmarks drawn at an intermediate level: a multiple of `d ln d` for the
/// estimated effective dimension `d`, and never fewer than `c`. A level
/// whose sample would cover it is used whole.
fn level_sample_size(d_eff: f64, c: usize) -> usize {
    ((RLS_OVERSAMPLE * d_eff * d_eff.max(1.0).ln()).ceil() as usize).max(c)
}

/// Recursive ridge-leverage approximation using halving down to 2C points.
pub fn rls_leverage_scores(
    x: &DMatrix<f64>,
    c: usize,
    mu: f64,
    config: &KernelConfig,
    seed: u64,
) -> Result<LeverageScores> {
    check_count(x.nrows(), c)?;
    check_mu(mu)?;
    let all: Vec<usize> = (0..x.nrows()).collect();
    let mut rng = stream_rng(seed, RECURSION_STREAM);
    Ok(LeverageScores {
        scores: rls_recurse(x, &all, c, mu, config, &mut rng)?,
        mu,
    })
}

pub fn select_rls_leverage(
    x: &DMatrix<f64>,
    c: usize,
    mu: f64,
    config: &KernelConfig,
    seed: u64,
) -> Result<LandmarkSelection> {
    let scores = rls_leverage_scores(x, c, mu, config, seed)?;
    columns_selection(Strategy::RlsLeverage, seed, &scores, c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn points(n: usize, m: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(n, m, |_, _| rng.random_range(-1.5..1.5))
    }

    #[test]
    fn identity_gives_half() {
        let s = leverage_scores_exact(&DMatrix::identity(6, 6), 1.0).unwrap();
        assert!(s.scores.iter().all(|&v| (v - 0.5).abs() < 1e-15));
    }

    #[test]
    fn huge_mu_vanishes() {
        let x = points(20, 2, 1);
        let k = gram(&x, &x, &KernelConfig::rbf(0.5).unwrap()).unwrap();
        let inf_norm = (0..20).map(|i| k.row(i).iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
        let s = leverage_scores_exact(&k, 1e6 * inf_norm).unwrap();
        assert!(s.scores.iter().all(|&v| v < 1e-4));
    }

    #[test]
    fn dense_inverse_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let b = DMatrix::from_fn(5, 5, |_, _| rng.random_range(-1.0..1.0));
        let k = &b * b.transpose();
        let mu = 0.1;
        let s = leverage_scores_exact(&k, mu).unwrap();
        let shifted = &k + DMatrix::identity(5, 5) * mu;
        let inv = shifted.try_inverse().unwrap();
        let oracle = &k * inv;
        for i in 0..5 {
            assert!((s.scores[i] - oracle[(i, i)]).abs() < 1e-12);
        }
    }

    #[test]
    fn non_square_rejected() {
        assert!(leverage_scores_exact(&DMatrix::zeros(3, 2), 1.0).is_err());
        assert!(leverage_scores_exact(&DMatrix::identity(2, 2), 0.0).is_err());
    }

    #[test]
    fn dac_blocks_match_per_block_oracle() {
        let x = points(6, 2, 2);
        let cfg = KernelConfig::rbf(0.8).unwrap();
        let mu = 0.05;
        let s = dac_leverage_scores(&x, mu, 3, &cfg, 17).unwrap();
        let mut order: Vec<usize> = (0..6).collect();
        order.shuffle(&mut stream_rng(17, PARTITION_STREAM));
        for block in order.chunks(3) {
            let xb = x.select_rows(block.iter());
            let kb = gram(&xb, &xb, &cfg).unwrap();
            let exact = leverage_scores_exact(&kb, mu).unwrap();
            for (pos, &r) in block.iter().enumerate() {
                assert!((s.scores[r] - exact.scores[pos]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn dac_single_block_is_exact() {
        let x = points(40, 3, 3);
        let cfg = KernelConfig::rbf(0.5).unwrap();
        let a = select_dac_leverage(&x, 8, 1e-3, 40, &cfg, 5).unwrap();
        let b = select_exact_leverage(&x, 8, 1e-3, &cfg, 5).unwrap();
        assert_eq!(a, b);
        let c = select_dac_leverage(&x, 8, 1e-3, 1000, &cfg, 5).unwrap();
        assert_eq!(a, c);
    }

    #[test]
    fn identical_points_uniform_within_block() {
        let x = DMatrix::from_element(9, 2, 0.5);
        let cfg = KernelConfig::rbf(1.0).unwrap();
        let s = dac_leverage_scores(&x, 0.1, 3, &cfg, 1).unwrap();
        let q = s.probabilities().unwrap();
        for v in &q {
            assert!((v - 1.0 / 9.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rls_base_case_equals_exact() {
        let x = points(12, 2, 6);
        let cfg = KernelConfig::rbf(0.5).unwrap();
        let a = select_rls_leverage(&x, 6, 1e-3, &cfg, 8).unwrap();
        let b = select_exact_leverage(&x, 6, 1e-3, &cfg, 8).unwrap();
        assert_eq!(a.sketch, b.sketch);
        assert_eq!(a.strategy, Strategy::RlsLeverage);
    }

    #[test]
    fn rls_with_all_points_reduces_to_exact_formula() {
        // With S = I the recursive estimator is algebraically exact.
        let x = points(15, 2, 9);
        let cfg = KernelConfig::rbf(0.6).unwrap();
        let k = gram(&x, &x, &cfg).unwrap();
        let mu = 0.01;
        let chol = shifted_cholesky(&k, mu).unwrap();
        let solved = chol.l().solve_lower_triangular(&k).unwrap();
        let exact = leverage_scores_exact(&k, mu).unwrap();
        for i in 0..15 {
            let v = (1.0 - solved.column(i).norm_squared()) / mu;
            assert!((v - exact.scores[i]).abs() < 1e-8, "{v} vs {}", exact.scores[i]);
        }
    }

    #[test]
    fn rls_deterministic() {
        let x = points(120, 3, 10);
        let cfg = KernelConfig::rbf(0.5).unwrap();
        let a = select_rls_leverage(&x, 10, 1e-2, &cfg, 3).unwrap();
        let b = select_rls_leverage(&x, 10, 1e-2, &cfg, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn scores_bounded_and_trace_identity() {
        let x = points(30, 2, 11);
        let k = gram(&x, &x, &KernelConfig::rbf(1.0).unwrap()).unwrap();
        let mu = 0.02;
        let s = leverage_scores_exact(&k, mu).unwrap();
        assert!(s.scores.iter().all(|&l| (0.0..=1.0).contains(&l)));
        // trace(K(K+μI)⁻¹) = Σ λ/(λ+μ)
        let eig = crate::linalg::SymEigen::new(&k).unwrap();
        let trace: f64 = eig.values.iter().map(|&l| l.max(0.0) / (l.max(0.0) + mu)).sum();
        assert!((s.sum() - trace).abs() < 1e-8);
        let q = s.probabilities().unwrap();
        assert!((q.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
