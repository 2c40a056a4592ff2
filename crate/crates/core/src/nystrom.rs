//! Nyström factor `K̂ = C W† Cᵀ` with a feature map `Φ`, `ΦΦᵀ = K̂`.

use nalgebra::{DMatrix, DVector};

use crate::error::{arg_err, KlrError, Result};
use crate::kernel::{gram, KernelConfig};
use crate::landmarks::{LandmarkSelection, Sketch};
use crate::linalg::{symmetrize, SymEigen};

/// Relative eigenvalue cutoff used for `W†`.
pub const DEFAULT_PINV_THRESHOLD: f64 = 1e-10;
/// Largest N for which dense N×N products are materialized.
pub const MATERIALIZE_LIMIT: usize = 5000;

#[derive(Debug, Clone)]
pub struct NystromFactor {
    /// N×C sketch `K·P`.
    pub c_matrix: DMatrix<f64>,
    /// C×C pseudoinverse of `W = Pᵀ K P`.
    pub w_pinv: DMatrix<f64>,
    /// N×r feature map over the retained eigenpairs of W.
    pub feature_map: DMatrix<f64>,
    /// C×r map `U_W Λ_W^{-1/2}` taking weighted kernel rows to features.
    pub projection: DMatrix<f64>,
    pub retained_rank: usize,
    pub threshold: f64,
    /// Per-column weights applied to the raw kernel block.
    pub weights: Vec<f64>,
}

impl NystromFactor {
    /// Build from a sketch `C` and its core `W` (both already weighted).
    pub fn from_sketch(c_matrix: DMatrix<f64>, w: &DMatrix<f64>, threshold: f64, weights: Vec<f64>) -> Result<Self> {
        if threshold < 0.0 || !threshold.is_finite() {
            return arg_err(format!("pseudoinverse threshold must be >= 0, got {threshold}"));
        }
        if w.nrows() != c_matrix.ncols() || !w.is_square() {
            return arg_err("W must be C×C for an N×C sketch");
        }
        let eig = SymEigen::new(w)?;
        let lmax = eig.max_value();
        let r = if lmax > 0.0 { eig.rank(threshold) } else { 0 };
        if r == 0 {
            return Err(KlrError::DegenerateSketch);
        }
        let cdim = w.nrows();
        let mut projection = DMatrix::zeros(cdim, r);
        let mut w_pinv = DMatrix::zeros(cdim, cdim);
        for j in 0..r {
            let u = eig.vectors.column(j);
            let lam = eig.values[j];
            projection.set_column(j, &(u / lam.sqrt()));
            w_pinv += (u * u.transpose()) / lam;
        }
        let w_pinv = symmetrize(&w_pinv);
        let feature_map = &c_matrix * &projection;
        Ok(Self {
            c_matrix,
            w_pinv,
            feature_map,
            projection,
            retained_rank: r,
            threshold,
            weights,
        })
    }

    pub fn n(&self) -> usize {
        self.c_matrix.nrows()
    }

    pub fn n_columns(&self) -> usize {
        self.c_matrix.ncols()
    }

    /// `K̂ α` evaluated as `C (W† (Cᵀ α))`.
    pub fn apply(&self, alpha: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if alpha.nrows() != self.n() {
            return arg_err(format!(
                "apply expects {} rows, got {}",
                self.n(),
                alpha.nrows()
            ));
        }
        let ct_a = self.c_matrix.tr_mul(alpha);
        let mid = &self.w_pinv * ct_a;
        Ok(&self.c_matrix * mid)
    }

    /// Dense `K̂`; refuses N above [`MATERIALIZE_LIMIT`].
    pub fn materialize(&self) -> Result<DMatrix<f64>> {
        if self.n() > MATERIALIZE_LIMIT {
            return Err(KlrError::Size {
                what: "materialized Nyström matrix N",
                actual: self.n(),
                limit: MATERIALIZE_LIMIT,
            });
        }
        Ok(symmetrize(&(&self.feature_map * self.feature_map.transpose())))
    }

    /// The N×r feature map `Φ`.
    pub fn features(&self) -> &DMatrix<f64> {
        &self.feature_map
    }

    /// Feature rows for new points given their raw kernel block against the
    /// landmarks (N'×C, unweighted).
    pub fn features_from_kernel_block(&self, block: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if block.ncols() != self.weights.len() {
            return arg_err("kernel block width differs from landmark count");
        }
        let mut b = block.clone();
        for (j, &w) in self.weights.iter().enumerate() {
            b.column_mut(j).scale_mut(w);
        }
        Ok(b * &self.projection)
    }
}

/// Nyström factor for a landmark selection over the rows of `x`.
pub fn build(
    x: &DMatrix<f64>,
    selection: &LandmarkSelection,
    config: &KernelConfig,
    threshold: f64,
) -> Result<NystromFactor> {
    let landmarks = selection.landmark_rows(x)?;
    let mut c_matrix = gram(x, &landmarks, config)?;
    let mut w = gram(&landmarks, &landmarks, config)?;
    let weights = selection.weights();
    match &selection.sketch {
        Sketch::Columns { weights: wts, .. } => {
            if let Some(bad) = wts.iter().find(|&&v| !(v > 0.0 && v.is_finite())) {
                return arg_err(format!("landmark weights must be positive, found {bad}"));
            }
            for (j, &wj) in wts.iter().enumerate() {
                c_matrix.column_mut(j).scale_mut(wj);
                w.column_mut(j).scale_mut(wj);
                w.row_mut(j).scale_mut(wj);
            }
        }
        Sketch::Points { .. } => {
            let cdim = w.nrows();
            let eig = SymEigen::new(&w)?;
            if 2 * eig.rank(threshold) < cdim {
                let bump = 1e-10 * w.trace() / cdim as f64;
                for i in 0..cdim {
                    w[(i, i)] += bump;
                }
            }
        }
    }
    NystromFactor::from_sketch(c_matrix, &w, threshold, weights)
}

/// Factor holding the best rank-`c` approximation of a PSD `k`, obtained
/// with the eigenvector sketch `P = U_C diag(1/σ)`.
pub fn best_rank_factor(k: &DMatrix<f64>, c: usize) -> Result<NystromFactor> {
    if !k.is_square() {
        return arg_err("best-rank sketch needs a square K");
    }
    if k.nrows() > MATERIALIZE_LIMIT {
        return Err(KlrError::Size {
            what: "dense eigendecomposition N",
            actual: k.nrows(),
            limit: MATERIALIZE_LIMIT,
        });
    }
    let eig = SymEigen::new(k)?;
    let rank = eig.rank(DEFAULT_PINV_THRESHOLD);
    if c < 1 || c > rank {
        return arg_err(format!("C={c} must lie in 1..=rank(K)={rank}"));
    }
    let u = eig.leading_vectors(c);
    let sigma = DVector::from_iterator(c, eig.values.iter().take(c).copied());
    // C = K P = U_C, W = diag(1/σ), W† = diag(σ).
    let w = DMatrix::from_diagonal(&sigma.map(|s| 1.0 / s));
    NystromFactor::from_sketch(u, &w, DEFAULT_PINV_THRESHOLD * 1e-6, vec![1.0; c])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::landmarks::{select_kmeans, select_uniform, Strategy};
    use crate::linalg::{rel_frobenius, singular_values};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn points(n: usize, m: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(n, m, |_, _| rng.random_range(-2.0..2.0))
    }

    fn all_columns(n: usize) -> LandmarkSelection {
        LandmarkSelection {
            strategy: Strategy::Uniform,
            seed: 0,
            sketch: Sketch::Columns {
                indices: (0..n).collect(),
                weights: vec![1.0; n],
            },
        }
    }

    #[test]
    fn full_selection_recovers_k() {
        let x = points(60, 3, 1);
        let cfg = KernelConfig::rbf(0.5).unwrap();
        let k = gram(&x, &x, &cfg).unwrap();
        let f = build(&x, &all_columns(60), &cfg, DEFAULT_PINV_THRESHOLD).unwrap();
        assert!(rel_frobenius(&f.materialize().unwrap(), &k) < 1e-8);
        assert!(rel_frobenius(&(f.features() * f.features().transpose()), &k) < 1e-8);
    }

    #[test]
    fn column_weights_leave_k_hat_unchanged() {
        let x = points(80, 3, 4);
        let cfg = KernelConfig::rbf(0.4).unwrap();
        let indices = vec![3, 17, 29, 41, 55, 70];
        let sel = |weights: Vec<f64>| LandmarkSelection {
            strategy: Strategy::Uniform,
            seed: 0,
            sketch: Sketch::Columns {
                indices: indices.clone(),
                weights,
            },
        };
        let raw = build(&x, &sel(vec![1.0; 6]), &cfg, DEFAULT_PINV_THRESHOLD).unwrap();
        let scaled = build(&x, &sel(vec![0.3, 2.0, 1.1, 5.0, 0.7, 1.9]), &cfg, DEFAULT_PINV_THRESHOLD).unwrap();
        assert!(rel_frobenius(&scaled.materialize().unwrap(), &raw.materialize().unwrap()) < 1e-10);
    }

    #[test]
    fn rank_one_formula() {
        let x = points(10, 2, 2);
        let cfg = KernelConfig::rbf(0.3).unwrap();
        let k = gram(&x, &x, &cfg).unwrap();
        let sel = LandmarkSelection {
            strategy: Strategy::Uniform,
            seed: 0,
            sketch: Sketch::Columns {
                indices: vec![4],
                weights: vec![1.3],
            },
        };
        let f = build(&x, &sel, &cfg, DEFAULT_PINV_THRESHOLD).unwrap();
        let kj = k.column(4).into_owned();
        let oracle = &kj * kj.transpose() / k[(4, 4)];
        assert!(rel_frobenius(&f.materialize().unwrap(), &oracle) < 1e-12);
    }

    #[test]
    fn apply_is_linear_and_matches_dense() {
        let x = points(50, 3, 3);
        let cfg = KernelConfig::rbf(0.5).unwrap();
        let sel = select_uniform(50, 10, 4).unwrap();
        let f = build(&x, &sel, &cfg, DEFAULT_PINV_THRESHOLD).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a1 = DMatrix::from_fn(50, 3, |_, _| rng.random_range(-1.0..1.0));
        let a2 = DMatrix::from_fn(50, 3, |_, _| rng.random_range(-1.0..1.0));
        let sum = f.apply(&(&a1 + &a2)).unwrap();
        let parts = f.apply(&a1).unwrap() + f.apply(&a2).unwrap();
        assert!((sum - parts).amax() < 1e-12);
        assert_eq!(f.apply(&DMatrix::zeros(50, 3)).unwrap(), DMatrix::zeros(50, 3));
        assert!(f.apply(&DMatrix::zeros(49, 3)).is_err());

        let full = build(&x, &all_columns(50), &cfg, DEFAULT_PINV_THRESHOLD).unwrap();
        let k = gram(&x, &x, &cfg).unwrap();
        assert!(rel_frobenius(&full.apply(&a1).unwrap(), &(&k * &a1)) < 1e-8);
    }

    #[test]
    fn materialized_rank_equals_sketch_rank() {
        for seed in 0..5 {
            let x = points(40, 2, 10 + seed);
            let cfg = KernelConfig::rbf(1.0).unwrap();
            let sel = select_uniform(40, 6, seed).unwrap();
            let f = build(&x, &sel, &cfg, DEFAULT_PINV_THRESHOLD).unwrap();
            let rank = |m: &DMatrix<f64>| {
                let s = singular_values(m);
                s.iter().filter(|&&v| v > 1e-10 * s[0]).count()
            };
            assert_eq!(rank(&f.materialize().unwrap()), rank(&f.c_matrix));
        }
    }

    #[test]
    fn residual_is_psd_and_trace_matches() {
        let x = points(80, 3, 6);
        let cfg = KernelConfig::rbf(0.4).unwrap();
        let k = gram(&x, &x, &cfg).unwrap();
        let f = build(&x, &select_uniform(80, 12, 7).unwrap(), &cfg, DEFAULT_PINV_THRESHOLD).unwrap();
        let kh = f.materialize().unwrap();
        assert!((&kh - kh.transpose()).amax() < 1e-10);
        let e = SymEigen::new(&(&k - &kh)).unwrap();
        let s1 = SymEigen::new(&k).unwrap().max_value();
        assert!(e.values.iter().all(|&v| v >= -1e-8 * s1));
        assert!((f.features().norm_squared() - kh.trace()).abs() < 1e-8 * kh.trace());
    }

    #[test]
    fn points_mode_and_out_of_sample_features() {
        let x = points(70, 2, 8);
        let cfg = KernelConfig::rbf(0.7).unwrap();
        let sel = select_kmeans(&x, 8, 1024, 50, 1).unwrap();
        let f = build(&x, &sel, &cfg, DEFAULT_PINV_THRESHOLD).unwrap();
        let landmarks = sel.landmark_rows(&x).unwrap();
        let block = gram(&x, &landmarks, &cfg).unwrap();
        let phi = f.features_from_kernel_block(&block).unwrap();
        assert!((phi - f.features()).amax() < 1e-12);
    }

    #[test]
    fn best_rank_reconstructs() {
        let x = points(30, 2, 9);
        let k = gram(&x, &x, &KernelConfig::rbf(0.5).unwrap()).unwrap();
        let f = best_rank_factor(&k, 5).unwrap();
        let e = SymEigen::new(&k).unwrap();
        let resid = SymEigen::new(&(&k - f.materialize().unwrap())).unwrap();
        assert!((resid.max_value() - e.values[5]).abs() < 1e-6 * e.values[5].max(1e-300));
        assert!(best_rank_factor(&k, 31).is_err());
    }

    #[test]
    fn materialize_guard() {
        let f = NystromFactor::from_sketch(
            DMatrix::from_element(MATERIALIZE_LIMIT + 1, 1, 1.0),
            &DMatrix::from_element(1, 1, 1.0),
            DEFAULT_PINV_THRESHOLD,
            vec![1.0],
        )
        .unwrap();
        assert!(matches!(f.materialize(), Err(KlrError::Size { .. })));
    }

    #[test]
    fn degenerate_sketch() {
        let err = NystromFactor::from_sketch(DMatrix::zeros(4, 2), &DMatrix::zeros(2, 2), 1e-10, vec![1.0; 2]);
        assert!(matches!(err, Err(KlrError::DegenerateSketch)));
    }
}
