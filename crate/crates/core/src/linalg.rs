//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{KlrError, Result};

/// Eigen-decomposition of a symmetric matrix with eigenvalues sorted in
/// descending order. The input is symmetrized first.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

impl SymEigen {
    pub fn new(a: &DMatrix<f64>) -> Result<Self> {
        if !a.is_square() {
            return Err(KlrError::Argument(format!(
                "eigendecomposition needs a square matrix, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(KlrError::Numeric(
                "non-finite entry in matrix passed to eigendecomposition".into(),
            ));
        }
        let n = a.nrows();
        if n == 0 {
            return Ok(Self {
                values: DVector::zeros(0),
                vectors: DMatrix::zeros(0, 0),
            });
        }
        let sym = symmetrize(a);
        let eig = SymmetricEigen::try_new(sym, f64::EPSILON, 0)
            .ok_or_else(|| KlrError::Numeric("symmetric eigendecomposition did not converge".into()))?;
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
        let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
        let mut vectors = DMatrix::zeros(n, n);
        for (dst, &src) in order.iter().enumerate() {
            vectors.set_column(dst, &eig.eigenvectors.column(src));
        }
        Ok(Self { values, vectors })
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Number of eigenvalues strictly above `rel * max(λ_max, 0)`.
    pub fn rank(&self, rel: f64) -> usize {
        let cut = rel * self.max_value();
        self.values.iter().filter(|&&v| v > cut).count()
    }

    /// Leading `r` eigenvectors as an N×r matrix.
    pub fn leading_vectors(&self, r: usize) -> DMatrix<f64> {
        self.vectors.columns(0, r).into_owned()
    }
}

pub fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

/// Pseudoinverse of a symmetric PSD matrix keeping eigenvalues above
/// `rel * λ_max`. Returns the pseudoinverse and the retained rank.
pub fn pinv_sym(a: &DMatrix<f64>, rel: f64) -> Result<(DMatrix<f64>, usize)> {
    let eig = SymEigen::new(a)?;
    let r = eig.rank(rel);
    let n = a.nrows();
    let mut out = DMatrix::zeros(n, n);
    for j in 0..r {
        let u = eig.vectors.column(j);
        out += (u * u.transpose()) / eig.values[j];
    }
    Ok((symmetrize(&out), r))
}

/// Orthonormal basis for the column space of `a`, retaining singular values
/// above `rel * σ_1`.
pub fn column_basis(a: &DMatrix<f64>, rel: f64) -> DMatrix<f64> {
    if a.ncols() == 0 || a.nrows() == 0 {
        return DMatrix::zeros(a.nrows(), 0);
    }
    let svd = a.clone().svd(true, false);
    let u = svd.u.expect("requested U");
    let s = &svd.singular_values;
    let smax = s.iter().copied().fold(0.0, f64::max);
    let keep: Vec<usize> = (0..s.len()).filter(|&j| s[j] > rel * smax).collect();
    let mut basis = DMatrix::zeros(a.nrows(), keep.len());
    for (dst, &src) in keep.iter().enumerate() {
        basis.set_column(dst, &u.column(src));
    }
    basis
}

/// Singular values of an arbitrary matrix, descending.
pub fn singular_values(a: &DMatrix<f64>) -> Vec<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = a.singular_values().iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

pub fn max_abs(a: &DMatrix<f64>) -> f64 {
    a.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

pub(crate) fn check_finite(a: &DMatrix<f64>, what: &str) -> Result<()> {
    if a.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(KlrError::Numeric(format!("{what} contains NaN or infinite entries")))
    }
}

/// Relative Frobenius distance ‖a − b‖_F / ‖b‖_F (absolute when b = 0).
pub fn rel_frobenius(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let diff = (a - b).norm();
    let base = b.norm();
    if base > 0.0 {
        diff / base
    } else {
        diff
    }
}
