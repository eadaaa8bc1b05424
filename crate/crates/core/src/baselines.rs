//! Comparator methods: matricized PCA, its rank-truncated variant and HOSVD.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;

use crate::decompose::Factor;
use crate::error::{Error, Result};
use crate::linalg;
use crate::tensor::{self, SemiSymTensor};

/// Leading singular triple of the strict-upper matricization.
#[derive(Debug, Clone, PartialEq)]
pub struct MatricizedPca {
    /// Unit vector over slices.
    pub u: DVector<f64>,
    /// Unit vector over node pairs `i < j`.
    pub v: DVector<f64>,
    pub s: f64,
}

impl MatricizedPca {
    /// `v` folded back into a symmetric zero-diagonal matrix.
    pub fn network(&self, p: usize) -> Result<DMatrix<f64>> {
        tensor::unuvec(self.v.as_slice(), p)
    }
}

/// Leading singular triple of the `T x p(p-1)/2` matricization. The largest
/// entry of `v` is made positive.
pub fn matricized_pca(x: &SemiSymTensor) -> Result<MatricizedPca> {
    let m = tensor::matricize_upper(x).into_matrix();
    if m.ncols() == 0 || m.amax() == 0.0 {
        return Err(Error::DegenerateMatrix);
    }
    let svd = linalg::thin_svd(&m);
    let s = svd.s[0];
    if !(s > 0.0) {
        return Err(Error::DegenerateMatrix);
    }
    let mut u: DVector<f64> = svd.u.column(0).into_owned();
    let mut v: DVector<f64> = svd.v.column(0).into_owned();
    if v[v.iamax()] < 0.0 {
        u.neg_mut();
        v.neg_mut();
    }
    Ok(MatricizedPca { u, v, s })
}

/// `d = max(<[X; V], u>, 0) / r`, flipping `u` to make the inner product nonnegative.
fn factor_from(x: &SemiSymTensor, mut u: DVector<f64>, v: DMatrix<f64>) -> Result<Factor> {
    let mut obj = tensor::trace_product(x, &v)?.dot(&u);
    if obj < 0.0 {
        u.neg_mut();
        obj = -obj;
    }
    let d = obj / v.ncols() as f64;
    Ok(Factor { u, v, d })
}

/// Matricized PCA followed by the top-`r` eigenvectors of the folded right
/// singular vector.
pub fn truncated_matricized_pca(x: &SemiSymTensor, r: usize) -> Result<Factor> {
    let base = matricized_pca(x)?;
    let network = base.network(x.p())?;
    let eig = linalg::sym_eigen_top_r(&network, r)?;
    factor_from(x, base.u, eig.vectors.into_inner())
}

/// Tucker-(r, r, 1) HOSVD: V from the mode-1 Gram `sum_t X_t X_t^T`, u from the
/// slice Gram `G_st = <X_s, X_t>`.
pub fn hosvd(x: &SemiSymTensor, r: usize) -> Result<Factor> {
    if r == 0 || r > x.p() {
        return Err(Error::RankTooLarge { rank: r, dim: x.p() });
    }
    let grams: Vec<DMatrix<f64>> = x.slices().par_iter().map(|a| a * a).collect();
    let mut mode1 = DMatrix::zeros(x.p(), x.p());
    for g in &grams {
        mode1 += g;
    }
    if mode1.amax() == 0.0 {
        return Err(Error::DegenerateMatrix);
    }
    let v = linalg::sym_eigen_top_r(&mode1, r)?.vectors.into_inner();

    let t = x.t();
    let mut slice_gram = DMatrix::zeros(t, t);
    for s in 0..t {
        for k in s..t {
            let g = x.slice(s).dot(x.slice(k));
            slice_gram[(s, k)] = g;
            slice_gram[(k, s)] = g;
        }
    }
    let u = linalg::sym_eigen_top_r(&slice_gram, 1)?.vectors.column(0).into_owned();
    factor_from(x, u, v)
}

/// Distance between two networks as unit vectors over node pairs `i < j`,
/// minimized over sign.
pub fn network_distance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    let (x, y) = (tensor::uvec(a), tensor::uvec(b));
    linalg::sign_aligned_distance(&linalg::normalize(&x)?, &linalg::normalize(&y)?)
}

/// Leading eigenvector of `M^T M` via its eigendecomposition. Used only as a
/// cross-check of [`matricized_pca`].
pub fn covariance_pca(x: &SemiSymTensor) -> Result<(DVector<f64>, f64)> {
    let m = tensor::matricize_upper(x).into_matrix();
    let cov = m.transpose() * &m;
    let eig = SymmetricEigen::new(cov);
    let k = eig.eigenvalues.imax();
    let lambda = eig.eigenvalues[k];
    if !(lambda > 0.0) {
        return Err(Error::DegenerateMatrix);
    }
    Ok((eig.eigenvectors.column(k).into_owned(), lambda.sqrt()))
}
