//! Symmetric eigensolving, random Stiefel/sphere sampling and subspace error metrics.

use std::ops::Deref;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::tensor::{max_asymmetry, symmetry_tolerance};

/// Tolerance on `||V^T V - I||_max` for a matrix to count as Stiefel.
pub const STIEFEL_TOL: f64 = 1e-8;

/// A `p x r` matrix with orthonormal columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Stiefel(DMatrix<f64>);

impl Stiefel {
    pub fn new(v: DMatrix<f64>) -> Result<Self> {
        let dev = stiefel_deviation(&v);
        if dev > STIEFEL_TOL {
            return Err(Error::InvalidParameter(format!(
                "columns are not orthonormal (max |V^T V - I| = {dev:e})"
            )));
        }
        Ok(Self(v))
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }
}

impl Deref for Stiefel {
    type Target = DMatrix<f64>;

    fn deref(&self) -> &DMatrix<f64> {
        &self.0
    }
}

/// `max |V^T V - I|`.
pub fn stiefel_deviation(v: &DMatrix<f64>) -> f64 {
    let r = v.ncols();
    (v.transpose() * v - DMatrix::<f64>::identity(r, r)).amax()
}

/// Leading eigenpairs of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct TopEigen {
    pub vectors: Stiefel,
    /// Eigenvalues by decreasing magnitude.
    pub values: DVector<f64>,
}

/// How the `r` leading eigenvectors are chosen.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EigenSelection {
    /// The `r` eigenvalues of largest magnitude, regardless of sign.
    #[default]
    Magnitude,
    /// The `r` largest eigenvalues of `s * A`, with the sign `s` that gives the
    /// larger sum. Never mixes signs, so `Tr(V^T A V)` is as large in magnitude
    /// as any Stiefel `V` allows.
    SignConsistent,
}

/// Flips each column so that its largest-magnitude entry (first one on ties) is positive.
pub fn fix_column_signs(v: &mut DMatrix<f64>) {
    for mut col in v.column_iter_mut() {
        let mut best = 0usize;
        let mut best_abs = -1.0;
        for (i, x) in col.iter().enumerate() {
            if x.abs() > best_abs {
                best_abs = x.abs();
                best = i;
            }
        }
        if col[best] < 0.0 {
            col.neg_mut();
        }
    }
}

fn check_symmetric(a: &DMatrix<f64>) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "expected a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let dev = max_asymmetry(a);
    if dev > symmetry_tolerance(a) {
        return Err(Error::NotSymmetric(dev));
    }
    Ok(())
}

/// Top `r` eigenpairs of a symmetric matrix by eigenvalue magnitude.
///
/// Ties in magnitude put the positive eigenvalue first; exact repeats keep
/// the solver's order. Each eigenvector has its largest-magnitude entry positive.
pub fn sym_eigen_top_r(a: &DMatrix<f64>, r: usize) -> Result<TopEigen> {
    sym_eigen_select(a, r, EigenSelection::Magnitude)
}

pub fn sym_eigen_select(a: &DMatrix<f64>, r: usize, selection: EigenSelection) -> Result<TopEigen> {
    check_symmetric(a)?;
    let p = a.nrows();
    if r == 0 {
        return Err(Error::InvalidParameter("rank must be >= 1".into()));
    }
    if r > p {
        return Err(Error::RankTooLarge { rank: r, dim: p });
    }
    let eig = SymmetricEigen::new(a.clone());
    let vals = &eig.eigenvalues;

    let mut order: Vec<usize> = (0..p).collect();
    let chosen: Vec<usize> = match selection {
        EigenSelection::Magnitude => {
            order.sort_by(|&i, &j| {
                vals[j]
                    .abs()
                    .total_cmp(&vals[i].abs())
                    .then(vals[j].total_cmp(&vals[i]))
            });
            order.truncate(r);
            order
        }
        EigenSelection::SignConsistent => {
            order.sort_by(|&i, &j| vals[j].total_cmp(&vals[i]));
            let top: f64 = order[..r].iter().map(|&i| vals[i]).sum();
            let bottom: f64 = order[p - r..].iter().map(|&i| vals[i]).sum();
            if -bottom > top {
                order.reverse();
            }
            order.truncate(r);
            order
        }
    };

    let mut vectors = DMatrix::zeros(p, r);
    let mut values = DVector::zeros(r);
    for (k, &i) in chosen.iter().enumerate() {
        vectors.set_column(k, &eig.eigenvectors.column(i));
        values[k] = vals[i];
    }
    fix_column_signs(&mut vectors);
    Ok(TopEigen {
        vectors: Stiefel(vectors),
        values,
    })
}

/// `x / ||x||`, failing for norms below `1e-14`.
pub fn normalize(x: &DVector<f64>) -> Result<DVector<f64>> {
    let norm = x.dot(x).sqrt();
    if !(norm >= 1e-14) {
        return Err(Error::ZeroVector(norm));
    }
    Ok(x / norm)
}

fn check_same_shape(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::DimensionMismatch(format!(
            "{:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    Ok(())
}

fn cosines(v1: &DMatrix<f64>, v2: &DMatrix<f64>) -> Result<DVector<f64>> {
    check_same_shape(v1, v2)?;
    Ok(thin_svd(&(v1.transpose() * v2)).s.map(|s| s.clamp(0.0, 1.0)))
}

/// Thin SVD `A = U diag(s) V^T` with `s` descending.
#[derive(Debug, Clone, PartialEq)]
pub struct ThinSvd {
    /// `m x k` with orthonormal columns, `k = min(m, n)`.
    pub u: DMatrix<f64>,
    pub s: DVector<f64>,
    /// `n x k` with orthonormal columns.
    pub v: DMatrix<f64>,
}

impl ThinSvd {
    pub fn recompose(&self) -> DMatrix<f64> {
        &self.u * DMatrix::from_diagonal(&self.s) * self.v.transpose()
    }
}

const JACOBI_MAX_SWEEPS: usize = 80;

/// Thin SVD by one-sided Jacobi rotations. Columns of `U` belonging to zero
/// singular values are completed to an orthonormal set.
pub fn thin_svd(a: &DMatrix<f64>) -> ThinSvd {
    let (m, n) = a.shape();
    if m < n {
        let t = thin_svd(&a.transpose());
        return ThinSvd { u: t.v, s: t.s, v: t.u };
    }
    let mut w = a.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for j in 0..n {
            for k in (j + 1)..n {
                let alpha = w.column(j).norm_squared();
                let beta = w.column(k).norm_squared();
                let gamma = w.column(j).dot(&w.column(k));
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + 1f64.hypot(zeta));
                let c = 1.0 / 1f64.hypot(t);
                let sn = c * t;
                rotate_columns(&mut w, j, k, c, sn);
                rotate_columns(&mut v, j, k, c, sn);
            }
        }
        if !rotated {
            break;
        }
    }

    let norms: Vec<f64> = (0..n).map(|j| w.column(j).norm()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]));
    let s = DVector::from_iterator(n, order.iter().map(|&j| norms[j]));
    let v = DMatrix::from_columns(&order.iter().map(|&j| v.column(j)).collect::<Vec<_>>());
    let cutoff = s.get(0).copied().unwrap_or(0.0) * f64::EPSILON * m as f64;
    let mut u = DMatrix::<f64>::zeros(m, n);
    let mut filled = 0;
    for (k, &j) in order.iter().enumerate() {
        if s[k] > cutoff && s[k] > 0.0 {
            u.set_column(k, &(w.column(j) / s[k]));
            filled += 1;
        }
    }
    complete_orthonormal(&mut u, filled);
    ThinSvd { u, s, v }
}

fn rotate_columns(x: &mut DMatrix<f64>, j: usize, k: usize, c: f64, s: f64) {
    for i in 0..x.nrows() {
        let (a, b) = (x[(i, j)], x[(i, k)]);
        x[(i, j)] = c * a - s * b;
        x[(i, k)] = s * a + c * b;
    }
}

/// Fills columns `filled..` with unit vectors orthogonal to all earlier ones.
fn complete_orthonormal(u: &mut DMatrix<f64>, filled: usize) {
    let m = u.nrows();
    let mut e = 0;
    for k in filled..u.ncols() {
        while e < m {
            let mut c = DVector::<f64>::zeros(m);
            c[e] = 1.0;
            e += 1;
            for _ in 0..2 {
                for q in 0..k {
                    let proj = u.column(q).dot(&c);
                    c -= u.column(q) * proj;
                }
            }
            let norm = c.norm();
            if norm > 0.5 {
                u.set_column(k, &(c / norm));
                break;
            }
        }
    }
}

/// Principal angles between the column spans, ascending.
pub fn principal_angles(v1: &DMatrix<f64>, v2: &DMatrix<f64>) -> Result<Vec<f64>> {
    let mut angles: Vec<f64> = cosines(v1, v2)?.iter().map(|c| c.acos()).collect();
    angles.sort_by(f64::total_cmp);
    Ok(angles)
}

/// `||sin Theta||_F` between two column spans of equal dimension, computed as
/// `||(I - V1 V1^T) V2||_F` so that small angles keep full precision.
pub fn sin_theta_frob(v1: &DMatrix<f64>, v2: &DMatrix<f64>) -> Result<f64> {
    check_same_shape(v1, v2)?;
    let coef = v1.transpose() * v2;
    Ok((v2 - v1 * coef).norm())
}

/// Largest principal angle, `acos(sigma_min(V1^T V2))`.
pub fn subspace_angle(v1: &DMatrix<f64>, v2: &DMatrix<f64>) -> Result<f64> {
    Ok(cosines(v1, v2)?.min().acos())
}

/// Orthogonal alignment minimizing `||V* - V_hat O||_F` and the resulting
/// error scaled by `sqrt(p r)`.
pub fn procrustes_aligned_rmse(
    v_hat: &DMatrix<f64>,
    v_star: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, f64)> {
    check_same_shape(v_hat, v_star)?;
    let (p, r) = v_hat.shape();
    let svd = thin_svd(&(v_hat.transpose() * v_star));
    let o = svd.u * svd.v.transpose();
    let err = (v_star - v_hat * &o).norm() / ((p * r) as f64).sqrt();
    Ok((o, err))
}

/// Aligned RMSE only.
pub fn armse(v_hat: &DMatrix<f64>, v_star: &DMatrix<f64>) -> Result<f64> {
    procrustes_aligned_rmse(v_hat, v_star).map(|(_, e)| e)
}

/// `min_{s = +-1} ||u* - s u_hat||`.
pub fn sign_aligned_distance(u_hat: &DVector<f64>, u_star: &DVector<f64>) -> Result<f64> {
    if u_hat.len() != u_star.len() {
        return Err(Error::DimensionMismatch(format!(
            "vectors of length {} and {}",
            u_hat.len(),
            u_star.len()
        )));
    }
    Ok((u_star - u_hat).norm().min((u_star + u_hat).norm()))
}

/// Unsigned angle between two lines, in `[0, pi/2]`.
pub fn vector_angle(a: &DVector<f64>, b: &DVector<f64>) -> Result<f64> {
    let c = a.dot(b).abs() / (a.norm() * b.norm());
    if !c.is_finite() {
        return Err(Error::ZeroVector(a.norm().min(b.norm())));
    }
    Ok(c.clamp(0.0, 1.0).acos())
}

/// Haar-distributed `p x r` Stiefel matrix: QR of a Gaussian matrix with the
/// signs of `R`'s diagonal absorbed into `Q`.
pub fn random_stiefel<R: Rng + ?Sized>(p: usize, r: usize, rng: &mut R) -> DMatrix<f64> {
    assert!(r >= 1 && r <= p, "random_stiefel needs 1 <= r <= p (got r = {r}, p = {p})");
    let g = DMatrix::from_fn(p, r, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let mut q = qr.q();
    let rr = qr.r();
    for k in 0..r {
        if rr[(k, k)] < 0.0 {
            q.column_mut(k).neg_mut();
        }
    }
    q
}

/// Uniform point on the unit sphere; with `positive`, on its nonnegative orthant.
pub fn random_unit<R: Rng + ?Sized>(t: usize, rng: &mut R, positive: bool) -> DVector<f64> {
    loop {
        let mut g = DVector::from_fn(t, |_, _| rng.sample::<f64, _>(StandardNormal));
        if positive {
            g.apply(|x| *x = x.abs());
        }
        if let Ok(u) = normalize(&g) {
            return u;
        }
    }
}
