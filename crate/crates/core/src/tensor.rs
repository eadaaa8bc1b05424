//! Semi-symmetric tensors and the multilinear algebra the decomposition uses.
//!
//! A [`SemiSymTensor`] is a `p x p x T` array stored as `T` dense symmetric
//! `p x p` slices. Mode products follow the composition rule
//! `X x_k A x_k B = X x_k (AB)`, so a mode-1 product with a `p x q` matrix `A`
//! maps slice `X_t` to `A^T X_t`, mode 2 maps it to `X_t A`, and mode 3 with a
//! `T x q` matrix forms `Y_s = sum_t A_ts X_t`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg;

const SYMMETRY_REL_TOL: f64 = 1e-8;
const SYMMETRY_ABS_FLOOR: f64 = 1e-12;

/// Tolerance used to accept a slice as symmetric.
pub fn symmetry_tolerance(a: &DMatrix<f64>) -> f64 {
    (SYMMETRY_REL_TOL * a.amax()).max(SYMMETRY_ABS_FLOOR)
}

/// Largest absolute asymmetry `max_ij |A_ij - A_ji|` of a square matrix.
pub fn max_asymmetry(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0_f64;
    for j in 0..n {
        for i in 0..j {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    worst
}

fn symmetrize_in_place(a: &mut DMatrix<f64>) {
    let n = a.nrows();
    for j in 0..n {
        for i in 0..j {
            let m = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = m;
            a[(j, i)] = m;
        }
    }
}

/// `p x p x T` tensor whose every mode-3 slice is symmetric. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SemiSymTensor {
    p: usize,
    slices: Vec<DMatrix<f64>>,
}

impl SemiSymTensor {
    /// Validates and symmetrizes a list of slices.
    ///
    /// Slices within tolerance of symmetry are replaced by `(A + A^T) / 2`;
    /// anything further away is rejected.
    pub fn new_from_slices(slices: Vec<DMatrix<f64>>) -> Result<Self> {
        if slices.is_empty() {
            return Err(Error::DimensionMismatch(
                "a tensor needs at least one slice".into(),
            ));
        }
        let p = slices[0].nrows();
        if p == 0 {
            return Err(Error::DimensionMismatch("slices must be non-empty".into()));
        }
        let mut slices = slices;
        for (t, a) in slices.iter_mut().enumerate() {
            if a.nrows() != p || a.ncols() != p {
                return Err(Error::DimensionMismatch(format!(
                    "slice {t} is {}x{}, expected {p}x{p}",
                    a.nrows(),
                    a.ncols()
                )));
            }
            for j in 0..p {
                for i in 0..p {
                    if !a[(i, j)].is_finite() {
                        return Err(Error::NonFiniteEntry {
                            slice: t,
                            row: i,
                            col: j,
                        });
                    }
                }
            }
            let deviation = max_asymmetry(a);
            let tolerance = symmetry_tolerance(a);
            if deviation > tolerance {
                return Err(Error::AsymmetricSlice {
                    slice: t,
                    deviation,
                    tolerance,
                });
            }
            symmetrize_in_place(a);
        }
        Ok(Self { p, slices })
    }

    /// All-zero tensor.
    pub fn zeros(p: usize, t: usize) -> Self {
        assert!(p > 0 && t > 0, "tensor dimensions must be positive");
        Self {
            p,
            slices: vec![DMatrix::zeros(p, p); t],
        }
    }

    /// Slices that are already exactly symmetric by construction.
    pub(crate) fn from_symmetric_unchecked(slices: Vec<DMatrix<f64>>) -> Self {
        debug_assert!(!slices.is_empty());
        let p = slices[0].nrows();
        Self { p, slices }
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Number of slices.
    pub fn t(&self) -> usize {
        self.slices.len()
    }

    pub fn slice(&self, t: usize) -> &DMatrix<f64> {
        &self.slices[t]
    }

    pub fn slices(&self) -> &[DMatrix<f64>] {
        &self.slices
    }

    pub fn into_slices(self) -> Vec<DMatrix<f64>> {
        self.slices
    }

    /// Entry `X_{ijt}` (zero-based).
    pub fn get(&self, i: usize, j: usize, t: usize) -> f64 {
        self.slices[t][(i, j)]
    }

    pub fn scale(&self, alpha: f64) -> Self {
        Self::from_symmetric_unchecked(self.slices.iter().map(|a| a * alpha).collect())
    }

    /// `a * self + b * other`.
    pub fn axpby(&self, a: f64, other: &SemiSymTensor, b: f64) -> Result<Self> {
        self.check_same_dims(other)?;
        Ok(Self::from_symmetric_unchecked(
            self.slices
                .iter()
                .zip(&other.slices)
                .map(|(x, y)| x * a + y * b)
                .collect(),
        ))
    }

    pub fn add(&self, other: &SemiSymTensor) -> Result<Self> {
        self.axpby(1.0, other, 1.0)
    }

    pub fn sub(&self, other: &SemiSymTensor) -> Result<Self> {
        self.axpby(1.0, other, -1.0)
    }

    /// Slices in reverse order.
    pub fn reversed(&self) -> Self {
        Self::from_symmetric_unchecked(self.slices.iter().rev().cloned().collect())
    }

    /// Applies `A -> Q A Q^T` to every slice.
    pub fn conjugate(&self, q: &DMatrix<f64>) -> Result<Self> {
        if q.nrows() != self.p || q.ncols() != self.p {
            return Err(Error::DimensionMismatch(format!(
                "conjugating matrix must be {0}x{0}",
                self.p
            )));
        }
        Self::new_from_slices(self.slices.iter().map(|a| q * a * q.transpose()).collect())
    }

    pub fn to_dense(&self) -> DenseTensor3 {
        DenseTensor3 {
            slices: self.slices.clone(),
        }
    }

    fn check_same_dims(&self, other: &SemiSymTensor) -> Result<()> {
        if self.p != other.p || self.t() != other.t() {
            return Err(Error::DimensionMismatch(format!(
                "tensor {}x{}x{} vs {}x{}x{}",
                self.p,
                self.p,
                self.t(),
                other.p,
                other.p,
                other.t()
            )));
        }
        Ok(())
    }
}

/// General dense third-order array, stored as `n3` slices of `n1 x n2`.
///
/// Holds mode-product outputs that need not be semi-symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor3 {
    slices: Vec<DMatrix<f64>>,
}

impl DenseTensor3 {
    pub fn new(slices: Vec<DMatrix<f64>>) -> Result<Self> {
        let Some(first) = slices.first() else {
            return Err(Error::DimensionMismatch("a tensor needs at least one slice".into()));
        };
        let shape = first.shape();
        if slices.iter().any(|s| s.shape() != shape) {
            return Err(Error::DimensionMismatch("slices differ in shape".into()));
        }
        Ok(Self { slices })
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        let (n1, n2) = self.slices[0].shape();
        (n1, n2, self.slices.len())
    }

    pub fn slices(&self) -> &[DMatrix<f64>] {
        &self.slices
    }

    pub fn frob_norm(&self) -> f64 {
        self.slices
            .iter()
            .map(|s| s.norm_squared())
            .sum::<f64>()
            .sqrt()
    }

    /// Mode-`mode` product, see the module docs for the convention.
    pub fn ttm(&self, a: &DMatrix<f64>, mode: usize) -> Result<DenseTensor3> {
        let (n1, n2, n3) = self.dims();
        let expected = match mode {
            1 => n1,
            2 => n2,
            3 => n3,
            _ => {
                return Err(Error::DimensionMismatch(format!(
                    "mode must be 1, 2 or 3, got {mode}"
                )))
            }
        };
        if a.nrows() != expected {
            return Err(Error::DimensionMismatch(format!(
                "mode-{mode} product needs a matrix with {expected} rows, got {}",
                a.nrows()
            )));
        }
        let slices = match mode {
            1 => {
                let at = a.transpose();
                self.slices.par_iter().map(|s| &at * s).collect()
            }
            2 => self.slices.par_iter().map(|s| s * a).collect(),
            _ => (0..a.ncols())
                .into_par_iter()
                .map(|s| {
                    let mut acc = DMatrix::zeros(n1, n2);
                    for (t, x) in self.slices.iter().enumerate() {
                        let w = a[(t, s)];
                        if w != 0.0 {
                            acc.zip_apply(x, |a, b| *a += w * b);
                        }
                    }
                    acc
                })
                .collect(),
        };
        Ok(DenseTensor3 { slices })
    }

    /// Converts back to a semi-symmetric tensor, validating symmetry.
    pub fn into_semisym(self) -> Result<SemiSymTensor> {
        SemiSymTensor::new_from_slices(self.slices)
    }
}

/// `T x p(p-1)/2` matricization: row `t` holds the strict upper triangle of slice `t`.
///
/// Columns are ordered `(1,2), (1,3), ..., (1,p), (2,3), ..., (p-1,p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct UpperTriMatrix {
    p: usize,
    data: DMatrix<f64>,
}

impl UpperTriMatrix {
    pub fn p(&self) -> usize {
        self.p
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.data
    }
}

/// Number of strictly upper-triangular entries of a `p x p` matrix.
pub fn n_pairs(p: usize) -> usize {
    p * p.saturating_sub(1) / 2
}

/// Inverse of [`n_pairs`], if `len` is triangular.
pub fn p_from_pairs(len: usize) -> Option<usize> {
    // p(p-1)/2 = len  =>  p = (1 + sqrt(1 + 8 len)) / 2
    let p = ((1.0 + (1.0 + 8.0 * len as f64).sqrt()) / 2.0).round() as usize;
    (p >= 1 && n_pairs(p) == len).then_some(p)
}

/// Strict upper triangle of a square matrix, row-major over `i < j`.
pub fn uvec(a: &DMatrix<f64>) -> DVector<f64> {
    let p = a.nrows();
    let mut out = Vec::with_capacity(n_pairs(p));
    for i in 0..p {
        for j in (i + 1)..p {
            out.push(a[(i, j)]);
        }
    }
    DVector::from_vec(out)
}

/// Symmetric matrix with zero diagonal whose strict upper triangle is `row`.
pub fn unuvec(row: &[f64], p: usize) -> Result<DMatrix<f64>> {
    if row.len() != n_pairs(p) {
        return Err(Error::LengthNotTriangular { len: row.len() });
    }
    let mut a = DMatrix::zeros(p, p);
    let mut k = 0;
    for i in 0..p {
        for j in (i + 1)..p {
            a[(i, j)] = row[k];
            a[(j, i)] = row[k];
            k += 1;
        }
    }
    Ok(a)
}

pub fn matricize_upper(x: &SemiSymTensor) -> UpperTriMatrix {
    let p = x.p();
    let mut data = DMatrix::zeros(x.t(), n_pairs(p));
    for (t, a) in x.slices().iter().enumerate() {
        let mut k = 0;
        for i in 0..p {
            for j in (i + 1)..p {
                data[(t, k)] = a[(i, j)];
                k += 1;
            }
        }
    }
    UpperTriMatrix { p, data }
}

/// `X x_3 u = sum_t u_t X_t`, summed in slice order.
pub fn ttv3(x: &SemiSymTensor, u: &DVector<f64>) -> Result<DMatrix<f64>> {
    if u.len() != x.t() {
        return Err(Error::DimensionMismatch(format!(
            "ttv3: vector has length {}, tensor has {} slices",
            u.len(),
            x.t()
        )));
    }
    let mut acc = DMatrix::zeros(x.p(), x.p());
    for (w, a) in u.iter().zip(x.slices()) {
        if *w != 0.0 {
            acc.zip_apply(a, |s, b| *s += *w * b);
        }
    }
    Ok(acc)
}

/// Trace-product `[X; V]_t = Tr(V^T X_t V)`.
pub fn trace_product(x: &SemiSymTensor, v: &DMatrix<f64>) -> Result<DVector<f64>> {
    if v.nrows() != x.p() {
        return Err(Error::DimensionMismatch(format!(
            "trace_product: V has {} rows, tensor has p = {}",
            v.nrows(),
            x.p()
        )));
    }
    let entries: Vec<f64> = x
        .slices()
        .par_iter()
        .map(|a| (a * v).dot(v))
        .collect();
    Ok(DVector::from_vec(entries))
}

/// `d * V o V o u`: slice `t` is `d * u_t * V V^T`.
pub fn rank1_outer(d: f64, v: &DMatrix<f64>, u: &DVector<f64>) -> Result<SemiSymTensor> {
    if d < 0.0 || !d.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "scale must be finite and nonnegative, got {d}"
        )));
    }
    if u.is_empty() || v.nrows() == 0 {
        return Err(Error::DimensionMismatch("empty factor".into()));
    }
    let mut proj = v * v.transpose();
    symmetrize_in_place(&mut proj);
    Ok(SemiSymTensor::from_symmetric_unchecked(
        u.iter().map(|&ut| &proj * (d * ut)).collect(),
    ))
}

pub fn frob_inner(x: &SemiSymTensor, y: &SemiSymTensor) -> Result<f64> {
    x.check_same_dims(y)?;
    Ok(x
        .slices()
        .iter()
        .zip(y.slices())
        .map(|(a, b)| a.dot(b))
        .sum())
}

pub fn frob_norm(x: &SemiSymTensor) -> f64 {
    x.slices()
        .iter()
        .map(|a| a.norm_squared())
        .sum::<f64>()
        .sqrt()
}

/// Mode product of a semi-symmetric tensor; see [`DenseTensor3::ttm`].
pub fn ttm(x: &SemiSymTensor, a: &DMatrix<f64>, mode: usize) -> Result<DenseTensor3> {
    match mode {
        1 | 2 if a.nrows() != x.p() => Err(Error::DimensionMismatch(format!(
            "mode-{mode} product needs {} rows, got {}",
            x.p(),
            a.nrows()
        ))),
        _ => x.to_dense().ttm(a, mode),
    }
}

/// Applies the same symmetric `p x p` matrix along modes 1 and 2: `A X_t A`.
///
/// The output stays semi-symmetric, which a pair of generic [`ttm`] calls
/// only guarantees up to rounding.
pub fn sandwich(x: &SemiSymTensor, a: &DMatrix<f64>) -> Result<SemiSymTensor> {
    if a.nrows() != x.p() || a.ncols() != x.p() {
        return Err(Error::DimensionMismatch(format!(
            "sandwich matrix must be {0}x{0}",
            x.p()
        )));
    }
    let slices = x
        .slices()
        .par_iter()
        .map(|s| {
            let mut y = a.transpose() * s * a;
            symmetrize_in_place(&mut y);
            y
        })
        .collect();
    Ok(SemiSymTensor::from_symmetric_unchecked(slices))
}

/// Operator norm of a symmetric matrix (largest eigenvalue magnitude).
pub fn sym_opnorm(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 0 {
        return 0.0;
    }
    SymmetricEigen::new(a.clone()).eigenvalues.amax()
}

/// Deterministic upper bound `r * sqrt(T) * max_t ||X_t||_op` on the rank-`r` operator norm.
pub fn ropnorm_upper_bound(x: &SemiSymTensor, r: usize) -> Result<f64> {
    check_rank(r, x.p())?;
    let max_op = x
        .slices()
        .par_iter()
        .map(sym_opnorm)
        .collect::<Vec<_>>()
        .into_iter()
        .fold(0.0_f64, f64::max);
    Ok(r as f64 * (x.t() as f64).sqrt() * max_op)
}

/// Lower bound on the rank-`r` operator norm: the best `|<[X; V], u>|` over
/// `n_samples` random pairs `(u, V)` with `u` on the unit sphere and `V` Stiefel.
pub fn ropnorm_sampled_lower<R: Rng + ?Sized>(
    x: &SemiSymTensor,
    r: usize,
    n_samples: usize,
    rng: &mut R,
) -> Result<f64> {
    check_rank(r, x.p())?;
    if n_samples == 0 {
        return Err(Error::InvalidParameter("n_samples must be >= 1".into()));
    }
    let mut best = 0.0_f64;
    for _ in 0..n_samples {
        let v = linalg::random_stiefel(x.p(), r, rng);
        let u = linalg::random_unit(x.t(), rng, false);
        let val = trace_product(x, &v)?.dot(&u).abs();
        best = best.max(val);
    }
    Ok(best)
}

fn check_rank(r: usize, p: usize) -> Result<()> {
    if r == 0 {
        return Err(Error::InvalidParameter("rank must be >= 1".into()));
    }
    if r > p {
        return Err(Error::RankTooLarge { rank: r, dim: p });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn eye(p: usize) -> DMatrix<f64> {
        DMatrix::identity(p, p)
    }

    fn random_tensor(p: usize, t: usize, rng: &mut ChaCha8Rng) -> SemiSymTensor {
        let slices = (0..t)
            .map(|_| {
                let g = DMatrix::from_fn(p, p, |_, _| rng.random::<f64>() - 0.5);
                &g + g.transpose()
            })
            .collect();
        SemiSymTensor::new_from_slices(slices).unwrap()
    }

    #[test]
    fn identity_slices_are_accepted() {
        let x = SemiSymTensor::new_from_slices(vec![eye(2), eye(2)]).unwrap();
        assert_eq!((x.p(), x.t()), (2, 2));
    }

    #[test]
    fn asymmetry_beyond_tolerance_is_rejected() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0 + 1e-3, 0.0]);
        assert!(matches!(
            SemiSymTensor::new_from_slices(vec![a]),
            Err(Error::AsymmetricSlice { slice: 0, .. })
        ));
    }

    #[test]
    fn small_asymmetry_is_symmetrized() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0 + 1e-10, 0.0]);
        let x = SemiSymTensor::new_from_slices(vec![a]).unwrap();
        assert_eq!(x.get(0, 1, 0), x.get(1, 0, 0));
        assert_relative_eq!(x.get(0, 1, 0), 1.0 + 0.5e-10, epsilon = 1e-15);
    }

    #[test]
    fn mismatched_slices_are_rejected() {
        let res = SemiSymTensor::new_from_slices(vec![eye(2), eye(3)]);
        assert!(matches!(res, Err(Error::DimensionMismatch(_))));
        assert!(SemiSymTensor::new_from_slices(vec![]).is_err());
        let rect = DMatrix::zeros(2, 3);
        assert!(SemiSymTensor::new_from_slices(vec![rect]).is_err());
    }

    #[test]
    fn non_finite_entries_are_rejected() {
        let mut a = eye(2);
        a[(1, 1)] = f64::NAN;
        assert!(matches!(
            SemiSymTensor::new_from_slices(vec![a]),
            Err(Error::NonFiniteEntry { slice: 0, row: 1, col: 1 })
        ));
    }

    #[test]
    fn ttv3_examples() {
        let x = SemiSymTensor::new_from_slices(vec![eye(2), eye(2) * 2.0]).unwrap();
        assert_eq!(ttv3(&x, &DVector::from_vec(vec![1.0, 0.0])).unwrap(), eye(2));
        // 0.6 * 1 + 0.8 * 2 = 2.2 on the diagonal
        let m = ttv3(&x, &DVector::from_vec(vec![0.6, 0.8])).unwrap();
        assert_relative_eq!(m, eye(2) * 2.2, epsilon = 1e-15);
        assert_eq!(ttv3(&x, &DVector::zeros(2)).unwrap(), DMatrix::zeros(2, 2));
        assert!(ttv3(&x, &DVector::zeros(3)).is_err());
    }

    #[test]
    fn trace_product_examples() {
        let p = 4;
        let x = SemiSymTensor::new_from_slices(vec![eye(p); 3]).unwrap();
        let v = eye(p).columns(0, 2).into_owned();
        assert_eq!(trace_product(&x, &v).unwrap(), DVector::from_element(3, 2.0));

        let vv = DVector::from_vec(vec![0.6, 0.8, 0.0, 0.0]);
        let u = DVector::from_vec(vec![0.3, -1.2, 2.0]);
        let slices = u.iter().map(|&ut| &vv * vv.transpose() * ut).collect();
        let x = SemiSymTensor::new_from_slices(slices).unwrap();
        let vmat = DMatrix::from_column_slice(4, 1, vv.as_slice());
        assert_relative_eq!(trace_product(&x, &vmat).unwrap(), u, epsilon = 1e-14);

        let w = DMatrix::from_column_slice(4, 2, &[-0.8, 0.6, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        assert_relative_eq!(
            trace_product(&x, &w).unwrap(),
            DVector::zeros(3),
            epsilon = 1e-15
        );
        assert!(trace_product(&x, &DMatrix::zeros(3, 1)).is_err());
    }

    #[test]
    fn rank1_outer_examples() {
        let e1 = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let x = rank1_outer(1.0, &e1, &DVector::from_vec(vec![1.0, 0.0])).unwrap();
        assert_eq!(x.slice(0), &DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]));
        assert_eq!(x.slice(1), &DMatrix::zeros(2, 2));

        let z = rank1_outer(0.0, &e1, &DVector::from_vec(vec![1.0, 2.0])).unwrap();
        assert_eq!(frob_norm(&z), 0.0);
        assert!(rank1_outer(-1.0, &e1, &DVector::from_vec(vec![1.0])).is_err());

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for &(p, r, t) in &[(5, 2, 4), (8, 3, 6), (3, 3, 2)] {
            let v = linalg::random_stiefel(p, r, &mut rng);
            let u = DVector::from_fn(t, |_, _| rng.random::<f64>() - 0.5);
            let x = rank1_outer(1.7, &v, &u).unwrap();
            let tp = trace_product(&x, &v).unwrap();
            assert_relative_eq!(tp, &u * (1.7 * r as f64), epsilon = 1e-12);
        }
    }

    #[test]
    fn uvec_column_order_and_roundtrip() {
        let (a, b, c) = (1.5, -2.0, 3.25);
        let m = DMatrix::from_row_slice(3, 3, &[0.0, a, b, a, 0.0, c, b, c, 0.0]);
        let x = SemiSymTensor::new_from_slices(vec![m.clone()]).unwrap();
        let mat = matricize_upper(&x);
        assert_eq!(mat.matrix().row(0).iter().copied().collect::<Vec<_>>(), vec![a, b, c]);
        assert_eq!(unuvec(uvec(&m).as_slice(), 3).unwrap(), m);

        let two = DMatrix::from_row_slice(2, 2, &[4.0, 0.7, 0.7, 9.0]);
        let x = SemiSymTensor::new_from_slices(vec![two]).unwrap();
        assert_eq!(matricize_upper(&x).matrix().shape(), (1, 1));
        assert_eq!(matricize_upper(&x).matrix()[(0, 0)], 0.7);

        assert!(matches!(unuvec(&[1.0, 2.0], 3), Err(Error::LengthNotTriangular { len: 2 })));
        assert_eq!(p_from_pairs(3), Some(3));
        assert_eq!(p_from_pairs(4), None);
        assert_eq!(p_from_pairs(0), Some(1));
    }

    #[test]
    fn frobenius_examples() {
        assert_eq!(frob_norm(&SemiSymTensor::zeros(3, 2)), 0.0);
        let x = SemiSymTensor::new_from_slices(vec![eye(3); 5]).unwrap();
        assert_relative_eq!(frob_norm(&x), 15f64.sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn ttm_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = random_tensor(4, 3, &mut rng);
        let same = ttm(&x, &eye(3), 3).unwrap();
        assert_eq!(same.slices(), x.slices());

        let v = linalg::random_stiefel(4, 2, &mut rng);
        let u = linalg::random_unit(3, &mut rng, false);
        let y = rank1_outer(2.5, &v, &u).unwrap();
        let proj = eye(4) - &v * v.transpose();
        let z = ttm(&y, &proj, 1).unwrap().ttm(&proj, 2).unwrap();
        assert!(z.frob_norm() < 1e-13);

        let pu = eye(3) - &u * u.transpose();
        let w = ttm(&x, &pu, 3).unwrap().into_semisym().unwrap();
        assert!(ttv3(&w, &u).unwrap().norm() < 1e-13);

        assert!(ttm(&x, &eye(3), 1).is_err());
        assert!(ttm(&x, &eye(4), 4).is_err());
    }

    #[test]
    fn mode_products_compose_in_written_order() {
        // X x_1 A x_1 B = X x_1 (AB)
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = random_tensor(3, 2, &mut rng);
        let a = DMatrix::from_fn(3, 3, |_, _| rng.random::<f64>());
        let b = DMatrix::from_fn(3, 2, |_, _| rng.random::<f64>());
        let lhs = ttm(&x, &a, 1).unwrap().ttm(&b, 1).unwrap();
        let rhs = ttm(&x, &(&a * &b), 1).unwrap();
        for (l, r) in lhs.slices().iter().zip(rhs.slices()) {
            assert_relative_eq!(l, r, epsilon = 1e-13);
        }
    }

    #[test]
    fn ropnorm_examples() {
        let x = SemiSymTensor::new_from_slices(vec![eye(3); 4]).unwrap();
        assert_relative_eq!(ropnorm_upper_bound(&x, 2).unwrap(), 2.0 * 2.0, epsilon = 1e-12);

        let z = SemiSymTensor::zeros(3, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(ropnorm_upper_bound(&z, 1).unwrap(), 0.0);
        assert_eq!(ropnorm_sampled_lower(&z, 1, 10, &mut rng).unwrap(), 0.0);

        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, -5.0]));
        let x = SemiSymTensor::new_from_slices(vec![d]).unwrap();
        assert_relative_eq!(ropnorm_upper_bound(&x, 1).unwrap(), 5.0, epsilon = 1e-12);

        assert!(ropnorm_upper_bound(&x, 3).is_err());
        assert!(ropnorm_sampled_lower(&x, 1, 0, &mut rng).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;
        use rand::Rng;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(48))]

            #[test]
            fn linear_adjoint_and_symmetric(seed in any::<u64>(), p in 2usize..7, t in 1usize..6, a in -3.0f64..3.0, b in -3.0f64..3.0) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let x = random_tensor(p, t, &mut rng);
                let y = random_tensor(p, t, &mut rng);
                let r = 1 + (seed as usize) % p;
                let v = linalg::random_stiefel(p, r, &mut rng);
                let u = DVector::from_fn(t, |_, _| rng.random::<f64>() - 0.5);

                // linearity of the trace-product
                let lhs = trace_product(&x.axpby(a, &y, b).unwrap(), &v).unwrap();
                let rhs = trace_product(&x, &v).unwrap() * a + trace_product(&y, &v).unwrap() * b;
                prop_assert!((lhs - rhs).amax() <= 1e-10);

                // adjoint identity
                let outer = rank1_outer(1.0, &v, &u).unwrap();
                let l = frob_inner(&x, &outer).unwrap();
                let rr = trace_product(&x, &v).unwrap().dot(&u);
                prop_assert!((l - rr).abs() <= 1e-10 * l.abs().max(1.0));

                // symmetry of derived objects
                let m = ttv3(&x, &u).unwrap();
                prop_assert!(max_asymmetry(&m) <= 1e-10);
                for s in outer.slices() {
                    prop_assert!(max_asymmetry(s) <= 1e-10);
                }
                let proj = DMatrix::identity(p, p) - &v * v.transpose();
                let z = ttm(&x, &proj, 1).unwrap().ttm(&proj, 2).unwrap();
                for s in z.slices() {
                    prop_assert!(max_asymmetry(s) <= 1e-10);
                }
            }

            #[test]
            fn matricization_keeps_off_diagonal_energy(seed in any::<u64>(), p in 1usize..8, t in 1usize..5) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let x = random_tensor(p, t, &mut rng);
                let m = matricize_upper(&x);
                let mut brute = 0.0;
                for tt in 0..t {
                    for i in 0..p {
                        for j in (i + 1)..p {
                            brute += x.get(i, j, tt).powi(2);
                        }
                    }
                }
                prop_assert!((m.matrix().norm_squared() - brute).abs() <= 1e-12 * brute.max(1.0));
            }

            #[test]
            fn sampled_lower_never_exceeds_upper(seed in any::<u64>(), p in 1usize..7, t in 1usize..5) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let x = random_tensor(p, t, &mut rng);
                let r = 1 + (seed as usize) % p;
                let lo = ropnorm_sampled_lower(&x, r, 20, &mut rng).unwrap();
                let hi = ropnorm_upper_bound(&x, r).unwrap();
                prop_assert!(lo <= hi);
            }
        }
    }
}
