//! Single-factor rank-`r` fit by alternating eigen (V) and trace-product (u) updates.

use log::warn;
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, EigenSelection};
use crate::tensor::{self, SemiSymTensor};

/// One component `d * V o V o u`.
#[derive(Debug, Clone, PartialEq)]
pub struct Factor {
    /// Unit loading vector over slices.
    pub u: DVector<f64>,
    /// `p x r` principal-network basis. Orthonormal except in eigen-scaled mode.
    pub v: DMatrix<f64>,
    pub d: f64,
}

impl Factor {
    pub fn rank(&self) -> usize {
        self.v.ncols()
    }

    /// `d * V o V o u` as a tensor.
    pub fn to_tensor(&self) -> Result<SemiSymTensor> {
        tensor::rank1_outer(self.d, &self.v, &self.u)
    }

    /// The principal network `V V^T`.
    pub fn network(&self) -> DMatrix<f64> {
        &self.v * self.v.transpose()
    }
}

/// Starting loading vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Init {
    /// `1_T / sqrt(T)`.
    Stable,
    /// Uniform on the sphere, drawn from the given seed.
    Random(u64),
    Given(Vec<f64>),
}

#[derive(Debug, Clone)]
pub struct FitOptions {
    pub rank: usize,
    pub max_iter: usize,
    pub tol: f64,
    pub init: Init,
    /// Scale eigenvectors by `sqrt(|lambda|)` in the V-update. The returned V
    /// is then not orthonormal.
    pub eigen_scaled: bool,
    /// Symmetric `T x T` matrix `S >= I`; switches to the smoothed u-update.
    pub smoother: Option<DMatrix<f64>>,
    pub selection: EigenSelection,
}

impl FitOptions {
    pub fn new(rank: usize) -> Self {
        Self {
            rank,
            max_iter: 200,
            tol: 1e-8,
            init: Init::Stable,
            eigen_scaled: false,
            smoother: None,
            selection: EigenSelection::Magnitude,
        }
    }

    pub fn with_init(mut self, init: Init) -> Self {
        self.init = init;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn with_smoother(mut self, s: DMatrix<f64>) -> Self {
        self.smoother = Some(s);
        self
    }

    pub fn with_selection(mut self, selection: EigenSelection) -> Self {
        self.selection = selection;
        self
    }

    pub fn eigen_scaled(mut self, on: bool) -> Self {
        self.eigen_scaled = on;
        self
    }

    pub fn validate(&self, p: usize, t: usize) -> Result<()> {
        if self.rank == 0 {
            return Err(Error::InvalidOptions("rank must be >= 1".into()));
        }
        if self.rank > p {
            return Err(Error::RankTooLarge {
                rank: self.rank,
                dim: p,
            });
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidOptions(format!("tol must be > 0, got {}", self.tol)));
        }
        if let Some(s) = &self.smoother {
            if s.shape() != (t, t) {
                return Err(Error::DimensionMismatch(format!(
                    "smoother is {}x{}, expected {t}x{t}",
                    s.nrows(),
                    s.ncols()
                )));
            }
            if tensor::max_asymmetry(s) > tensor::symmetry_tolerance(s) {
                return Err(Error::InvalidOptions("smoother must be symmetric".into()));
            }
            let min_eig = nalgebra::SymmetricEigen::new(s.clone()).eigenvalues.min();
            if min_eig < 1.0 - 1e-8 {
                return Err(Error::InvalidOptions(format!(
                    "smoother must satisfy S >= I (min eigenvalue {min_eig})"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub iterations: usize,
    /// `<X, V o V o u>` after each full iteration.
    pub objective: Vec<f64>,
    /// `||u^(k) - u^(k-1)||` for each iteration.
    pub u_change: Vec<f64>,
    pub converged: bool,
}

/// Starting vector for the given scheme.
pub fn init_u(init: &Init, t: usize) -> Result<DVector<f64>> {
    if t == 0 {
        return Err(Error::InvalidParameter("T must be >= 1".into()));
    }
    match init {
        Init::Stable => Ok(DVector::from_element(t, 1.0 / (t as f64).sqrt())),
        Init::Random(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            Ok(linalg::random_unit(t, &mut rng, false))
        }
        Init::Given(u0) => {
            if u0.len() != t {
                return Err(Error::DimensionMismatch(format!(
                    "initial vector has length {}, expected {t}",
                    u0.len()
                )));
            }
            let u = DVector::from_column_slice(u0);
            let norm = u.norm();
            if !((norm - 1.0).abs() <= 1e-6) {
                return Err(Error::InvalidGivenInit { norm });
            }
            if norm == 1.0 {
                Ok(u)
            } else {
                warn!("given initial vector has norm {norm}; renormalizing");
                Ok(u / norm)
            }
        }
    }
}

/// Leading `r` eigenvectors of `X x_3 u`, optionally scaled by `sqrt(|lambda|)`.
pub fn v_update(
    x: &SemiSymTensor,
    u: &DVector<f64>,
    r: usize,
    eigen_scaled: bool,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let target = tensor::ttv3(x, u)?;
    let (basis, values) = v_update_target(&target, r, EigenSelection::Magnitude)?;
    Ok((scale_basis(basis, &values, eigen_scaled), values))
}

fn v_update_target(
    target: &DMatrix<f64>,
    r: usize,
    selection: EigenSelection,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let op = tensor::sym_opnorm(target);
    if !(op >= 1e-14) {
        return Err(Error::DegenerateIterate(format!(
            "V-update target has operator norm {op:e}"
        )));
    }
    let eig = linalg::sym_eigen_select(target, r, selection)?;
    Ok((eig.vectors.into_inner(), eig.values))
}

fn scale_basis(mut basis: DMatrix<f64>, values: &DVector<f64>, scaled: bool) -> DMatrix<f64> {
    if scaled {
        for (k, mut col) in basis.column_iter_mut().enumerate() {
            col *= values[k].abs().sqrt();
        }
    }
    basis
}

/// Unit vector along `[X; V]`.
pub fn u_update(x: &SemiSymTensor, v: &DMatrix<f64>) -> Result<DVector<f64>> {
    linalg::normalize(&tensor::trace_product(x, v)?)
}

/// Smoothed u-update `S^{-1} y / ||y||_{S^{-1}}` with `y = [X; V]`, so `u^T S u = 1`.
pub fn u_update_smoothed(
    x: &SemiSymTensor,
    v: &DMatrix<f64>,
    s: &DMatrix<f64>,
) -> Result<DVector<f64>> {
    let y = tensor::trace_product(x, v)?;
    smoothed_direction(&y, s)
}

fn smoothed_direction(y: &DVector<f64>, s: &DMatrix<f64>) -> Result<DVector<f64>> {
    if s.shape() != (y.len(), y.len()) {
        return Err(Error::DimensionMismatch(format!(
            "smoother is {}x{}, vector has length {}",
            s.nrows(),
            s.ncols(),
            y.len()
        )));
    }
    let chol = s.clone().cholesky().ok_or(Error::SingularSmoother)?;
    let z = chol.solve(y);
    let q = y.dot(&z);
    if !(q.sqrt() >= 1e-14) {
        return Err(Error::ZeroVector(q.max(0.0).sqrt()));
    }
    Ok(z / q.sqrt())
}

/// Perturbations injected into the update targets, one call per iteration.
pub(crate) trait UpdateHook {
    fn v_target(&mut self, iter: usize, target: &mut DMatrix<f64>) -> Result<()>;
    fn u_target(&mut self, iter: usize, target: &mut DVector<f64>) -> Result<()>;
}

/// Fits a single factor. Non-convergence within `max_iter` is reported through
/// `FitDiagnostics::converged`, not as an error.
pub fn fit_single_factor(
    x: &SemiSymTensor,
    opts: &FitOptions,
) -> Result<(Factor, FitDiagnostics)> {
    fit_single_factor_observed(x, opts, |_, _, _| {})
}

/// Like [`fit_single_factor`], calling `observer(k, u, V)` after iteration `k` (1-based).
pub fn fit_single_factor_observed<F>(
    x: &SemiSymTensor,
    opts: &FitOptions,
    mut observer: F,
) -> Result<(Factor, FitDiagnostics)>
where
    F: FnMut(usize, &DVector<f64>, &DMatrix<f64>),
{
    fit_with_hook(x, opts, None, &mut observer)
}

pub(crate) fn fit_with_hook(
    x: &SemiSymTensor,
    opts: &FitOptions,
    mut hook: Option<&mut dyn UpdateHook>,
    observer: &mut dyn FnMut(usize, &DVector<f64>, &DMatrix<f64>),
) -> Result<(Factor, FitDiagnostics)> {
    opts.validate(x.p(), x.t())?;
    let r = opts.rank;
    let mut u = init_u(&opts.init, x.t())?;
    if let Some(s) = &opts.smoother {
        // start on the constraint surface u^T S u = 1
        u /= u.dot(&(s * &u)).sqrt();
    }

    let mut diag = FitDiagnostics::default();
    let mut basis_prev: Option<DMatrix<f64>> = None;
    let mut v = DMatrix::zeros(x.p(), r);

    for k in 1..=opts.max_iter {
        let mut target = tensor::ttv3(x, &u)?;
        if let Some(h) = hook.as_deref_mut() {
            h.v_target(k, &mut target)?;
        }
        let (basis, values) = v_update_target(&target, r, opts.selection)?;
        v = scale_basis(basis.clone(), &values, opts.eigen_scaled);

        let mut y = tensor::trace_product(x, &v)?;
        if let Some(h) = hook.as_deref_mut() {
            h.u_target(k, &mut y)?;
        }
        let u_next = match &opts.smoother {
            Some(s) => smoothed_direction(&y, s),
            None => linalg::normalize(&y),
        }
        .map_err(|e| Error::DegenerateIterate(format!("u-update at iteration {k}: {e}")))?;

        let du = (&u_next - &u).norm();
        let dv = match &basis_prev {
            Some(prev) => linalg::sin_theta_frob(prev, &basis)?,
            None => f64::INFINITY,
        };
        u = u_next;
        basis_prev = Some(basis);

        diag.iterations = k;
        diag.u_change.push(du);
        diag.objective.push(tensor::trace_product(x, &v)?.dot(&u));
        observer(k, &u, &v);

        if du < opts.tol && dv < opts.tol {
            diag.converged = true;
            break;
        }
    }
    if !diag.converged {
        warn!(
            "single-factor fit did not converge in {} iterations (last u-change {:e})",
            opts.max_iter,
            diag.u_change.last().copied().unwrap_or(f64::NAN)
        );
    }

    let mut obj = tensor::trace_product(x, &v)?.dot(&u);
    if obj < 0.0 {
        u.neg_mut();
        obj = -obj;
    }
    let factor = Factor {
        u,
        v,
        d: obj / r as f64,
    };
    Ok((factor, diag))
}
