//! Multi-factor fits by successive deflation.
//!
//! Three schemes remove a fitted factor `(u, V, d)` from the working tensor:
//!
//! | scheme     | update                                                          |
//! |------------|-----------------------------------------------------------------|
//! | Hotelling  | `X_t - d u_t V V^T`                                             |
//! | Projection | `X x_1 (I - VV^T) x_2 (I - VV^T) x_3 (I - uu^T)`                |
//! | Schur      | `X_t - X_t V (V^T X_t V)^{-1} V^T X_t`, then `x_3 (I - uu^T)`   |
//!
//! All three make the residual orthogonal to `V o V o u`. Projection and Schur
//! also annihilate `u` along mode 3 and `V` along modes 1 and 2, and Schur keeps
//! every later residual orthogonal to earlier `V`s.

use log::warn;
use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decompose::{fit_single_factor, Factor, FitDiagnostics, FitOptions};
use crate::error::{Error, Result};
use crate::tensor::{self, SemiSymTensor};

/// Condition number above which a Schur block counts as singular.
pub const SCHUR_MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Hotelling,
    Projection,
    Schur,
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "hotelling" | "hd" => Ok(Scheme::Hotelling),
            "projection" | "pd" => Ok(Scheme::Projection),
            "schur" | "sd" => Ok(Scheme::Schur),
            other => Err(Error::Config(format!("unknown deflation scheme '{other}'"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Decomposition {
    pub factors: Vec<Factor>,
    pub diagnostics: Vec<FitDiagnostics>,
    pub scheme: Scheme,
    /// `||X^k||_F` for `k = 1..=K+1`; the first entry is `||X||_F`.
    pub residual_norms: Vec<f64>,
    /// Explained fraction `1 - ||X^{k+1}||^2 / ||X||^2` after each factor.
    pub cpve: Vec<f64>,
    /// Residual fraction `||X^{k+1}||^2 / ||X||^2` after each factor.
    pub residual_ratio: Vec<f64>,
    /// Whether the norm could increase at some step (Schur on non-PSD slices).
    pub norm_monotonicity_guaranteed: bool,
    pub residual: SemiSymTensor,
}

impl Decomposition {
    /// `sum_k d_k V_k o V_k o u_k`.
    pub fn reconstruct(&self) -> Result<SemiSymTensor> {
        let mut acc = SemiSymTensor::zeros(self.residual.p(), self.residual.t());
        for f in &self.factors {
            acc = acc.add(&f.to_tensor()?)?;
        }
        Ok(acc)
    }
}

fn check_factor(x: &SemiSymTensor, f: &Factor) -> Result<()> {
    if f.v.nrows() != x.p() || f.u.len() != x.t() {
        return Err(Error::DimensionMismatch(format!(
            "factor is {}x{} with {} loadings, tensor is p = {}, T = {}",
            f.v.nrows(),
            f.v.ncols(),
            f.u.len(),
            x.p(),
            x.t()
        )));
    }
    Ok(())
}

/// `Y_s = Z_s - u_s * sum_t u_t Z_t`, i.e. mode-3 product with `I - u u^T`.
fn project_out_loading(slices: Vec<DMatrix<f64>>, u: &nalgebra::DVector<f64>) -> Vec<DMatrix<f64>> {
    let mut mean = DMatrix::<f64>::zeros(slices[0].nrows(), slices[0].ncols());
    for (w, z) in u.iter().zip(&slices) {
        mean.zip_apply(z, |m, b| *m += *w * b);
    }
    slices
        .into_par_iter()
        .enumerate()
        .map(|(s, mut z)| {
            z.zip_apply(&mean, |a: &mut f64, m: f64| *a -= u[s] * m);
            z
        })
        .collect()
}

fn schur_slice(slice: usize, a: &DMatrix<f64>, v: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let w = a * v;
    let block = v.transpose() * &w;
    let sv = SymmetricEigen::new(block.clone()).eigenvalues.map(f64::abs);
    let (hi, lo) = (sv.max(), sv.min());
    let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if !(condition < SCHUR_MAX_CONDITION) {
        return Err(Error::SingularSchurBlock { slice, condition });
    }
    let inv = block
        .try_inverse()
        .ok_or(Error::SingularSchurBlock { slice, condition })?;
    Ok(a - &w * inv * w.transpose())
}

/// Removes `f` from `x` with the given scheme.
pub fn deflate(x: &SemiSymTensor, f: &Factor, scheme: Scheme) -> Result<SemiSymTensor> {
    check_factor(x, f)?;
    match scheme {
        Scheme::Hotelling => x.sub(&f.to_tensor()?),
        Scheme::Projection => {
            let p = x.p();
            let proj = DMatrix::<f64>::identity(p, p) - &f.v * f.v.transpose();
            let sandwiched = tensor::sandwich(x, &proj)?.into_slices();
            SemiSymTensor::new_from_slices(project_out_loading(sandwiched, &f.u))
        }
        Scheme::Schur => {
            let schur: Vec<DMatrix<f64>> = x
                .slices()
                .par_iter()
                .enumerate()
                .map(|(t, a)| schur_slice(t, a, &f.v))
                .collect::<Result<_>>()?;
            SemiSymTensor::new_from_slices(project_out_loading(schur, &f.u))
        }
    }
}

fn slicewise_psd(x: &SemiSymTensor) -> bool {
    x.slices().iter().all(|a| {
        let eig = SymmetricEigen::new(a.clone());
        let scale = eig.eigenvalues.amax().max(1e-300);
        eig.eigenvalues.min() >= -1e-10 * scale
    })
}

/// Fits `ranks.len()` factors, deflating after each with `scheme`.
///
/// `opts` supplies everything but the rank, which comes from `ranks`.
pub fn fit_multi(
    x: &SemiSymTensor,
    ranks: &[usize],
    scheme: Scheme,
    opts: &FitOptions,
) -> Result<Decomposition> {
    if ranks.is_empty() {
        return Err(Error::InvalidOptions("need at least one rank".into()));
    }
    let total = tensor::frob_norm(x);
    let total_sq = total * total;
    let mut residual = x.clone();
    let mut factors = Vec::with_capacity(ranks.len());
    let mut diagnostics = Vec::with_capacity(ranks.len());
    let mut residual_norms = vec![total];
    let mut cpve = Vec::with_capacity(ranks.len());
    let mut residual_ratio = Vec::with_capacity(ranks.len());
    let mut monotone = true;

    for (k, &rank) in ranks.iter().enumerate() {
        let mut step_opts = opts.clone();
        step_opts.rank = rank;
        let (factor, diag) =
            fit_single_factor(&residual, &step_opts).map_err(|e| Error::at_factor(k, e))?;
        if scheme == Scheme::Schur && !slicewise_psd(&residual) {
            warn!("factor {k}: residual is not slicewise PSD, Schur deflation may increase its norm");
            monotone = false;
        }
        let next = deflate(&residual, &factor, scheme).map_err(|e| Error::at_factor(k, e))?;
        let norm = tensor::frob_norm(&next);
        let ratio = if total_sq > 0.0 { norm * norm / total_sq } else { 0.0 };
        residual_norms.push(norm);
        residual_ratio.push(ratio);
        cpve.push(1.0 - ratio);
        factors.push(factor);
        diagnostics.push(diag);
        residual = next;
    }

    if factors.windows(2).any(|w| w[1].d > w[0].d) {
        warn!("fitted scales are not decreasing in fit order");
    }

    Ok(Decomposition {
        factors,
        diagnostics,
        scheme,
        residual_norms,
        cpve,
        residual_ratio,
        norm_monotonicity_guaranteed: monotone,
        residual,
    })
}

/// Orthogonality of a residual to a previously fitted factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrthogonalityReport {
    /// `|<X, V o V o u>|`.
    pub two_way: f64,
    /// `||X x_3 u||_F`.
    pub one_way_u: f64,
    /// `||X x_1 V||_F`.
    pub one_way_v_mode1: f64,
    /// `||X x_2 V||_F`.
    pub one_way_v_mode2: f64,
}

impl OrthogonalityReport {
    pub fn one_way_v(&self) -> f64 {
        self.one_way_v_mode1.max(self.one_way_v_mode2)
    }
}

pub fn orthogonality_report(x_next: &SemiSymTensor, f: &Factor) -> Result<OrthogonalityReport> {
    check_factor(x_next, f)?;
    let two_way = tensor::trace_product(x_next, &f.v)?.dot(&f.u).abs();
    let one_way_u = tensor::ttv3(x_next, &f.u)?.norm();
    let one_way_v_mode1 = tensor::ttm(x_next, &f.v, 1)?.frob_norm();
    let one_way_v_mode2 = tensor::ttm(x_next, &f.v, 2)?.frob_norm();
    Ok(OrthogonalityReport {
        two_way,
        one_way_u,
        one_way_v_mode1,
        one_way_v_mode2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg;
    use nalgebra::DVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn random_tensor(p: usize, t: usize, psd: bool, rng: &mut ChaCha8Rng) -> SemiSymTensor {
        let slices = (0..t)
            .map(|_| {
                let g = DMatrix::from_fn(p, p, |_, _| rng.sample::<f64, _>(StandardNormal));
                if psd {
                    &g * g.transpose()
                } else {
                    &g + g.transpose()
                }
            })
            .collect();
        SemiSymTensor::new_from_slices(slices).unwrap()
    }

    fn two_factor_tensor() -> (SemiSymTensor, [DMatrix<f64>; 2]) {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let (p, t) = (12, 8);
        let q = linalg::random_stiefel(p, 4, &mut rng);
        let v1 = q.columns(0, 2).into_owned();
        let v2 = q.columns(2, 2).into_owned();
        // u1 in the positive orthant so the stable start lands on the first factor
        let u1 = linalg::random_unit(t, &mut rng, true);
        let g = linalg::random_unit(t, &mut rng, false);
        let g = &g - &u1 * u1.dot(&g);
        let u2 = &g / g.norm();
        let x = tensor::rank1_outer(10.0, &v1, &u1)
            .unwrap()
            .add(&tensor::rank1_outer(5.0, &v2, &u2).unwrap())
            .unwrap();
        (x, [v1, v2])
    }

    #[test]
    fn hotelling_removes_exact_factor() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let v = linalg::random_stiefel(6, 2, &mut rng);
        let u = linalg::random_unit(4, &mut rng, false);
        let x = tensor::rank1_outer(3.0, &v, &u).unwrap();
        let f = Factor { u, v, d: 3.0 };
        let y = deflate(&x, &f, Scheme::Hotelling).unwrap();
        assert!(tensor::frob_norm(&y) < 1e-14);
    }

    #[test]
    fn projection_is_one_way_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = random_tensor(7, 5, false, &mut rng);
        let (f, _) = fit_single_factor(&x, &FitOptions::new(2)).unwrap();
        let y = deflate(&x, &f, Scheme::Projection).unwrap();
        let scale = tensor::frob_norm(&x);
        assert!(tensor::ttv3(&y, &f.u).unwrap().norm() <= 1e-10 * scale);
        let proj = &f.v * f.v.transpose();
        assert!(tensor::ttm(&y, &proj, 1).unwrap().frob_norm() <= 1e-10 * scale);
        let rep = orthogonality_report(&y, &f).unwrap();
        assert!(rep.two_way <= 1e-10 * scale);
        assert!(rep.one_way_u <= 1e-10 * scale);
        assert!(rep.one_way_v() <= 1e-10 * scale);
    }

    #[test]
    fn hotelling_is_two_way_only() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random_tensor(7, 5, false, &mut rng);
        let (f, _) = fit_single_factor(&x, &FitOptions::new(2)).unwrap();
        let y = deflate(&x, &f, Scheme::Hotelling).unwrap();
        let scale = tensor::frob_norm(&x);
        let rep = orthogonality_report(&y, &f).unwrap();
        assert!(rep.two_way <= 1e-10 * scale);
        // on noisy data the one-way terms do not vanish
        assert!(rep.one_way_v() > 1e-6 * scale);
    }

    #[test]
    fn schur_rejects_singular_block() {
        let e1 = DMatrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0]);
        let mut a = DMatrix::zeros(3, 3);
        a[(1, 1)] = 2.0;
        let x = SemiSymTensor::new_from_slices(vec![DMatrix::identity(3, 3), a]).unwrap();
        let f = Factor {
            u: DVector::from_vec(vec![1.0, 0.0]),
            v: e1,
            d: 1.0,
        };
        assert!(matches!(
            deflate(&x, &f, Scheme::Schur),
            Err(Error::SingularSchurBlock { slice: 1, .. })
        ));
    }

    #[test]
    fn schur_keeps_later_residuals_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = random_tensor(9, 6, true, &mut rng);
        let scale = tensor::frob_norm(&x);
        let dec = fit_multi(&x, &[2, 2, 2], Scheme::Schur, &FitOptions::new(1)).unwrap();
        let first = &dec.factors[0];
        let rep = orthogonality_report(&dec.residual, first).unwrap();
        assert!(rep.one_way_v() <= 1e-10 * scale);
        // the input is PSD, so the first step cannot increase the norm
        assert!(dec.residual_norms[1] <= dec.residual_norms[0] + 1e-10 * scale);
    }

    #[test]
    fn single_rank_matches_single_factor_fit() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = random_tensor(6, 4, false, &mut rng);
        let opts = FitOptions::new(3);
        let (f, _) = fit_single_factor(&x, &opts).unwrap();
        let dec = fit_multi(&x, &[3], Scheme::Hotelling, &opts).unwrap();
        assert_eq!(dec.factors[0], f);
    }

    #[test]
    fn exact_two_factor_model() {
        let (x, [v1, v2]) = two_factor_tensor();
        let opts = FitOptions::new(1).with_tol(1e-12).with_max_iter(500);
        for scheme in [Scheme::Hotelling, Scheme::Projection, Scheme::Schur] {
            let dec = fit_multi(&x, &[2, 2], scheme, &opts).unwrap();
            let (f1, f2) = (&dec.factors[0], &dec.factors[1]);
            assert!(linalg::armse(&f1.v, &v1).unwrap() <= 1e-6, "{scheme:?}");
            assert!(linalg::armse(&f2.v, &v2).unwrap() <= 1e-6, "{scheme:?}");
            assert!(f1.d > f2.d);
            for w in dec.residual_norms.windows(2) {
                assert!(w[1] < w[0], "{scheme:?}: {:?}", dec.residual_norms);
            }
            let recon = dec.reconstruct().unwrap();
            assert!(tensor::frob_norm(&recon.sub(&x).unwrap()) <= 1e-8);
        }
    }

    #[test]
    fn hotelling_telescopes() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x = random_tensor(8, 5, false, &mut rng);
        let dec = fit_multi(&x, &[1, 2, 3], Scheme::Hotelling, &FitOptions::new(1)).unwrap();
        let total = dec.reconstruct().unwrap().add(&dec.residual).unwrap();
        assert!(tensor::frob_norm(&total.sub(&x).unwrap()) <= 1e-10 * tensor::frob_norm(&x));
        assert_eq!(dec.cpve.len(), 3);
        for (c, r) in dec.cpve.iter().zip(&dec.residual_ratio) {
            assert!((0.0..=1.0).contains(c));
            assert!((c + r - 1.0).abs() < 1e-15);
        }
        assert!(dec.cpve.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn errors_carry_factor_index() {
        let x = SemiSymTensor::zeros(3, 2);
        match fit_multi(&x, &[1], Scheme::Hotelling, &FitOptions::new(1)) {
            Err(Error::AtFactor { index: 0, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        assert!(fit_multi(&x, &[], Scheme::Hotelling, &FitOptions::new(1)).is_err());
    }

    #[test]
    fn scheme_parsing() {
        assert_eq!("Hotelling".parse::<Scheme>().unwrap(), Scheme::Hotelling);
        assert_eq!("pd".parse::<Scheme>().unwrap(), Scheme::Projection);
        assert!("qr".parse::<Scheme>().is_err());
    }
}
