//! CUSUM tensors and changepoint localization.
//!
//! For a series `X_1..X_T` the CUSUM tensor has `T - 1` slices
//!
//! ```text
//! C_t = sqrt(T / (t (T - t))) * (S_t - (t / T) S_T),   S_t = X_1 + ... + X_t.
//! ```
//!
//! A mean shift at `tau` makes every `C_t` a multiple of the same matrix, with
//! weight peaking at `t = tau`, so the loading vector of a single-factor fit on
//! `C` localizes the change.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::decompose::{fit_single_factor, Factor, FitDiagnostics, FitOptions};
use crate::error::{Error, Result};
use crate::linalg::EigenSelection;
use crate::tensor::{self, SemiSymTensor};

/// Which CUSUM weighting to use.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CusumForm {
    /// `S_t - (t/T) S_T`. Vanishes on constant series.
    #[default]
    Standard,
    /// `(t/T) S_t - S_T`. Kept for comparison; does not vanish on constant series.
    AsPrinted,
}

#[derive(Debug, Clone)]
pub struct ChangepointOptions {
    /// Fit options for the CUSUM tensor. The rank is taken from the `r` argument.
    pub fit: FitOptions,
    pub form: CusumForm,
}

impl Default for ChangepointOptions {
    fn default() -> Self {
        Self {
            fit: FitOptions::new(1).with_selection(EigenSelection::SignConsistent),
            form: CusumForm::Standard,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ChangepointResult {
    /// Unit loading vector of length `T - 1`.
    pub u_hat: DVector<f64>,
    /// Estimated change index in `1..=T-1`: the last slice before the change.
    pub tau_hat: usize,
    pub factor: Factor,
    pub diagnostics: FitDiagnostics,
    /// `|u_hat[tau_hat]|`.
    pub score: f64,
}

/// Standard CUSUM tensor.
pub fn cusum_tensor(x: &SemiSymTensor) -> Result<SemiSymTensor> {
    cusum_tensor_with(x, CusumForm::Standard)
}

pub fn cusum_tensor_with(x: &SemiSymTensor, form: CusumForm) -> Result<SemiSymTensor> {
    let t_len = x.t();
    if t_len < 2 {
        return Err(Error::TooFewSlices { got: t_len, min: 2 });
    }
    let tf = t_len as f64;
    let slices = match form {
        CusumForm::Standard => {
            // Partial sums of X_s - X_1: the X_1 offset cancels in exact
            // arithmetic and makes constant series come out exactly zero.
            let base = x.slice(0);
            let mut partial = Vec::with_capacity(t_len);
            let mut acc = DMatrix::<f64>::zeros(x.p(), x.p());
            for s in x.slices() {
                acc += s - base;
                partial.push(acc.clone());
            }
            let total = &partial[t_len - 1];
            (1..t_len)
                .map(|t| {
                    let tt = t as f64;
                    let w = (tf / (tt * (tf - tt))).sqrt();
                    (&partial[t - 1] - total * (tt / tf)) * w
                })
                .collect::<Vec<_>>()
        }
        CusumForm::AsPrinted => {
            let mut partial = Vec::with_capacity(t_len);
            let mut acc = DMatrix::<f64>::zeros(x.p(), x.p());
            for s in x.slices() {
                acc += s;
                partial.push(acc.clone());
            }
            let total = &partial[t_len - 1];
            (1..t_len)
                .map(|t| {
                    let tt = t as f64;
                    let w = (tf / (tt * (tf - tt))).sqrt();
                    (&partial[t - 1] * (tt / tf) - total) * w
                })
                .collect::<Vec<_>>()
        }
    };
    SemiSymTensor::new_from_slices(slices)
}

/// 1-based index of the largest `|u_i|`, lowest index on ties.
pub fn argmax_abs(u: &DVector<f64>) -> usize {
    let mut best = 0;
    for (i, v) in u.iter().enumerate() {
        if v.abs() > u[best].abs() {
            best = i;
        }
    }
    best + 1
}

/// Fits a rank-`r` factor to the CUSUM tensor of `x` and reads the change
/// index off the loading vector.
pub fn detect_changepoint(
    x: &SemiSymTensor,
    r: usize,
    opts: &ChangepointOptions,
) -> Result<ChangepointResult> {
    if x.t() < 3 {
        return Err(Error::TooFewSlices { got: x.t(), min: 3 });
    }
    let c = cusum_tensor_with(x, opts.form)?;
    let cusum_norm = tensor::frob_norm(&c);
    let data_norm = tensor::frob_norm(x);
    if cusum_norm <= 1e-12 * data_norm || cusum_norm == 0.0 {
        return Err(Error::DegenerateSeries {
            cusum_norm,
            data_norm,
        });
    }
    let mut fit = opts.fit.clone();
    fit.rank = r;
    let (factor, diagnostics) = fit_single_factor(&c, &fit)?;
    let tau_hat = argmax_abs(&factor.u);
    Ok(ChangepointResult {
        u_hat: factor.u.clone(),
        tau_hat,
        score: factor.u[tau_hat - 1].abs(),
        factor,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg;
    use crate::simulate;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sym(rng: &mut ChaCha8Rng, p: usize) -> DMatrix<f64> {
        simulate::goe_noise(p, 1, 1.0, rng).pop().unwrap()
    }

    fn shift_series(a: &DMatrix<f64>, b: &DMatrix<f64>, t_len: usize, tau: usize) -> SemiSymTensor {
        let slices = (1..=t_len)
            .map(|t| if t <= tau { a.clone() } else { b.clone() })
            .collect();
        SemiSymTensor::new_from_slices(slices).unwrap()
    }

    #[test]
    fn constant_series_is_exactly_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = sym(&mut rng, 5);
        let x = SemiSymTensor::new_from_slices(vec![a; 9]).unwrap();
        let c = cusum_tensor(&x).unwrap();
        assert_eq!(c.t(), 8);
        assert!(c.slices().iter().all(|s| s.iter().all(|&v| v == 0.0)));
        assert!(matches!(
            detect_changepoint(&x, 2, &ChangepointOptions::default()),
            Err(Error::DegenerateSeries { .. })
        ));
        // the printed weighting does not vanish here
        let printed = cusum_tensor_with(&x, CusumForm::AsPrinted).unwrap();
        assert!(tensor::frob_norm(&printed) > 0.0);
    }

    #[test]
    fn two_slices() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (a, b) = (sym(&mut rng, 4), sym(&mut rng, 4));
        let x = SemiSymTensor::new_from_slices(vec![a.clone(), b.clone()]).unwrap();
        let c = cusum_tensor(&x).unwrap();
        let expected = (&a - &b) / 2f64.sqrt();
        assert_eq!(c.t(), 1);
        assert!((c.slice(0) - expected).amax() < 1e-14);
    }

    #[test]
    fn too_few_slices() {
        let x = SemiSymTensor::zeros(3, 1);
        assert!(matches!(cusum_tensor(&x), Err(Error::TooFewSlices { got: 1, .. })));
        let x = SemiSymTensor::zeros(3, 2);
        assert!(matches!(
            detect_changepoint(&x, 1, &ChangepointOptions::default()),
            Err(Error::TooFewSlices { got: 2, min: 3 })
        ));
    }

    /// Direct evaluation of the standard weighting for one entry.
    fn brute_cusum(series: &[f64], t: usize) -> f64 {
        let big_t = series.len() as f64;
        let tt = t as f64;
        let head: f64 = series[..t].iter().sum();
        let all: f64 = series.iter().sum();
        (big_t / (tt * (big_t - tt))).sqrt() * (head - tt / big_t * all)
    }

    #[test]
    fn mean_shift_entries_peak_at_change() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = 5;
        let a = sym(&mut rng, p);
        let zero = DMatrix::zeros(p, p);
        for (t_len, tau) in [(10, 3), (12, 6), (9, 8), (7, 1)] {
            let x = shift_series(&zero, &a, t_len, tau);
            let c = cusum_tensor(&x).unwrap();
            for i in 0..p {
                for j in 0..p {
                    let series: Vec<f64> = (0..t_len).map(|t| x.get(i, j, t)).collect();
                    let mut best = (0, 0.0f64);
                    for t in 1..t_len {
                        let v = brute_cusum(&series, t);
                        assert!((c.get(i, j, t - 1) - v).abs() < 1e-12);
                        if v.abs() > best.1 + 1e-12 {
                            best = (t, v.abs());
                        }
                    }
                    if a[(i, j)] != 0.0 {
                        assert_eq!(best.0, tau);
                    }
                }
            }
        }
    }

    #[test]
    fn noiseless_projector_shift_is_located() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (p, r, t_len) = (12, 2, 16);
        let q = linalg::random_stiefel(p, 2 * r, &mut rng);
        let v1 = q.columns(0, r).into_owned();
        let v2 = q.columns(r, r).into_owned();
        let a = &v1 * v1.transpose() * 5.0;
        let b = &v2 * v2.transpose() * 5.0;
        for tau in [3, 8, 13] {
            let x = shift_series(&a, &b, t_len, tau);
            let res = detect_changepoint(&x, r, &ChangepointOptions::default()).unwrap();
            // brute force: the weight profile of the single CUSUM direction
            let profile: Vec<f64> = (1..t_len)
                .map(|t| {
                    let s: Vec<f64> = (1..=t_len).map(|k| if k <= tau { 1.0 } else { 0.0 }).collect();
                    brute_cusum(&s, t).abs()
                })
                .collect();
            let brute = argmax_abs(&DVector::from_vec(profile));
            assert_eq!(res.tau_hat, brute);
            assert_eq!(res.tau_hat, tau);
            assert!((res.score - res.u_hat.amax()).abs() == 0.0);

            let rev = detect_changepoint(&x.reversed(), r, &ChangepointOptions::default()).unwrap();
            assert_eq!(rev.tau_hat, t_len - tau);
        }
    }

    #[test]
    fn translation_and_scale_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (p, t_len) = (6, 10);
        let x = SemiSymTensor::new_from_slices(simulate::goe_noise(p, t_len, 1.0, &mut rng)).unwrap();
        let shift = sym(&mut rng, p);
        let shifted = SemiSymTensor::new_from_slices(
            x.slices().iter().map(|s| s + &shift).collect(),
        )
        .unwrap();
        let c = cusum_tensor(&x).unwrap();
        let c_shift = cusum_tensor(&shifted).unwrap();
        assert!(tensor::frob_norm(&c.sub(&c_shift).unwrap()) <= 1e-10 * tensor::frob_norm(&c));

        let c_scaled = cusum_tensor(&x.scale(3.5)).unwrap();
        assert!(tensor::frob_norm(&c_scaled.sub(&c.scale(3.5)).unwrap()) <= 1e-10 * tensor::frob_norm(&c));

        let opts = ChangepointOptions::default();
        let base = detect_changepoint(&x, 2, &opts).unwrap();
        let moved = detect_changepoint(&shifted, 2, &opts).unwrap();
        let scaled = detect_changepoint(&x.scale(3.5), 2, &opts).unwrap();
        assert_eq!(base.tau_hat, moved.tau_hat);
        assert_eq!(base.tau_hat, scaled.tau_hat);
        assert!(linalg::sign_aligned_distance(&base.u_hat, &scaled.u_hat).unwrap() < 1e-8);
    }

    #[test]
    fn argmax_ties_go_low() {
        let u = DVector::from_vec(vec![0.1, -0.5, 0.5, 0.2]);
        assert_eq!(argmax_abs(&u), 2);
    }
}
