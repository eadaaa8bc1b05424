//! Slowly varying loadings recovered with a second-difference smoother on u.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sstpca::simulate::goe_noise;
use sstpca::tensor::rank1_outer;
use sstpca::{fit_single_factor, linalg, FitOptions, SemiSymTensor};

/// `I + lambda D^T D` with `D` the second-difference operator.
fn smoother(t: usize, lambda: f64) -> DMatrix<f64> {
    let d = DMatrix::from_fn(t - 2, t, |i, j| match j as isize - i as isize {
        0 | 2 => 1.0,
        1 => -2.0,
        _ => 0.0,
    });
    DMatrix::identity(t, t) + d.transpose() * d * lambda
}

fn main() -> sstpca::Result<()> {
    let (p, t) = (30, 40);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let u = linalg::normalize(&nalgebra::DVector::from_fn(t, |k, _| 1.5 + (k as f64 / 6.0).sin()))?;
    let v = linalg::random_stiefel(p, 1, &mut rng);
    let x = rank1_outer(12.0, &v, &u)?.add(&SemiSymTensor::new_from_slices(goe_noise(p, t, 1.0, &mut rng))?)?;

    for lambda in [0.0, 1.0, 10.0, 100.0] {
        let opts = if lambda == 0.0 {
            FitOptions::new(1)
        } else {
            FitOptions::new(1).with_smoother(smoother(t, lambda))
        };
        let (f, _) = fit_single_factor(&x, &opts)?;
        let u_hat = linalg::normalize(&f.u)?;
        println!(
            "lambda {:>6.1}: |u_hat - u*| {:.4}, armse(V) {:.4}",
            lambda,
            linalg::sign_aligned_distance(&u_hat, &u)?,
            linalg::armse(&f.v, &v)?
        );
    }
    Ok(())
}
