//! Noiseless rank-3 spike: one factor is recovered to machine precision.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sstpca::simulate::{spike_model, UMode};
use sstpca::{fit_single_factor, linalg, FitOptions};

fn main() -> sstpca::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (x, truth) = spike_model(40, 20, 3, 3.0, 0.0, UMode::Sphere, &mut rng)?;

    let (f, diag) = fit_single_factor(&x, &FitOptions::new(3))?;

    println!("iterations      {}", diag.iterations);
    println!("armse(V)        {:.2e}", linalg::armse(&f.v, &truth.v_star)?);
    println!("|u - u*|        {:.2e}", linalg::sign_aligned_distance(&f.u, &truth.u_star)?);
    println!("d               {:.12}", f.d);
    println!("objective trace {:?}", diag.objective);
    Ok(())
}
