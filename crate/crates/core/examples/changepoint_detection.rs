//! Principal network switches between two orthogonal rank-2 patterns after slice 12.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sstpca::changepoint::{detect_changepoint, ChangepointOptions};
use sstpca::simulate::{effective_snr, mean_shift_series};

fn main() -> sstpca::Result<()> {
    let (p, t, r, tau) = (30, 24, 2, 12);
    let d = 2.0 * (p as f64 * (t as f64).ln()).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (x, truth) = mean_shift_series(p, t, r, tau, d, 1.0, &mut rng)?;

    let res = detect_changepoint(&x, r, &ChangepointOptions::default())?;

    println!("effective snr  {:.2}", effective_snr(d, p, t));
    println!("true tau       {}", truth.tau);
    println!("estimated tau  {}", res.tau_hat);
    for (k, w) in res.u_hat.iter().enumerate() {
        let bar = "#".repeat((w.abs() * 60.0).round() as usize);
        println!("{:>3} {:>7.3} {bar}", k + 1, w);
    }
    Ok(())
}
