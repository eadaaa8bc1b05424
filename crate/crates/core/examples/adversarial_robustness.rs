//! Noiseless spike fitted while an adversary perturbs every update within a budget.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sstpca::simulate::{fit_adversarial_observed, spike_model, UMode, WorstOfRandomAdversary};
use sstpca::{linalg, FitOptions};

fn main() -> sstpca::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let d = 10.0;
    let (x, truth) = spike_model(30, 20, 1, d, 0.0, UMode::Sphere, &mut rng)?;

    for fraction in [0.0, 0.05, 0.1, 0.2] {
        let mut adversary = WorstOfRandomAdversary::new(9, 10, truth.u_star.clone(), truth.v_star.clone());
        let mut angles = Vec::new();
        let opts = FitOptions::new(1).with_max_iter(30);
        let (f, _) = fit_adversarial_observed(&x, &opts, fraction * d, &mut adversary, |_, u, _| {
            angles.push(linalg::vector_angle(u, &truth.u_star).unwrap_or(f64::NAN).to_degrees());
        })?;
        let worst_late = angles.iter().skip(5).cloned().fold(0.0_f64, f64::max);
        println!(
            "budget {:>4.2} d: final angle(u, u*) {:>6.2} deg, worst after 5 iterations {:>6.2} deg, armse {:.3}",
            fraction,
            angles.last().copied().unwrap_or(f64::NAN),
            worst_late,
            linalg::armse(&f.v, &truth.v_star)?
        );
    }
    Ok(())
}
