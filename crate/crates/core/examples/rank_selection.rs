//! Greedy BIC picks the number of factors and their ranks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sstpca::cli::rank_select_bic;
use sstpca::simulate::goe_noise;
use sstpca::tensor::rank1_outer;
use sstpca::{linalg, FitOptions, Scheme, SemiSymTensor};

fn main() -> sstpca::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (p, t) = (25, 15);
    let q = linalg::random_stiefel(p, 4, &mut rng);
    let u1 = linalg::random_unit(t, &mut rng, true);
    let u2 = linalg::random_unit(t, &mut rng, false);
    let signal = rank1_outer(40.0, &q.columns(0, 3).into_owned(), &u1)?
        .add(&rank1_outer(35.0, &q.columns(3, 1).into_owned(), &u2)?)?;
    let x = signal.add(&SemiSymTensor::new_from_slices(goe_noise(p, t, 1.0, &mut rng))?)?;

    let sel = rank_select_bic(&x, 4, 4, &FitOptions::new(1), Scheme::Hotelling)?;

    println!("selected ranks {:?} (planted [3, 1]), N = {}", sel.ranks, sel.n);
    for (k, step) in sel.steps.iter().enumerate() {
        let bic: Vec<String> = step.bic.iter().map(|b| format!("{b:.1}")).collect();
        println!("step {}: null BIC {:.1}, BIC by rank [{}], chosen {:?}", k + 1, step.null_bic, bic.join(", "), step.chosen);
    }
    Ok(())
}
