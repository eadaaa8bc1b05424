//! Two planted factors removed in turn by each deflation scheme.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sstpca::deflate::orthogonality_report;
use sstpca::simulate::goe_noise;
use sstpca::tensor::{self, rank1_outer};
use sstpca::{fit_multi, linalg, FitOptions, Scheme, SemiSymTensor};

fn main() -> sstpca::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (p, t) = (20, 12);
    let q = linalg::random_stiefel(p, 4, &mut rng);
    let (v1, v2) = (q.columns(0, 2).into_owned(), q.columns(2, 2).into_owned());
    let u1 = linalg::random_unit(t, &mut rng, true);
    let u2 = linalg::random_unit(t, &mut rng, false);
    let noise = SemiSymTensor::new_from_slices(goe_noise(p, t, 0.05, &mut rng))?;
    let x = rank1_outer(12.0, &v1, &u1)?.add(&rank1_outer(6.0, &v2, &u2)?)?.add(&noise)?;

    for scheme in [Scheme::Hotelling, Scheme::Projection, Scheme::Schur] {
        let dec = fit_multi(&x, &[2, 2], scheme, &FitOptions::new(2))?;
        let rep = orthogonality_report(&dec.residual, &dec.factors[1])?;
        println!("{scheme:?}");
        println!("  d                {:.3} {:.3}", dec.factors[0].d, dec.factors[1].d);
        println!("  armse            {:.2e} {:.2e}", linalg::armse(&dec.factors[0].v, &v1)?, linalg::armse(&dec.factors[1].v, &v2)?);
        println!("  residual norms   {:.3?}", dec.residual_norms);
        println!("  cpve             {:.4?}", dec.cpve);
        println!("  last factor      two-way {:.1e}, one-way u {:.1e}, one-way V {:.1e}", rep.two_way, rep.one_way_u, rep.one_way_v());
        println!("  norm monotone    {}", dec.norm_monotonicity_guaranteed);
    }
    println!("|X|_F = {:.3}", tensor::frob_norm(&x));
    Ok(())
}
