//! Round trip through both on-disk formats, then a decomposition saved as JSON.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sstpca::cli::io::{self, InputFormat};
use sstpca::simulate::sbm_series;
use sstpca::{fit_multi, FitOptions, Scheme};

fn main() -> sstpca::Result<()> {
    let dir = std::env::temp_dir().join(format!("sstpca-load-networks-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x = sbm_series(24, 6, 3, 0.7, 0.1, &mut rng)?;

    let long = dir.join("edges.csv");
    let slices = dir.join("slices");
    io::write_long_csv(&x, &long)?;
    io::write_slice_dir(&x, &slices)?;
    let from_long = io::load_tensor(&long, None)?;
    let from_dir = io::load_tensor(&slices, Some(InputFormat::SliceDir))?;
    println!("LongCSV   {} nodes x {} slices, identical: {}", from_long.p(), from_long.t(), from_long == x);
    println!("SliceDir  {} nodes x {} slices, identical: {}", from_dir.p(), from_dir.t(), from_dir == x);

    let dec = fit_multi(&from_long, &[2, 1], Scheme::Projection, &FitOptions::new(1))?;
    let out = dir.join("factors.json");
    io::save_factors(&dec.factors, &out)?;
    let back = io::load_factors(&out)?;
    let drift = back
        .iter()
        .zip(&dec.factors)
        .map(|(a, b)| (&a.u - &b.u).amax().max((&a.v - &b.v).amax()).max((a.d - b.d).abs()))
        .fold(0.0_f64, f64::max);
    println!("saved {} factors to {}, largest reload difference {drift:.1e}", back.len(), out.display());
    for (k, f) in dec.factors.iter().enumerate() {
        println!("factor {}: rank {}, d = {:.3}, u = {:.3?}", k + 1, f.v.ncols(), f.d, f.u.as_slice());
    }
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}
