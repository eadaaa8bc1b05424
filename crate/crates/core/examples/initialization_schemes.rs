//! Stable, random and oracle starts on noisy spikes with positive and signed loadings.

use sstpca::simulate::{rate_sweep, InitScheme, SweepCell, UMode};
use sstpca::FitOptions;

fn main() -> sstpca::Result<()> {
    let (p, t) = (40, 40);
    let d = 3.0 * (p as f64 * (t as f64).ln()).sqrt();
    let mut cells = Vec::new();
    for u_mode in [UMode::PositiveOrthant, UMode::Sphere] {
        for init in [InitScheme::Oracle, InitScheme::Stable, InitScheme::Random] {
            cells.push(SweepCell { p, t, r: 1, d, sigma: 1.0, u_mode, init });
        }
    }
    // replicate seeds depend on the data, not the start, so rows are paired
    let rows = rate_sweep(&cells, 20, 11, &FitOptions::new(1))?;

    println!("{:<16} {:<8} {:>10} {:>10} {:>8}", "u*", "init", "u error", "armse", "iters");
    for row in rows {
        println!(
            "{:<16} {:<8} {:>10.4} {:>10.4} {:>8.1}",
            format!("{:?}", row.cell.u_mode),
            format!("{:?}", row.cell.init),
            row.u_error.0,
            row.armse.0,
            row.iterations.0
        );
    }
    Ok(())
}
