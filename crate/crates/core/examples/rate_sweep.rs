//! Error against signal strength at two network sizes, written as CSV to stdout.

use sstpca::simulate::{rate_sweep, write_sweep_csv, InitScheme, SweepCell, UMode};
use sstpca::FitOptions;

fn main() -> sstpca::Result<()> {
    let t = 40;
    let mut cells = Vec::new();
    for p in [10, 40] {
        for c in [2.0, 4.0, 8.0, 16.0] {
            let d = c * (p as f64 * (t as f64).ln()).sqrt();
            cells.push(SweepCell { p, t, r: 1, d, sigma: 1.0, u_mode: UMode::Sphere, init: InitScheme::Stable });
        }
    }
    let rows = rate_sweep(&cells, 10, 1, &FitOptions::new(1))?;
    write_sweep_csv(&rows, std::io::stdout())?;
    Ok(())
}
