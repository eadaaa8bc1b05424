//! Five-block SBM series: SS-TPCA against matricized PCA, its truncation and HOSVD.

use sstpca::simulate::{sbm_comparison, SbmSetting};
use sstpca::FitOptions;

fn main() -> sstpca::Result<()> {
    let setting = SbmSetting::default();
    let reps = 5;
    let errs = sbm_comparison(&setting, reps, 2, &FitOptions::new(1))?;

    let mean = |f: fn(&sstpca::simulate::MethodErrors) -> f64| errs.iter().map(f).sum::<f64>() / reps as f64;
    println!("{setting:?}, {reps} replicates");
    println!("{:<22} {:>10} {:>10}", "method", "subspace", "network");
    println!("{:<22} {:>10.4} {:>10.4}", "SS-TPCA", mean(|e| e.sstpca_subspace), mean(|e| e.sstpca_network));
    println!("{:<22} {:>10.4} {:>10.4}", "truncated matricized", mean(|e| e.truncated_subspace), mean(|e| e.truncated_network));
    println!("{:<22} {:>10.4} {:>10.4}", "HOSVD", mean(|e| e.hosvd_subspace), mean(|e| e.hosvd_network));
    println!("{:<22} {:>10} {:>10.4}", "matricized", "-", mean(|e| e.raw_network));
    Ok(())
}
