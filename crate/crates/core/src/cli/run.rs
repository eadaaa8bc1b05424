//! Command execution and report emission.
//!
//! Every command writes one JSON document:
//!
//! ```text
//! { "schema_version": 1, "library_version": "..", "command": "..",
//!   "seed": .., "config": { .. }, "result": { .. } }
//! ```
//!
//! The document contains no timestamps, paths of output files, or thread
//! counts, so a fixed config and seed always reproduce it byte for byte.

use std::fs;
use std::path::Path;

use log::info;
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::changepoint::{detect_changepoint, ChangepointOptions};
use crate::cli::bic::{rank_select_bic, BicSelection};
use crate::cli::config::{Command, Preset, RunConfig, Suite};
use crate::cli::io::{self, FactorJson, SCHEMA_VERSION};
use crate::decompose::FitDiagnostics;
use crate::deflate::fit_multi;
use crate::error::{Error, Result};
use crate::simulate::{self, InitScheme, SbmSetting, SweepCell, UMode};
use crate::tensor::SemiSymTensor;

/// Environment variable consulted for the worker count when no flag is given.
pub const THREADS_ENV: &str = "SSTPCA_THREADS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_NOT_CONVERGED: i32 = 1;
pub const EXIT_INPUT: i32 = 2;

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub exit_code: i32,
    pub json: String,
}

#[derive(Serialize)]
struct Report<'a, R: Serialize> {
    schema_version: u32,
    library_version: &'a str,
    command: &'a str,
    seed: u64,
    config: RunConfig,
    result: R,
}

/// Sets the size of the global worker pool from `threads` or [`THREADS_ENV`].
pub fn configure_threads(threads: Option<usize>) -> Result<()> {
    let n = match threads {
        Some(n) => Some(n),
        None => match std::env::var(THREADS_ENV) {
            Ok(v) => Some(v.trim().parse::<usize>().map_err(|_| {
                Error::Config(format!("{THREADS_ENV} must be a positive integer, got '{v}'"))
            })?),
            Err(_) => None,
        },
    };
    if let Some(n) = n {
        if n == 0 {
            return Err(Error::Config("thread count must be >= 1".into()));
        }
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

/// Exit code for an error: 2 for input problems, 1 otherwise.
pub fn exit_code_for(err: &Error) -> i32 {
    if err.is_input_error() {
        EXIT_INPUT
    } else {
        EXIT_NOT_CONVERGED
    }
}

/// Runs a validated config, writing the JSON report to `config.output` (or
/// returning it for the caller to print) plus any requested CSV and data files.
pub fn run(config: &RunConfig) -> Result<RunOutcome> {
    config.validate()?;
    let (converged, json) = match config.command {
        Command::Decompose => decompose(config)?,
        Command::Changepoint => changepoint(config)?,
        Command::Simulate => simulate_cmd(config)?,
        Command::Benchmark => benchmark(config)?,
        Command::RankSelect => rank_select(config)?,
    };
    if let Some(path) = &config.output {
        fs::write(path, &json)?;
        info!("wrote {}", path.display());
    }
    Ok(RunOutcome {
        exit_code: if converged { EXIT_OK } else { EXIT_NOT_CONVERGED },
        json,
    })
}

fn render<R: Serialize>(config: &RunConfig, result: R) -> Result<String> {
    let report = Report {
        schema_version: SCHEMA_VERSION,
        library_version: crate::VERSION,
        command: config.command.name(),
        seed: config.seed,
        config: config.echo(),
        result,
    };
    Ok(serde_json::to_string_pretty(&report)? + "\n")
}

fn load_input(config: &RunConfig) -> Result<SemiSymTensor> {
    let path = config.input.as_deref().ok_or_else(|| Error::Config("missing input path".into()))?;
    match config.format.unwrap_or_else(|| io::InputFormat::detect(path)) {
        io::InputFormat::LongCsv => io::load_long_csv(path, config.nodes),
        io::InputFormat::SliceDir => io::load_slice_dir(path),
    }
}

/// Principal network `V V^T` with entries below `threshold` in magnitude zeroed, row-major.
fn thresholded_network(v: &DMatrix<f64>, threshold: f64) -> Vec<f64> {
    let net = v * v.transpose();
    let p = net.nrows();
    (0..p)
        .flat_map(|i| (0..p).map(move |j| (i, j)))
        .map(|(i, j)| {
            let a = net[(i, j)];
            if a.abs() < threshold {
                0.0
            } else {
                a
            }
        })
        .collect()
}

fn write_csv<I, R>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct DecomposeResult {
    scheme: crate::deflate::Scheme,
    ranks: Vec<usize>,
    factors: Vec<FactorJson>,
    diagnostics: Vec<FitDiagnostics>,
    residual_norms: Vec<f64>,
    cpve: Vec<f64>,
    residual_ratio: Vec<f64>,
    norm_monotonicity_guaranteed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    edge_threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    networks: Option<Vec<Vec<f64>>>,
}

fn decompose(config: &RunConfig) -> Result<(bool, String)> {
    let x = load_input(config)?;
    let dec = fit_multi(&x, &config.ranks, config.scheme, &config.fit_options(config.ranks[0]))?;
    let converged = dec.diagnostics.iter().all(|d| d.converged);
    if let Some(path) = &config.csv {
        let rows = dec.diagnostics.iter().enumerate().flat_map(|(k, d)| {
            d.objective.iter().zip(&d.u_change).enumerate().map(move |(i, (o, du))| {
                vec![(k + 1).to_string(), (i + 1).to_string(), o.to_string(), du.to_string()]
            })
        });
        write_csv(path, &["factor", "iteration", "objective", "u_change"], rows)?;
    }
    let networks = config
        .edge_threshold
        .map(|th| dec.factors.iter().map(|f| thresholded_network(&f.v, th)).collect());
    let result = DecomposeResult {
        scheme: dec.scheme,
        ranks: config.ranks.clone(),
        factors: dec.factors.iter().map(FactorJson::from).collect(),
        diagnostics: dec.diagnostics.clone(),
        residual_norms: dec.residual_norms.clone(),
        cpve: dec.cpve.clone(),
        residual_ratio: dec.residual_ratio.clone(),
        norm_monotonicity_guaranteed: dec.norm_monotonicity_guaranteed,
        edge_threshold: config.edge_threshold,
        networks,
    };
    Ok((converged, render(config, result)?))
}

#[derive(Serialize)]
struct ChangepointReport {
    #[serde(rename = "T")]
    t: usize,
    tau_hat: usize,
    score: f64,
    u_hat: Vec<f64>,
    factor: FactorJson,
    diagnostics: FitDiagnostics,
    #[serde(skip_serializing_if = "Option::is_none")]
    network: Option<Vec<f64>>,
}

fn changepoint(config: &RunConfig) -> Result<(bool, String)> {
    let x = load_input(config)?;
    let r = config.ranks[0];
    let mut opts = ChangepointOptions::default();
    let selection = opts.fit.selection;
    opts.fit = config.fit_options(r).with_selection(selection);
    let res = detect_changepoint(&x, r, &opts)?;
    if let Some(path) = &config.csv {
        let rows = res.u_hat.iter().enumerate().map(|(k, v)| vec![(k + 1).to_string(), v.to_string()]);
        write_csv(path, &["t", "u_hat"], rows)?;
    }
    let result = ChangepointReport {
        t: x.t(),
        tau_hat: res.tau_hat,
        score: res.score,
        u_hat: res.u_hat.as_slice().to_vec(),
        factor: FactorJson::from(&res.factor),
        network: config.edge_threshold.map(|th| thresholded_network(&res.factor.v, th)),
        diagnostics: res.diagnostics,
    };
    Ok((result.diagnostics.converged, render(config, result)?))
}

/// Settings of the `shift` preset.
pub const SHIFT_PRESET: (usize, usize, usize, usize) = (30, 24, 2, 12);

#[derive(Serialize)]
struct TraceSummary {
    r: usize,
    d: f64,
    iterations: usize,
    converged: bool,
    final_armse: f64,
    iters_to_5pct: usize,
}

#[derive(Serialize)]
#[serde(untagged)]
enum SimulateResult {
    Fig3 {
        p: usize,
        #[serde(rename = "T")]
        t: usize,
        sigma: f64,
        traces: Vec<TraceSummary>,
    },
    Shift {
        p: usize,
        #[serde(rename = "T")]
        t: usize,
        r: usize,
        tau: usize,
        d: f64,
        sigma: f64,
        snr: f64,
    },
    Spike {
        p: usize,
        #[serde(rename = "T")]
        t: usize,
        sigma: f64,
        snr: f64,
        truth: FactorJson,
    },
    Sbm {
        setting: SbmSetting,
        block_labels: Vec<usize>,
    },
}

fn simulate_cmd(config: &RunConfig) -> Result<(bool, String)> {
    let preset = config.preset.ok_or_else(|| Error::Config("simulate needs a preset".into()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut converged = true;
    let result = match preset {
        Preset::Fig3 => {
            let (p, t, sigma) = (200, 20, 1.0);
            let mut rows = Vec::new();
            let mut traces = Vec::new();
            for r in [1usize, 5] {
                let d = simulate::fig3_signal(r);
                let seed = simulate::split_seed(config.seed, &[r as u64]);
                let (points, diag) = simulate::convergence_trace(p, t, r, d, sigma, seed, &config.fit_options(r))?;
                let final_armse = points.last().map(|q| q.armse).unwrap_or(f64::NAN);
                let arm: Vec<f64> = points.iter().map(|q| q.armse).collect();
                traces.push(TraceSummary {
                    r,
                    d,
                    iterations: diag.iterations,
                    converged: diag.converged,
                    final_armse,
                    iters_to_5pct: simulate::iterations_to_within(&arm, final_armse, 0.05),
                });
                for q in points {
                    rows.push(vec![
                        r.to_string(),
                        q.iteration.to_string(),
                        q.objective.to_string(),
                        q.armse.to_string(),
                        q.u_error.to_string(),
                        q.u_change.to_string(),
                    ]);
                }
            }
            if let Some(path) = &config.csv {
                write_csv(path, &["r", "iteration", "objective", "armse", "u_error", "u_change"], rows)?;
            }
            SimulateResult::Fig3 { p, t, sigma, traces }
        }
        Preset::Shift => {
            let (p, t, r, tau) = SHIFT_PRESET;
            let sigma = 1.0;
            let d = 2.0 * ((p as f64) * (t as f64).ln()).sqrt();
            let (x, _) = simulate::mean_shift_series(p, t, r, tau, d, sigma, &mut rng)?;
            if let Some(path) = &config.data {
                io::write_long_csv(&x, path)?;
            }
            SimulateResult::Shift {
                p,
                t,
                r,
                tau,
                d,
                sigma,
                snr: simulate::effective_snr(d, p, t),
            }
        }
        Preset::Spike => {
            let (p, t, sigma) = (40, 20, 1.0);
            let r = config.ranks[0];
            let d = 2.0 * ((p as f64) * (t as f64).ln()).sqrt();
            let (x, truth) = simulate::spike_model(p, t, r, d, sigma, UMode::Sphere, &mut rng)?;
            if let Some(path) = &config.data {
                io::write_long_csv(&x, path)?;
            }
            let f = crate::decompose::Factor {
                u: truth.u_star.clone(),
                v: truth.v_star.clone(),
                d,
            };
            SimulateResult::Spike {
                p,
                t,
                sigma,
                snr: truth.snr,
                truth: FactorJson::from(&f),
            }
        }
        Preset::Sbm => {
            let setting = SbmSetting::default();
            let x = simulate::sbm_series(setting.p, setting.t, setting.n_blocks, setting.p_in, setting.q_out, &mut rng)?;
            if let Some(path) = &config.data {
                io::write_long_csv(&x, path)?;
            }
            SimulateResult::Sbm {
                setting,
                block_labels: simulate::sbm_labels(setting.p, setting.n_blocks),
            }
        }
    };
    if let SimulateResult::Fig3 { traces, .. } = &result {
        converged = traces.iter().all(|t| t.converged);
    }
    Ok((converged, render(config, result)?))
}

#[derive(Serialize)]
struct MethodSummary {
    method: &'static str,
    subspace_mean: Option<f64>,
    network_mean: f64,
}

#[derive(Serialize)]
#[serde(untagged)]
enum BenchmarkResult {
    Rates { rows: Vec<simulate::SweepRow> },
    Methods {
        setting: SbmSetting,
        reps: usize,
        summary: Vec<MethodSummary>,
        replicates: Vec<simulate::MethodErrors>,
    },
}

/// Cells of the `rates` suite: `p in {10, 30, 50}`, `T = 40`, `r = 1`, `sigma = 1`,
/// `d = c sqrt(p ln T)` for `c in {2, 4, 8}`.
pub fn rates_grid() -> Vec<SweepCell> {
    let t = 40;
    let mut cells = Vec::new();
    for p in [10, 30, 50] {
        for c in [2.0, 4.0, 8.0] {
            cells.push(SweepCell {
                p,
                t,
                r: 1,
                d: c * ((p as f64) * (t as f64).ln()).sqrt(),
                sigma: 1.0,
                u_mode: UMode::Sphere,
                init: InitScheme::Stable,
            });
        }
    }
    cells
}

fn benchmark(config: &RunConfig) -> Result<(bool, String)> {
    let base = config.fit_options(1);
    let result = match config.suite {
        Suite::Rates => {
            let rows = simulate::rate_sweep(&rates_grid(), config.reps, config.seed, &base)?;
            if let Some(path) = &config.csv {
                simulate::write_sweep_csv(&rows, fs::File::create(path)?)?;
            }
            BenchmarkResult::Rates { rows }
        }
        Suite::Methods => {
            let setting = SbmSetting::default();
            let reps = simulate::sbm_comparison(&setting, config.reps, config.seed, &base)?;
            let mean = |f: fn(&simulate::MethodErrors) -> f64| reps.iter().map(f).sum::<f64>() / reps.len() as f64;
            let summary = vec![
                MethodSummary {
                    method: "sstpca",
                    subspace_mean: Some(mean(|m| m.sstpca_subspace)),
                    network_mean: mean(|m| m.sstpca_network),
                },
                MethodSummary {
                    method: "truncated_matricized_pca",
                    subspace_mean: Some(mean(|m| m.truncated_subspace)),
                    network_mean: mean(|m| m.truncated_network),
                },
                MethodSummary {
                    method: "matricized_pca",
                    subspace_mean: None,
                    network_mean: mean(|m| m.raw_network),
                },
                MethodSummary {
                    method: "hosvd",
                    subspace_mean: Some(mean(|m| m.hosvd_subspace)),
                    network_mean: mean(|m| m.hosvd_network),
                },
            ];
            if let Some(path) = &config.csv {
                let rows = reps.iter().enumerate().map(|(k, m)| {
                    vec![
                        (k + 1).to_string(),
                        m.sstpca_subspace.to_string(),
                        m.truncated_subspace.to_string(),
                        m.hosvd_subspace.to_string(),
                        m.sstpca_network.to_string(),
                        m.truncated_network.to_string(),
                        m.raw_network.to_string(),
                        m.hosvd_network.to_string(),
                    ]
                });
                write_csv(
                    path,
                    &[
                        "replicate",
                        "sstpca_subspace",
                        "truncated_subspace",
                        "hosvd_subspace",
                        "sstpca_network",
                        "truncated_network",
                        "raw_network",
                        "hosvd_network",
                    ],
                    rows,
                )?;
            }
            BenchmarkResult::Methods {
                setting,
                reps: config.reps,
                summary,
                replicates: reps,
            }
        }
    };
    Ok((true, render(config, result)?))
}

fn rank_select(config: &RunConfig) -> Result<(bool, String)> {
    let x = load_input(config)?;
    let sel: BicSelection = rank_select_bic(&x, config.r_max, config.k_max, &config.fit_options(1), config.scheme)?;
    Ok((true, render(config, sel)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_zeroes_small_entries() {
        let v = DMatrix::from_column_slice(3, 1, &[0.8, 0.6, 0.0]);
        // V V^T = [[.64, .48, 0], [.48, .36, 0], [0, 0, 0]]
        let net = thresholded_network(&v, 0.4);
        assert_eq!(net, vec![0.8 * 0.8, 0.8 * 0.6, 0.0, 0.6 * 0.8, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(thresholded_network(&v, 0.0)[4], 0.6 * 0.6);
    }

    #[test]
    fn decompose_writes_versioned_report() {
        let dir = tempfile::tempdir().unwrap();
        let data = dir.path().join("x.csv");
        let mut sim = RunConfig::new(Command::Simulate);
        sim.preset = Some(Preset::Spike);
        sim.ranks = vec![2];
        sim.seed = 3;
        sim.data = Some(data.clone());
        run(&sim).unwrap();

        let mut cfg = RunConfig::new(Command::Decompose);
        cfg.input = Some(data);
        cfg.nodes = Some(40);
        cfg.ranks = vec![2, 1];
        cfg.output = Some(dir.path().join("out.json"));
        let out = run(&cfg).unwrap();
        assert_eq!(out.exit_code, EXIT_OK);
        let value: serde_json::Value = serde_json::from_str(&out.json).unwrap();
        assert_eq!(value["schema_version"], 1);
        assert_eq!(value["command"], "decompose");
        assert_eq!(value["result"]["factors"].as_array().unwrap().len(), 2);
        assert_eq!(value["result"]["factors"][0]["r"], 2);
        let factors = io::load_factors(cfg.output.as_ref().unwrap()).unwrap();
        assert_eq!(factors.len(), 2);
    }

    #[test]
    fn input_errors_map_to_exit_two() {
        let mut cfg = RunConfig::new(Command::Decompose);
        cfg.input = Some("/nonexistent/file.csv".into());
        let err = run(&cfg).unwrap_err();
        assert_eq!(exit_code_for(&err), EXIT_INPUT);
        assert_eq!(exit_code_for(&Error::DegenerateMatrix), EXIT_NOT_CONVERGED);
    }
}
