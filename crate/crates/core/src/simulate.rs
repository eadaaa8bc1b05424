//! Generative models and seeded Monte Carlo drivers.
//!
//! Every driver takes a master seed. Per-replicate streams come from
//! [`split_seed`], which hashes the master seed together with the cell
//! parameters and the replicate index, so results do not depend on the number
//! of worker threads or on which other cells share the run.

use log::debug;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Gamma, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines;
use crate::decompose::{self, Factor, FitDiagnostics, FitOptions, Init, UpdateHook};
use crate::error::{Error, Result};
use crate::linalg;
use crate::tensor::{self, SemiSymTensor};

/// How the true loading vector is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UMode {
    Sphere,
    PositiveOrthant,
    Constant,
}

/// Ground truth of a spiked instance.
#[derive(Debug, Clone, PartialEq)]
pub struct SpikeTruth {
    pub u_star: DVector<f64>,
    pub v_star: DMatrix<f64>,
    pub d: f64,
    pub sigma: f64,
    /// `d / sqrt(p ln T)`.
    pub snr: f64,
}

impl SpikeTruth {
    pub fn signal(&self) -> SemiSymTensor {
        tensor::rank1_outer(self.d, &self.v_star, &self.u_star).expect("truth dims are consistent")
    }
}

/// `d / sqrt(p ln T)`. Uses `ln 2` in place of `ln 1`.
pub fn effective_snr(d: f64, p: usize, t: usize) -> f64 {
    d / ((p as f64) * (t.max(2) as f64).ln()).sqrt()
}

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from `master` and a sequence of words.
pub fn split_seed(master: u64, words: &[u64]) -> u64 {
    words.iter().fold(mix64(master), |h, &w| mix64(h ^ mix64(w)))
}

/// `t` independent GOE slices: off-diagonal `N(0, sigma^2)`, diagonal `N(0, 2 sigma^2)`.
pub fn goe_noise<R: Rng + ?Sized>(p: usize, t: usize, sigma: f64, rng: &mut R) -> Vec<DMatrix<f64>> {
    let diag_sd = sigma * 2f64.sqrt();
    (0..t)
        .map(|_| {
            let mut e = DMatrix::zeros(p, p);
            for i in 0..p {
                e[(i, i)] = diag_sd * rng.sample::<f64, _>(StandardNormal);
                for j in (i + 1)..p {
                    let z = sigma * rng.sample::<f64, _>(StandardNormal);
                    e[(i, j)] = z;
                    e[(j, i)] = z;
                }
            }
            e
        })
        .collect()
}

fn draw_u<R: Rng + ?Sized>(t: usize, mode: UMode, rng: &mut R) -> DVector<f64> {
    match mode {
        UMode::Sphere => linalg::random_unit(t, rng, false),
        UMode::PositiveOrthant => linalg::random_unit(t, rng, true),
        UMode::Constant => DVector::from_element(t, 1.0 / (t as f64).sqrt()),
    }
}

/// `X = d V* o V* o u* + E` with GOE noise `E`.
pub fn spike_model<R: Rng + ?Sized>(
    p: usize,
    t: usize,
    r: usize,
    d: f64,
    sigma: f64,
    u_mode: UMode,
    rng: &mut R,
) -> Result<(SemiSymTensor, SpikeTruth)> {
    if r == 0 || r > p {
        return Err(Error::RankTooLarge { rank: r, dim: p });
    }
    if !(sigma >= 0.0) || !(d >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "need d >= 0 and sigma >= 0, got d = {d}, sigma = {sigma}"
        )));
    }
    let v_star = linalg::random_stiefel(p, r, rng);
    let u_star = draw_u(t, u_mode, rng);
    let truth = SpikeTruth {
        snr: effective_snr(d, p, t),
        u_star,
        v_star,
        d,
        sigma,
    };
    let signal = truth.signal();
    if sigma == 0.0 {
        return Ok((signal, truth));
    }
    let noise = goe_noise(p, t, sigma, rng);
    let slices = signal
        .into_slices()
        .into_iter()
        .zip(noise)
        .map(|(s, e)| s + e)
        .collect();
    Ok((SemiSymTensor::from_symmetric_unchecked(slices), truth))
}

/// Block label of every node. The last block absorbs any remainder.
pub fn sbm_labels(p: usize, n_blocks: usize) -> Vec<usize> {
    let size = p / n_blocks;
    (0..p).map(|i| (i / size.max(1)).min(n_blocks - 1)).collect()
}

fn check_sbm(p: usize, n_blocks: usize, p_in: f64, q_out: f64) -> Result<()> {
    if n_blocks == 0 || n_blocks > p {
        return Err(Error::InvalidParameter(format!(
            "need 1 <= n_blocks <= p, got {n_blocks} blocks for p = {p}"
        )));
    }
    if !(0.0..=1.0).contains(&p_in) || !(0.0..=1.0).contains(&q_out) || q_out > p_in {
        return Err(Error::InvalidProbability(format!(
            "need 0 <= q_out <= p_in <= 1, got p_in = {p_in}, q_out = {q_out}"
        )));
    }
    Ok(())
}

/// Expected adjacency of the SBM (zero diagonal).
pub fn sbm_expectation(p: usize, n_blocks: usize, p_in: f64, q_out: f64) -> Result<DMatrix<f64>> {
    check_sbm(p, n_blocks, p_in, q_out)?;
    let z = sbm_labels(p, n_blocks);
    Ok(DMatrix::from_fn(p, p, |i, j| {
        if i == j {
            0.0
        } else if z[i] == z[j] {
            p_in
        } else {
            q_out
        }
    }))
}

/// Orthonormal basis of the block-indicator space, `p x n_blocks`.
pub fn sbm_block_basis(p: usize, n_blocks: usize) -> DMatrix<f64> {
    let z = sbm_labels(p, n_blocks);
    let mut b = DMatrix::zeros(p, n_blocks);
    for (i, &k) in z.iter().enumerate() {
        b[(i, k)] = 1.0;
    }
    for mut col in b.column_iter_mut() {
        let n = col.norm();
        col /= n;
    }
    b
}

/// `t` iid adjacency matrices from a stochastic block model.
pub fn sbm_series<R: Rng + ?Sized>(
    p: usize,
    t: usize,
    n_blocks: usize,
    p_in: f64,
    q_out: f64,
    rng: &mut R,
) -> Result<SemiSymTensor> {
    let probs = sbm_expectation(p, n_blocks, p_in, q_out)?;
    Ok(bernoulli_series(&probs, t, rng))
}

fn bernoulli_series<R: Rng + ?Sized>(probs: &DMatrix<f64>, t: usize, rng: &mut R) -> SemiSymTensor {
    let p = probs.nrows();
    let slices = (0..t)
        .map(|_| {
            let mut a = DMatrix::zeros(p, p);
            for i in 0..p {
                for j in (i + 1)..p {
                    if rng.random::<f64>() < probs[(i, j)] {
                        a[(i, j)] = 1.0;
                        a[(j, i)] = 1.0;
                    }
                }
            }
            a
        })
        .collect();
    SemiSymTensor::from_symmetric_unchecked(slices)
}

/// Random dot-product graphs with fixed Dirichlet(`alpha 1_r`) latent positions.
///
/// Returns the series and the `p x r` latent matrix.
pub fn rdpg_dirichlet_series<R: Rng + ?Sized>(
    p: usize,
    t: usize,
    r: usize,
    alpha: f64,
    rng: &mut R,
) -> Result<(SemiSymTensor, DMatrix<f64>)> {
    if r == 0 || p == 0 || t == 0 {
        return Err(Error::InvalidParameter("p, T and r must be >= 1".into()));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidParameter(format!("alpha must be > 0, got {alpha}")));
    }
    let gamma = Gamma::new(alpha, 1.0).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let mut latent = DMatrix::zeros(p, r);
    for i in 0..p {
        if r == 1 {
            latent[(i, 0)] = 1.0;
            continue;
        }
        let mut g: Vec<f64> = (0..r).map(|_| rng.sample(gamma)).collect();
        let mut s: f64 = g.iter().sum();
        if s <= 0.0 {
            // all draws underflowed; put the mass on one coordinate
            g = vec![0.0; r];
            g[rng.random_range(0..r)] = 1.0;
            s = 1.0;
        }
        for k in 0..r {
            latent[(i, k)] = g[k] / s;
        }
    }
    let probs = (&latent * latent.transpose()).map(|v| v.clamp(0.0, 1.0));
    Ok((bernoulli_series(&probs, t, rng), latent))
}

/// Ground truth of a single mean shift between two projector networks.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftTruth {
    pub v_before: DMatrix<f64>,
    pub v_after: DMatrix<f64>,
    /// Last slice (1-based) before the change.
    pub tau: usize,
    pub d: f64,
    pub sigma: f64,
}

/// `X_t = d V_1 V_1^T + E_t` for `t <= tau`, `d V_2 V_2^T + E_t` after, with
/// `V_1, V_2` spanning orthogonal random subspaces.
pub fn mean_shift_series<R: Rng + ?Sized>(
    p: usize,
    t: usize,
    r: usize,
    tau: usize,
    d: f64,
    sigma: f64,
    rng: &mut R,
) -> Result<(SemiSymTensor, ShiftTruth)> {
    if r == 0 || 2 * r > p {
        return Err(Error::InvalidParameter(format!("need 1 <= 2r <= p, got r = {r}, p = {p}")));
    }
    if tau == 0 || tau >= t {
        return Err(Error::InvalidParameter(format!("need 1 <= tau < T, got tau = {tau}, T = {t}")));
    }
    let q = linalg::random_stiefel(p, 2 * r, rng);
    let v_before = q.columns(0, r).into_owned();
    let v_after = q.columns(r, r).into_owned();
    let a = &v_before * v_before.transpose() * d;
    let b = &v_after * v_after.transpose() * d;
    let noise = goe_noise(p, t, sigma, rng);
    let slices = noise
        .into_iter()
        .enumerate()
        .map(|(k, e)| if k < tau { &a + e } else { &b + e })
        .collect();
    let x = SemiSymTensor::new_from_slices(slices)?;
    Ok((
        x,
        ShiftTruth {
            v_before,
            v_after,
            tau,
            d,
            sigma,
        },
    ))
}

/// Source of per-iteration perturbations for [`fit_adversarial`].
///
/// `v_perturbation` returns a symmetric `p x p` matrix added to the V-update
/// target; `u_perturbation` a `T`-vector added to the trace product.
pub trait Adversary {
    fn v_perturbation(&mut self, iter: usize, target: &DMatrix<f64>, budget: f64) -> DMatrix<f64>;
    fn u_perturbation(&mut self, iter: usize, target: &DVector<f64>, budget: f64) -> DVector<f64>;
}

/// Emits nothing.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoAdversary;

impl Adversary for NoAdversary {
    fn v_perturbation(&mut self, _: usize, target: &DMatrix<f64>, _: f64) -> DMatrix<f64> {
        DMatrix::zeros(target.nrows(), target.ncols())
    }
    fn u_perturbation(&mut self, _: usize, target: &DVector<f64>, _: f64) -> DVector<f64> {
        DVector::zeros(target.len())
    }
}

/// Random GOE direction (resp. random unit vector) scaled to `scale * budget`.
#[derive(Debug, Clone)]
pub struct RandomAdversary {
    rng: ChaCha8Rng,
    scale: f64,
}

impl RandomAdversary {
    pub fn new(seed: u64, scale: f64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            scale,
        }
    }
}

fn random_sym_direction<R: Rng + ?Sized>(p: usize, rng: &mut R) -> DMatrix<f64> {
    let e = goe_noise(p, 1, 1.0, rng).pop().expect("one slice");
    let n = tensor::sym_opnorm(&e);
    if n > 0.0 {
        e / n
    } else {
        e
    }
}

impl Adversary for RandomAdversary {
    fn v_perturbation(&mut self, _: usize, target: &DMatrix<f64>, budget: f64) -> DMatrix<f64> {
        random_sym_direction(target.nrows(), &mut self.rng) * (self.scale * budget)
    }
    fn u_perturbation(&mut self, _: usize, target: &DVector<f64>, budget: f64) -> DVector<f64> {
        linalg::random_unit(target.len(), &mut self.rng, false) * (self.scale * budget)
    }
}

/// Picks, among `candidates` full-budget random perturbations, the one that
/// moves the resulting update furthest from the truth.
#[derive(Debug, Clone)]
pub struct WorstOfRandomAdversary {
    rng: ChaCha8Rng,
    candidates: usize,
    u_star: DVector<f64>,
    v_star: DMatrix<f64>,
}

impl WorstOfRandomAdversary {
    pub fn new(seed: u64, candidates: usize, u_star: DVector<f64>, v_star: DMatrix<f64>) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            candidates: candidates.max(1),
            u_star,
            v_star,
        }
    }
}

impl Adversary for WorstOfRandomAdversary {
    fn v_perturbation(&mut self, _: usize, target: &DMatrix<f64>, budget: f64) -> DMatrix<f64> {
        let r = self.v_star.ncols();
        let mut best = (f64::NEG_INFINITY, DMatrix::zeros(target.nrows(), target.ncols()));
        for _ in 0..self.candidates {
            let e = random_sym_direction(target.nrows(), &mut self.rng) * budget;
            let damage = linalg::sym_eigen_top_r(&(target + &e), r)
                .and_then(|eig| linalg::sin_theta_frob(&self.v_star, &eig.vectors))
                .unwrap_or(f64::INFINITY);
            if damage > best.0 {
                best = (damage, e);
            }
        }
        best.1
    }

    fn u_perturbation(&mut self, _: usize, target: &DVector<f64>, budget: f64) -> DVector<f64> {
        let mut best = (f64::NEG_INFINITY, DVector::zeros(target.len()));
        for _ in 0..self.candidates {
            let e = linalg::random_unit(target.len(), &mut self.rng, false) * budget;
            let damage = linalg::vector_angle(&(target + &e), &self.u_star).unwrap_or(f64::INFINITY);
            if damage > best.0 {
                best = (damage, e);
            }
        }
        best.1
    }
}

struct BudgetHook<'a> {
    adversary: &'a mut dyn Adversary,
    budget: f64,
}

impl BudgetHook<'_> {
    fn check(&self, norm: f64) -> Result<()> {
        if !(norm <= self.budget * (1.0 + 1e-12)) {
            return Err(Error::BudgetExceeded {
                norm,
                budget: self.budget,
            });
        }
        Ok(())
    }
}

impl UpdateHook for BudgetHook<'_> {
    fn v_target(&mut self, iter: usize, target: &mut DMatrix<f64>) -> Result<()> {
        let e = self.adversary.v_perturbation(iter, target, self.budget);
        if e.shape() != target.shape() {
            return Err(Error::DimensionMismatch("adversary V perturbation has wrong shape".into()));
        }
        if tensor::max_asymmetry(&e) > tensor::symmetry_tolerance(&e) {
            return Err(Error::NotSymmetric(tensor::max_asymmetry(&e)));
        }
        let norm = tensor::sym_opnorm(&e);
        self.check(norm)?;
        if norm > 0.0 {
            *target += e;
        }
        Ok(())
    }

    fn u_target(&mut self, iter: usize, target: &mut DVector<f64>) -> Result<()> {
        let e = self.adversary.u_perturbation(iter, target, self.budget);
        if e.len() != target.len() {
            return Err(Error::DimensionMismatch("adversary u perturbation has wrong length".into()));
        }
        let norm = e.norm();
        self.check(norm)?;
        if norm > 0.0 {
            *target += e;
        }
        Ok(())
    }
}

/// Runs the single-factor fit with adversarial perturbations of operator
/// (resp. Euclidean) norm at most `budget` added to both update targets.
pub fn fit_adversarial(
    x_signal: &SemiSymTensor,
    opts: &FitOptions,
    budget: f64,
    adversary: &mut dyn Adversary,
) -> Result<(Factor, FitDiagnostics)> {
    fit_adversarial_observed(x_signal, opts, budget, adversary, |_, _, _| {})
}

pub fn fit_adversarial_observed<F>(
    x_signal: &SemiSymTensor,
    opts: &FitOptions,
    budget: f64,
    adversary: &mut dyn Adversary,
    mut observer: F,
) -> Result<(Factor, FitDiagnostics)>
where
    F: FnMut(usize, &DVector<f64>, &DMatrix<f64>),
{
    if !(budget >= 0.0 && budget.is_finite()) {
        return Err(Error::InvalidParameter(format!("budget must be >= 0, got {budget}")));
    }
    let mut hook = BudgetHook { adversary, budget };
    decompose::fit_with_hook(x_signal, opts, Some(&mut hook), &mut observer)
}

/// Initialization used in a sweep cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitScheme {
    Stable,
    Random,
    /// Starts from the true loading vector.
    Oracle,
}

/// One point of a sweep grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub p: usize,
    pub t: usize,
    pub r: usize,
    pub d: f64,
    pub sigma: f64,
    pub u_mode: UMode,
    pub init: InitScheme,
}

impl SweepCell {
    fn data_words(&self) -> [u64; 6] {
        [
            self.p as u64,
            self.t as u64,
            self.r as u64,
            self.d.to_bits(),
            self.sigma.to_bits(),
            self.u_mode as u64,
        ]
    }
}

/// Per-replicate errors of one fit against its truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplicateMetrics {
    /// `min_{+-} ||u* -+ u_hat|| / sqrt(T)`.
    pub u_error: f64,
    pub armse: f64,
    /// `||X_hat - X*||_F / ||X*||_F`.
    pub recon_error: f64,
    /// First iteration whose ARMSE is within 5% of the final ARMSE.
    pub iters_to_5pct: usize,
    pub iterations: usize,
}

/// Mean and standard deviation per metric for one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub cell: SweepCell,
    pub reps: usize,
    pub snr: f64,
    pub u_error: (f64, f64),
    pub armse: (f64, f64),
    pub recon_error: (f64, f64),
    pub iters_to_5pct: (f64, f64),
    pub iterations: (f64, f64),
}

fn mean_sd(xs: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = xs.clone().count() as f64;
    let mean = xs.clone().sum::<f64>() / n;
    let var = if n > 1.0 {
        xs.map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

/// Draws one spiked instance for `cell` and scores a fit on it.
pub fn run_replicate(cell: &SweepCell, seed: u64, base: &FitOptions) -> Result<ReplicateMetrics> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (x, truth) = spike_model(cell.p, cell.t, cell.r, cell.d, cell.sigma, cell.u_mode, &mut rng)?;
    let init = match cell.init {
        InitScheme::Stable => Init::Stable,
        InitScheme::Random => Init::Random(split_seed(seed, &[0x1417])),
        InitScheme::Oracle => Init::Given(truth.u_star.as_slice().to_vec()),
    };
    let mut opts = base.clone();
    opts.rank = cell.r;
    opts.init = init;
    let mut trace = Vec::new();
    let (f, diag) = decompose::fit_single_factor_observed(&x, &opts, |_, _, v| {
        trace.push(linalg::armse(v, &truth.v_star).unwrap_or(f64::NAN));
    })?;
    let armse = linalg::armse(&f.v, &truth.v_star)?;
    let u_error = linalg::sign_aligned_distance(&f.u, &truth.u_star)? / (cell.t as f64).sqrt();
    let signal = truth.signal();
    let recon_error = tensor::frob_norm(&f.to_tensor()?.sub(&signal)?) / tensor::frob_norm(&signal);
    Ok(ReplicateMetrics {
        u_error,
        armse,
        recon_error,
        iters_to_5pct: iterations_to_within(&trace, armse, 0.05),
        iterations: diag.iterations,
    })
}

/// First 1-based iteration `k` with `trace[k-1] <= (1 + rel) * target`.
pub fn iterations_to_within(trace: &[f64], target: f64, rel: f64) -> usize {
    trace
        .iter()
        .position(|&e| e <= (1.0 + rel) * target)
        .map(|k| k + 1)
        .unwrap_or(trace.len())
}

/// Replicate metrics for every cell, `reps` each, in cell then replicate order.
pub fn sweep_replicates(
    cells: &[SweepCell],
    reps: usize,
    seed: u64,
    base: &FitOptions,
) -> Result<Vec<Vec<ReplicateMetrics>>> {
    if cells.is_empty() || reps == 0 {
        return Err(Error::InvalidParameter("sweep needs a nonempty grid and reps >= 1".into()));
    }
    let jobs: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..reps).map(move |k| (c, k)))
        .collect();
    let flat: Vec<ReplicateMetrics> = jobs
        .par_iter()
        .map(|&(c, k)| {
            let mut words = cells[c].data_words().to_vec();
            words.push(k as u64);
            run_replicate(&cells[c], split_seed(seed, &words), base)
        })
        .collect::<Result<_>>()?;
    Ok(flat.chunks(reps).map(|c| c.to_vec()).collect())
}

/// Mean and SD of replicate metrics for each cell.
pub fn rate_sweep(cells: &[SweepCell], reps: usize, seed: u64, base: &FitOptions) -> Result<Vec<SweepRow>> {
    let all = sweep_replicates(cells, reps, seed, base)?;
    Ok(cells
        .iter()
        .zip(all)
        .map(|(cell, m)| {
            debug!("cell {cell:?} done");
            SweepRow {
                cell: *cell,
                reps,
                snr: effective_snr(cell.d, cell.p, cell.t),
                u_error: mean_sd(m.iter().map(|x| x.u_error)),
                armse: mean_sd(m.iter().map(|x| x.armse)),
                recon_error: mean_sd(m.iter().map(|x| x.recon_error)),
                iters_to_5pct: mean_sd(m.iter().map(|x| x.iters_to_5pct as f64)),
                iterations: mean_sd(m.iter().map(|x| x.iterations as f64)),
            }
        })
        .collect())
}

/// Writes one CSV row per cell per metric.
pub fn write_sweep_csv<W: std::io::Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["p", "T", "r", "d", "sigma", "u_mode", "init", "snr", "metric", "mean", "sd", "reps"])?;
    for row in rows {
        let c = &row.cell;
        let metrics = [
            ("u_error", row.u_error),
            ("armse", row.armse),
            ("recon_error", row.recon_error),
            ("iters_to_5pct", row.iters_to_5pct),
            ("iterations", row.iterations),
        ];
        for (name, (mean, sd)) in metrics {
            w.write_record([
                c.p.to_string(),
                c.t.to_string(),
                c.r.to_string(),
                c.d.to_string(),
                c.sigma.to_string(),
                serde_json::to_value(c.u_mode)?.as_str().unwrap_or_default().to_string(),
                serde_json::to_value(c.init)?.as_str().unwrap_or_default().to_string(),
                row.snr.to_string(),
                name.to_string(),
                mean.to_string(),
                sd.to_string(),
                row.reps.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Per-iteration record of a convergence trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub iteration: usize,
    pub objective: f64,
    pub armse: f64,
    pub u_error: f64,
    pub u_change: f64,
}

/// Signal strength of the convergence-trace configuration: `15 r^{-1/4}`.
pub fn fig3_signal(r: usize) -> f64 {
    15.0 * (r as f64).powf(-0.25)
}

/// Fits one spiked instance and records every iterate.
pub fn convergence_trace(
    p: usize,
    t: usize,
    r: usize,
    d: f64,
    sigma: f64,
    seed: u64,
    opts: &FitOptions,
) -> Result<(Vec<TracePoint>, FitDiagnostics)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (x, truth) = spike_model(p, t, r, d, sigma, UMode::Sphere, &mut rng)?;
    let mut opts = opts.clone();
    opts.rank = r;
    let mut points = Vec::new();
    let (_, diag) = decompose::fit_single_factor_observed(&x, &opts, |k, u, v| {
        points.push(TracePoint {
            iteration: k,
            objective: f64::NAN,
            armse: linalg::armse(v, &truth.v_star).unwrap_or(f64::NAN),
            u_error: linalg::sign_aligned_distance(u, &truth.u_star).unwrap_or(f64::NAN),
            u_change: f64::NAN,
        });
    })?;
    for (pt, (obj, du)) in points.iter_mut().zip(diag.objective.iter().zip(&diag.u_change)) {
        pt.objective = *obj;
        pt.u_change = *du;
    }
    Ok((points, diag))
}

/// Stochastic block model setting for method comparisons.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SbmSetting {
    pub p: usize,
    pub t: usize,
    pub n_blocks: usize,
    pub p_in: f64,
    pub q_out: f64,
}

impl Default for SbmSetting {
    fn default() -> Self {
        Self {
            p: 105,
            t: 20,
            n_blocks: 5,
            p_in: 0.8,
            q_out: 0.2,
        }
    }
}

/// Errors of each method on one SBM replicate, against the block-indicator
/// subspace `B`.
///
/// `*_subspace` is `||sin Theta||_F` between the estimated basis and `B`;
/// `*_network` is [`baselines::network_distance`] between the estimated
/// network and `B B^T`. Raw matricized PCA has no basis, only a network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MethodErrors {
    pub sstpca_subspace: f64,
    pub truncated_subspace: f64,
    pub hosvd_subspace: f64,
    pub sstpca_network: f64,
    pub truncated_network: f64,
    pub raw_network: f64,
    pub hosvd_network: f64,
}

/// One SBM replicate scored for SS-TPCA (rank `n_blocks`) and the baselines.
pub fn sbm_replicate(setting: &SbmSetting, seed: u64, base: &FitOptions) -> Result<MethodErrors> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = sbm_series(setting.p, setting.t, setting.n_blocks, setting.p_in, setting.q_out, &mut rng)?;
    let truth = sbm_block_basis(setting.p, setting.n_blocks);
    let truth_net = &truth * truth.transpose();
    let r = setting.n_blocks;

    let mut opts = base.clone();
    opts.rank = r;
    let (ss, _) = decompose::fit_single_factor(&x, &opts)?;
    let trunc = baselines::truncated_matricized_pca(&x, r)?;
    let raw = baselines::matricized_pca(&x)?;
    let ho = baselines::hosvd(&x, r)?;

    Ok(MethodErrors {
        sstpca_subspace: linalg::sin_theta_frob(&truth, &ss.v)?,
        truncated_subspace: linalg::sin_theta_frob(&truth, &trunc.v)?,
        hosvd_subspace: linalg::sin_theta_frob(&truth, &ho.v)?,
        sstpca_network: baselines::network_distance(&ss.network(), &truth_net)?,
        truncated_network: baselines::network_distance(&trunc.network(), &truth_net)?,
        raw_network: baselines::network_distance(&raw.network(setting.p)?, &truth_net)?,
        hosvd_network: baselines::network_distance(&ho.network(), &truth_net)?,
    })
}

/// `reps` SBM replicates in replicate order.
pub fn sbm_comparison(setting: &SbmSetting, reps: usize, seed: u64, base: &FitOptions) -> Result<Vec<MethodErrors>> {
    (0..reps)
        .into_par_iter()
        .map(|k| sbm_replicate(setting, split_seed(seed, &[0x5b, k as u64]), base))
        .collect()
}
