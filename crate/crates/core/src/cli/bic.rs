//! Greedy BIC rank selection.
//!
//! For each new factor, ranks `1..=r_max` are fitted to the current residual
//! and scored by
//!
//! ```text
//! BIC(r) = N ln(RSS(r) / N) + k(r) ln N,
//! N = T p (p + 1) / 2,        k(r) = p r - r (r + 1) / 2 + T + 1,
//! ```
//!
//! where `RSS` sums squared residuals over the `N` distinct entries (upper
//! triangle with diagonal). The best rank is kept if it beats the no-factor
//! score `N ln(RSS_0 / N)`; otherwise selection stops.

use serde::{Deserialize, Serialize};

use crate::decompose::{fit_single_factor, FitOptions};
use crate::deflate::{deflate, Scheme};
use crate::error::{Error, Result};
use crate::tensor::SemiSymTensor;

/// Number of distinct entries `T p (p + 1) / 2`.
pub fn distinct_entries(p: usize, t: usize) -> usize {
    t * p * (p + 1) / 2
}

/// Free parameters of a rank-`r` factor: Stiefel `V`, unit `u`, and `d`.
pub fn free_parameters(p: usize, t: usize, r: usize) -> usize {
    p * r - r * (r + 1) / 2 + t + 1
}

/// Sum of squares over the upper triangle including the diagonal.
pub fn distinct_sq_norm(x: &SemiSymTensor) -> f64 {
    let p = x.p();
    x.slices()
        .iter()
        .map(|a| {
            let mut s = 0.0;
            for j in 0..p {
                for i in 0..=j {
                    s += a[(i, j)] * a[(i, j)];
                }
            }
            s
        })
        .sum()
}

pub fn bic(rss: f64, n: usize, k: usize) -> f64 {
    let n = n as f64;
    n * (rss.max(1e-300) / n).ln() + k as f64 * n.ln()
}

/// Scores for one greedy step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BicStep {
    pub null_rss: f64,
    pub null_bic: f64,
    /// `rss[r - 1]` and `bic[r - 1]` for rank `r`.
    pub rss: Vec<f64>,
    pub bic: Vec<f64>,
    /// Accepted rank, if any.
    pub chosen: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BicSelection {
    pub ranks: Vec<usize>,
    pub steps: Vec<BicStep>,
    pub n: usize,
}

/// Selects factor ranks greedily. Accepted factors are removed with `scheme`.
pub fn rank_select_bic(
    x: &SemiSymTensor,
    r_max: usize,
    k_max: usize,
    opts: &FitOptions,
    scheme: Scheme,
) -> Result<BicSelection> {
    let (p, t) = (x.p(), x.t());
    if r_max == 0 || r_max > p {
        return Err(Error::RankTooLarge { rank: r_max, dim: p });
    }
    if k_max == 0 {
        return Err(Error::InvalidOptions("k_max must be >= 1".into()));
    }
    let n = distinct_entries(p, t);
    let mut residual = x.clone();
    let mut ranks = Vec::new();
    let mut steps = Vec::new();

    for k in 0..k_max {
        let null_rss = distinct_sq_norm(&residual);
        let null_bic = bic(null_rss, n, 0);
        if null_rss == 0.0 {
            break;
        }
        let mut rss = Vec::with_capacity(r_max);
        let mut scores = Vec::with_capacity(r_max);
        let mut fits = Vec::with_capacity(r_max);
        for r in 1..=r_max {
            let mut o = opts.clone();
            o.rank = r;
            let (f, _) = fit_single_factor(&residual, &o).map_err(|e| Error::at_factor(k, e))?;
            let fitted = residual.sub(&f.to_tensor()?)?;
            let value = distinct_sq_norm(&fitted);
            rss.push(value);
            scores.push(bic(value, n, free_parameters(p, t, r)));
            fits.push(f);
        }
        let best = (0..r_max).fold(0, |b, i| if scores[i] < scores[b] { i } else { b });
        let accept = scores[best] < null_bic;
        steps.push(BicStep {
            null_rss,
            null_bic,
            rss,
            bic: scores,
            chosen: accept.then_some(best + 1),
        });
        if !accept {
            break;
        }
        ranks.push(best + 1);
        residual = deflate(&residual, &fits[best], scheme).map_err(|e| Error::at_factor(k, e))?;
    }
    Ok(BicSelection { ranks, steps, n })
}
