//! Semi-symmetric tensor PCA for collections of undirected networks observed
//! on a shared node set.
//!
//! A series of `T` symmetric `p x p` adjacency (or weight) matrices is stored as a
//! [`SemiSymTensor`]. The core fit approximates it by `d * V o V o u`: a rank-`r`
//! principal network `V V^T` with `V` orthonormal, scaled per slice by a unit
//! loading vector `u`. Around that fit the crate provides
//!
//! - [`decompose`]: the single-factor alternating fit with stable, random or
//!   given initialization, an eigen-scaled variant and a smoothed u-update;
//! - [`deflate`]: multi-factor fits by Hotelling, projection or Schur deflation,
//!   with orthogonality reports;
//! - [`changepoint`]: CUSUM tensors and changepoint localization;
//! - [`baselines`]: matricized PCA, its rank-truncated variant and HOSVD;
//! - [`simulate`]: spike, SBM and Dirichlet-RDPG generators, an adversarial
//!   fit harness and seeded Monte Carlo sweeps;
//! - [`cli`]: file formats, BIC rank selection and the command runner behind
//!   the `sstpca` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod changepoint;
pub mod cli;
pub mod decompose;
pub mod deflate;
pub mod error;
pub mod linalg;
pub mod simulate;
pub mod tensor;

pub use decompose::{fit_single_factor, Factor, FitDiagnostics, FitOptions, Init};
pub use deflate::{fit_multi, Decomposition, Scheme};
pub use error::{Error, Result};
pub use linalg::EigenSelection;
pub use tensor::SemiSymTensor;

/// Library version recorded in emitted artifacts.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
