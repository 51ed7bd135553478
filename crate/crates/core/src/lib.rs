//! Structured Monte Carlo sampling via determinantal point processes (DPPMC).
//!
//! The crate is organised bottom-up:
//!
//! * [`distributions`]: Gaussian mixtures, isotropic Gaussians and a Halton
//!   quasi Monte Carlo path, all producing [`SamplePool`]s.
//! * [`dpp`]: L-ensembles, marginal kernels, exact subset probabilities and
//!   the spectral DPP / k-DPP samplers.
//! * [`dppmc`]: oversample, build an RBF L-ensemble over the pool, k-DPP
//!   downsample and average.
//! * [`kernels`]: Gaussian mixture kernels and their random-feature
//!   estimators (i.i.d., QMC and DPPMC) with an empirical-MSE harness.
//! * [`es`]: ES gradients, Guided ES, Trust-Region ES and CMA-ES, each with a
//!   DPPMC-enhanced sampling path, plus the benchmark blackboxes.
//! * [`theory`]: constructive checks of the variance-reduction results.

// `!(x > 0.0)` is used deliberately so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod distributions;
pub mod dpp;
pub mod dppmc;
mod error;
pub mod es;
pub mod kernels;
pub mod linalg;
pub mod record;
pub mod rng;
pub mod theory;

pub use distributions::{GaussianMixture, Provenance, SamplePool};
pub use dpp::{LEnsemble, MarginalKernel};
pub use dppmc::{DppmcConfig, DppmcDraw};
pub use error::{Error, Result};
pub use record::{RunRecord, RunRow};
