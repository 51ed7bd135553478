//! Oversample, diversify with a k-DPP, average.
//!
//! [`dppmc_draw`] draws `round(ρ·m)` i.i.d. points, builds an RBF L-ensemble
//! over them (optionally on a renormalized view where every point has the
//! pool's mean norm) and keeps `m` of them with a k-DPP. The selected points
//! are always the original draws; [`dppmc_estimate`] averages an integrand
//! over them without importance weights.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::distributions::{PoolSampler, SamplePool};
use crate::dpp::{sample_k_dpp, LEnsemble};
use crate::{Error, Result};

pub const DEFAULT_RHO: f64 = 10.0;
pub const DEFAULT_RBF_SIGMA: f64 = 0.5;
/// Diagonal jitter added to RBF L-ensembles before eigendecomposition.
pub const RBF_JITTER: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DppmcConfig {
    /// Number of points kept.
    pub m: usize,
    /// Oversampling multiplier; the pool holds round(rho * m) points.
    pub rho: f64,
    pub renormalize: bool,
    /// RBF bandwidth of the similarity kernel.
    pub sigma: f64,
}

impl Default for DppmcConfig {
    fn default() -> Self {
        Self {
            m: 1,
            rho: DEFAULT_RHO,
            renormalize: false,
            sigma: DEFAULT_RBF_SIGMA,
        }
    }
}

impl DppmcConfig {
    pub fn new(m: usize) -> Self {
        Self { m, ..Self::default() }
    }

    pub fn with_rho(mut self, rho: f64) -> Self {
        self.rho = rho;
        self
    }

    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma = sigma;
        self
    }

    pub fn with_renormalize(mut self, renormalize: bool) -> Self {
        self.renormalize = renormalize;
        self
    }

    pub fn pool_size(&self) -> usize {
        pool_size(self.m, self.rho)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::InvalidConfig("m must be at least 1".into()));
        }
        if !(self.rho > 1.0) || !self.rho.is_finite() {
            return Err(Error::InvalidConfig(format!("rho must exceed 1, got {}", self.rho)));
        }
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "sigma must be positive, got {}",
                self.sigma
            )));
        }
        Ok(())
    }
}

/// round(rho * m), but never below m + 1.
pub fn pool_size(m: usize, rho: f64) -> usize {
    ((rho * m as f64).round() as usize).max(m + 1)
}

#[derive(Debug, Clone)]
pub struct DppmcDraw {
    pub selected: SamplePool,
    pub pool: SamplePool,
    pub selected_indices: Vec<usize>,
}

/// L_ij = exp(−‖x_i − x_j‖² / (2σ²)).
pub fn rbf_l_ensemble(pool: &SamplePool, sigma: f64) -> Result<LEnsemble> {
    LEnsemble::new(rbf_matrix(pool, sigma)?)
}

pub fn rbf_matrix(pool: &SamplePool, sigma: f64) -> Result<DMatrix<f64>> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidConfig(format!("sigma must be positive, got {sigma}")));
    }
    let n = pool.len();
    let denom = 2.0 * sigma * sigma;
    let mut l = DMatrix::identity(n, n);
    for i in 0..n {
        for j in 0..i {
            let d2 = (pool.get(i) - pool.get(j)).norm_squared();
            let v = (-d2 / denom).exp();
            l[(i, j)] = v;
            l[(j, i)] = v;
        }
    }
    Ok(l)
}

/// Keeps `m` items of `pool` with a k-DPP on the RBF similarity of the pool
/// (or of its renormalized view). On `InsufficientRank` the bandwidth is
/// halved once before giving up.
pub fn dpp_downsample<R: Rng + ?Sized>(
    pool: &SamplePool,
    m: usize,
    sigma: f64,
    renormalize: bool,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if m > pool.len() {
        return Err(Error::InvalidConfig(format!(
            "cannot select {m} items from a pool of {}",
            pool.len()
        )));
    }
    let view;
    let kernel_pool = if renormalize {
        view = pool.renormalized();
        &view
    } else {
        pool
    };
    let attempt = |sigma: f64, rng: &mut R| -> Result<Vec<usize>> {
        let mut matrix = rbf_matrix(kernel_pool, sigma)?;
        for i in 0..matrix.nrows() {
            matrix[(i, i)] += RBF_JITTER;
        }
        let l = LEnsemble::new(matrix)?;
        sample_k_dpp(&l, m, rng)
    };
    match attempt(sigma, rng) {
        Err(Error::InsufficientRank { .. }) => attempt(sigma / 2.0, rng),
        other => other,
    }
}

pub fn dppmc_draw<S: PoolSampler + ?Sized, R: Rng>(dist: &S, cfg: &DppmcConfig, rng: &mut R) -> Result<DppmcDraw> {
    cfg.validate()?;
    let pool = dist.sample_pool(cfg.pool_size(), rng);
    let selected_indices = dpp_downsample(&pool, cfg.m, cfg.sigma, cfg.renormalize, rng)?;
    Ok(DppmcDraw {
        selected: pool.select(&selected_indices),
        pool,
        selected_indices,
    })
}

/// (1/m) Σ_{v ∈ selected} h(v).
pub fn dppmc_estimate<H>(draw: &DppmcDraw, h: H) -> DVector<f64>
where
    H: Fn(&DVector<f64>) -> DVector<f64>,
{
    mean_of(draw.selected.vectors(), h)
}

pub(crate) fn mean_of<H>(vectors: &[DVector<f64>], h: H) -> DVector<f64>
where
    H: Fn(&DVector<f64>) -> DVector<f64>,
{
    let mut iter = vectors.iter().map(&h);
    let first = iter.next().expect("at least one selected vector");
    let total = iter.fold(first, |acc, x| acc + x);
    total / vectors.len() as f64
}
