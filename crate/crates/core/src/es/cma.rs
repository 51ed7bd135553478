//! (μ/μ_w, λ)-CMA-ES with cumulative step-size adaptation and rank-one plus
//! rank-μ covariance updates, using the standard default constants.
//!
//! The DPPMC variant draws ρλ standard-normal vectors z, maps each to its
//! search-space step σ·B·D·z, keeps λ of them with a k-DPP on the RBF
//! similarity of those steps, and evaluates only the kept candidates. Whitened
//! z in moderate dimension sit too far apart for a fixed bandwidth to see any
//! similarity; the steps shrink with σ, so repulsion matters as the search
//! contracts.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::Blackbox;
use crate::distributions::{sample_isotropic_gaussian, Provenance, SamplePool};
use crate::dppmc::{dpp_downsample, DppmcConfig};
use crate::linalg::Spectrum;
use crate::record::{RunRecord, RunRow};
use crate::rng::seeded;
use crate::{Error, Result};

/// Step sizes beyond this abort the run.
pub const MAX_CMA_SIGMA: f64 = 1e8;
/// Floor applied to the eigenvalues of C.
pub const EIGEN_FLOOR: f64 = 1e-14;

/// Strategy constants derived from (d, λ).
#[derive(Debug, Clone, PartialEq)]
pub struct CmaParams {
    pub dim: usize,
    pub lambda: usize,
    pub mu: usize,
    pub weights: Vec<f64>,
    pub mu_eff: f64,
    pub c_sigma: f64,
    pub d_sigma: f64,
    pub c_c: f64,
    pub c_1: f64,
    pub c_mu: f64,
    /// E‖N(0, I)‖.
    pub chi_n: f64,
}

impl CmaParams {
    pub fn new(dim: usize, lambda: usize) -> Result<Self> {
        if lambda < 4 {
            return Err(Error::InvalidConfig(format!("lambda must be at least 4, got {lambda}")));
        }
        if dim == 0 {
            return Err(Error::InvalidConfig("dimension must be positive".into()));
        }
        let n = dim as f64;
        let mu = lambda / 2;
        let raw: Vec<f64> = (1..=mu)
            .map(|i| ((lambda as f64 + 1.0) / 2.0).ln() - (i as f64).ln())
            .collect();
        let total: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let mu_eff = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();

        let c_sigma = (mu_eff + 2.0) / (n + mu_eff + 5.0);
        let d_sigma = 1.0 + 2.0 * (((mu_eff - 1.0) / (n + 1.0)).sqrt() - 1.0).max(0.0) + c_sigma;
        let c_c = (4.0 + mu_eff / n) / (n + 4.0 + 2.0 * mu_eff / n);
        let c_1 = 2.0 / ((n + 1.3).powi(2) + mu_eff);
        let c_mu = (1.0 - c_1).min(2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((n + 2.0).powi(2) + mu_eff));
        let chi_n = n.sqrt() * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n));
        Ok(Self {
            dim,
            lambda,
            mu,
            weights,
            mu_eff,
            c_sigma,
            d_sigma,
            c_c,
            c_1,
            c_mu,
            chi_n,
        })
    }
}

#[derive(Debug, Clone)]
pub struct CmaState {
    pub mean: DVector<f64>,
    pub sigma: f64,
    pub cov: DMatrix<f64>,
    pub path_sigma: DVector<f64>,
    pub path_c: DVector<f64>,
    pub params: CmaParams,
    pub generation: usize,
    /// Best observed value and where it was observed.
    pub best: Option<(DVector<f64>, f64)>,
}

impl CmaState {
    pub fn new(mean: DVector<f64>, sigma: f64, lambda: usize) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "initial sigma must be positive, got {sigma}"
            )));
        }
        let d = mean.len();
        let params = CmaParams::new(d, lambda)?;
        Ok(Self {
            mean,
            sigma,
            cov: DMatrix::identity(d, d),
            path_sigma: DVector::zeros(d),
            path_c: DVector::zeros(d),
            params,
            generation: 0,
            best: None,
        })
    }

    /// B and D with C = B diag(D²) Bᵀ, eigenvalues floored.
    fn decompose(&self) -> (DMatrix<f64>, DVector<f64>) {
        let spectrum = Spectrum::of(&self.cov);
        let d = DVector::from_iterator(
            spectrum.len(),
            spectrum.eigenvalues.iter().map(|&l| l.max(EIGEN_FLOOR).sqrt()),
        );
        (spectrum.eigenvectors, d)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CmaStep {
    pub evaluations: u64,
    pub pool_size: usize,
    pub best_value: f64,
}

pub fn cma_es_step<R: Rng>(
    state: &mut CmaState,
    f: &Blackbox,
    lambda: usize,
    dppmc: Option<&DppmcConfig>,
    rng: &mut R,
) -> Result<CmaStep> {
    if lambda != state.params.lambda {
        state.params = CmaParams::new(state.mean.len(), lambda)?;
    }
    let p = state.params.clone();
    let n = state.mean.len();
    let (b, dvec) = state.decompose();
    let bd = &b * DMatrix::from_diagonal(&dvec);

    let (zs, pool_size) = match dppmc {
        Some(cfg) => {
            let cfg = DppmcConfig {
                m: lambda,
                ..cfg.clone()
            };
            cfg.validate()?;
            let pool = sample_isotropic_gaussian(n, cfg.pool_size(), rng);
            let steps = SamplePool::uniform(
                n,
                pool.vectors().iter().map(|z| (&bd * z) * state.sigma).collect(),
                Provenance::Fresh,
            )?;
            let picked = dpp_downsample(&steps, lambda, cfg.sigma, cfg.renormalize, rng)?;
            (pool.select(&picked).into_vectors(), pool.len())
        }
        None => (sample_isotropic_gaussian(n, lambda, rng).into_vectors(), lambda),
    };

    let before = f.evaluations();
    let mut candidates: Vec<(DVector<f64>, DVector<f64>, f64)> = zs
        .into_iter()
        .map(|z| {
            let y = &bd * &z;
            let x = &state.mean + &y * state.sigma;
            let value = f.eval(&x);
            (z, y, value)
        })
        .collect();
    candidates.sort_by(|a, b| a.2.total_cmp(&b.2));

    let best_value = candidates[0].2;
    let best_x = &state.mean + &candidates[0].1 * state.sigma;
    if state.best.as_ref().is_none_or(|(_, v)| best_value < *v) {
        state.best = Some((best_x, best_value));
    }

    let mut y_w = DVector::zeros(n);
    let mut z_w = DVector::zeros(n);
    for (w, (z, y, _)) in p.weights.iter().zip(&candidates) {
        y_w.axpy(*w, y, 1.0);
        z_w.axpy(*w, z, 1.0);
    }
    state.mean.axpy(state.sigma, &y_w, 1.0);

    // C^{-1/2} y_w = B z_w.
    let cs = p.c_sigma;
    state.path_sigma = &state.path_sigma * (1.0 - cs) + (&b * &z_w) * (cs * (2.0 - cs) * p.mu_eff).sqrt();
    let gen = state.generation as i32 + 1;
    let ps_norm = state.path_sigma.norm();
    let h_sigma = ps_norm / (1.0 - (1.0 - cs).powi(2 * gen)).sqrt() < (1.4 + 2.0 / (n as f64 + 1.0)) * p.chi_n;
    let h = if h_sigma { 1.0 } else { 0.0 };
    let cc = p.c_c;
    state.path_c = &state.path_c * (1.0 - cc) + &y_w * (h * (cc * (2.0 - cc) * p.mu_eff).sqrt());

    let mut rank_mu = DMatrix::zeros(n, n);
    for (w, (_, y, _)) in p.weights.iter().zip(&candidates) {
        rank_mu += (y * y.transpose()) * *w;
    }
    let rank_one = &state.path_c * state.path_c.transpose();
    let correction = (1.0 - h) * cc * (2.0 - cc);
    state.cov = &state.cov * (1.0 - p.c_1 - p.c_mu) + (rank_one + &state.cov * correction) * p.c_1 + rank_mu * p.c_mu;
    state.cov = (&state.cov + state.cov.transpose()) * 0.5;

    state.sigma *= ((cs / p.d_sigma) * (ps_norm / p.chi_n - 1.0)).exp();
    state.generation += 1;
    if !(state.sigma <= MAX_CMA_SIGMA) {
        return Err(Error::CovarianceBlowup {
            sigma: state.sigma,
            generation: state.generation,
        });
    }
    Ok(CmaStep {
        evaluations: f.evaluations() - before,
        pool_size,
        best_value,
    })
}

/// Settings of one CMA-ES run.
#[derive(Debug, Clone, PartialEq)]
pub struct CmaRun {
    pub x0: DVector<f64>,
    pub sigma0: f64,
    pub lambda: usize,
    pub generations: usize,
    pub dppmc: Option<DppmcConfig>,
}

/// Runs CMA-ES and records the noise-free objective at the mean after every
/// generation.
pub fn run_cmaes(f: &Blackbox, run: &CmaRun, seed: u64, method: &str) -> Result<RunRecord> {
    let mut rng = seeded(seed);
    let mut state = CmaState::new(run.x0.clone(), run.sigma0, run.lambda)?;
    let mut record = RunRecord::new();
    for iteration in 0..run.generations {
        cma_es_step(&mut state, f, run.lambda, run.dppmc.as_ref(), &mut rng)?;
        record.push(RunRow {
            iteration,
            cumulative_evals: f.evaluations(),
            objective: f.true_value(&state.mean),
            seed,
            method: method.to_string(),
        });
    }
    Ok(record)
}
