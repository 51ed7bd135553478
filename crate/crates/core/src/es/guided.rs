//! Guided ES: antithetic ES whose perturbations mix an isotropic term with the
//! subspace spanned by the most recent gradient estimates,
//! Σ = (α/d) I + ((1 − α)/k) U Uᵀ.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{es_gradient, Blackbox};
use crate::distributions::{PoolSampler, Provenance, SamplePool};
use crate::dppmc::{dppmc_draw, DppmcConfig};
use crate::linalg::orthonormalize_columns;
use crate::record::{RunRecord, RunRow};
use crate::rng::seeded;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GuidedEsConfig {
    /// Number of past gradients spanning the guiding subspace.
    pub k: usize,
    /// Weight of the isotropic part, in [0, 1].
    pub alpha: f64,
    /// Smoothing radius.
    pub sigma: f64,
    /// Fixed descent step.
    pub learning_rate: f64,
    /// Gradient scale factor.
    pub beta: f64,
}

impl Default for GuidedEsConfig {
    fn default() -> Self {
        Self {
            k: 1,
            alpha: 0.5,
            sigma: 0.1,
            learning_rate: 0.1,
            beta: 2.0,
        }
    }
}

impl GuidedEsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidConfig(format!(
                "alpha must be in [0, 1], got {}",
                self.alpha
            )));
        }
        if !(self.sigma > 0.0) || !(self.learning_rate > 0.0) {
            return Err(Error::InvalidConfig("sigma and learning_rate must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct GuidedEsState {
    pub theta: DVector<f64>,
    pub buffer: VecDeque<DVector<f64>>,
    pub config: GuidedEsConfig,
}

impl GuidedEsState {
    pub fn new(theta: DVector<f64>, config: GuidedEsConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            theta,
            buffer: VecDeque::new(),
            config,
        })
    }

    /// Sampler for the current guided distribution.
    pub fn sampler(&self) -> GuidedSampler {
        let d = self.theta.len();
        let basis = if self.buffer.is_empty() || self.config.k == 0 {
            DMatrix::zeros(d, 0)
        } else {
            let cols: Vec<DVector<f64>> = self.buffer.iter().cloned().collect();
            orthonormalize_columns(DMatrix::from_columns(&cols), crate::dpp::REORTH_THRESHOLD)
        };
        GuidedSampler {
            dim: d,
            alpha: self.config.alpha,
            basis,
        }
    }
}

/// N(0, (α/d) I + ((1 − α)/k) U Uᵀ) with U orthonormal (d × k). With an empty
/// basis this is N(0, I/d).
#[derive(Debug, Clone)]
pub struct GuidedSampler {
    dim: usize,
    alpha: f64,
    basis: DMatrix<f64>,
}

impl GuidedSampler {
    fn draw(&self, rng: &mut dyn RngCore) -> DVector<f64> {
        let d = self.dim;
        let k = self.basis.ncols();
        let xi = DVector::from_iterator(d, (0..d).map(|_| StandardNormal.sample(rng)));
        if k == 0 {
            return xi / (d as f64).sqrt();
        }
        let eta = DVector::from_iterator(k, (0..k).map(|_| StandardNormal.sample(rng)));
        xi * (self.alpha / d as f64).sqrt() + (&self.basis * eta) * ((1.0 - self.alpha) / k as f64).sqrt()
    }
}

impl PoolSampler for GuidedSampler {
    fn dim(&self) -> usize {
        self.dim
    }

    fn sample_pool(&self, n: usize, rng: &mut dyn RngCore) -> SamplePool {
        let vectors = (0..n).map(|_| self.draw(rng)).collect();
        SamplePool::uniform(self.dim, vectors, Provenance::Fresh).expect("consistent dimension")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GuidedStep {
    pub evaluations: u64,
    pub pool_size: usize,
    pub gradient: DVector<f64>,
}

pub fn guided_es_step<R: Rng>(
    state: &mut GuidedEsState,
    f: &Blackbox,
    m: usize,
    dppmc: Option<&DppmcConfig>,
    rng: &mut R,
) -> Result<GuidedStep> {
    if m == 0 {
        return Err(Error::InvalidConfig("m must be at least 1".into()));
    }
    let sampler = state.sampler();
    let (perturbations, pool_size) = match dppmc {
        Some(cfg) => {
            let cfg = DppmcConfig { m, ..cfg.clone() };
            let draw = dppmc_draw(&sampler, &cfg, rng)?;
            (draw.selected, draw.pool.len())
        }
        None => (sampler.sample_pool(m, rng), m),
    };
    let cfg = &state.config;
    let est = es_gradient(f, &state.theta, cfg.sigma, &perturbations, true)?;
    let gradient = est.gradient * cfg.beta;
    state.theta.axpy(-cfg.learning_rate, &gradient, 1.0);
    if cfg.k > 0 && gradient.norm() > 0.0 {
        state.buffer.push_back(gradient.clone());
        while state.buffer.len() > cfg.k {
            state.buffer.pop_front();
        }
    }
    Ok(GuidedStep {
        evaluations: est.evaluations_used,
        pool_size,
        gradient,
    })
}

/// Runs `iterations` Guided ES steps and records f(θ) after each.
#[allow(clippy::too_many_arguments)]
pub fn run_guided_es(
    f: &Blackbox,
    theta0: DVector<f64>,
    config: GuidedEsConfig,
    m: usize,
    iterations: usize,
    dppmc: Option<&DppmcConfig>,
    seed: u64,
    method: &str,
) -> Result<RunRecord> {
    let mut rng = seeded(seed);
    let mut state = GuidedEsState::new(theta0, config)?;
    let mut record = RunRecord::new();
    for iteration in 0..iterations {
        guided_es_step(&mut state, f, m, dppmc, &mut rng)?;
        record.push(RunRow {
            iteration,
            cumulative_evals: f.evaluations(),
            objective: f.true_value(&state.theta),
            seed,
            method: method.to_string(),
        });
    }
    Ok(record)
}
