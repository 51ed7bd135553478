//! Trust-Region ES: reuses the δm archived evaluations closest to the current
//! iterate and fits the gradient from forward differences.
//!
//! Baseline epochs reuse δm archived points and sample (1 − δ)m fresh
//! perturbations. DPPMC epochs sample (1 − δ/2)m fresh perturbations, pool
//! them with the δm reused ones and keep m with a k-DPP; only the fresh
//! perturbations that survive the selection are evaluated.

use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{ridge_gradient, Blackbox};
use crate::distributions::{sample_isotropic_gaussian, Provenance, SamplePool};
use crate::dppmc::dpp_downsample;
use crate::record::{RunRecord, RunRow};
use crate::rng::seeded;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GradientMode {
    /// Monte Carlo average of forward differences over fresh directions.
    Mc,
    /// Ridge regression over all m perturbations.
    Ridge,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrustRegionConfig {
    /// Reuse fraction δ.
    pub delta: f64,
    /// Ridge regularization λ.
    pub lambda: f64,
    pub mode: GradientMode,
    /// Perturbation scale.
    pub sigma: f64,
    pub learning_rate: f64,
    /// RBF bandwidth of the DPP similarity kernel.
    pub dpp_sigma: f64,
}

impl Default for TrustRegionConfig {
    fn default() -> Self {
        Self {
            delta: 0.2,
            lambda: 1e-3,
            mode: GradientMode::Ridge,
            sigma: 0.1,
            learning_rate: 0.01,
            dpp_sigma: crate::dppmc::DEFAULT_RBF_SIGMA,
        }
    }
}

impl TrustRegionConfig {
    pub fn validate(&self, m: usize) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "delta must be in (0, 1), got {}",
                self.delta
            )));
        }
        if self.delta * (m as f64) < 1.0 {
            return Err(Error::InvalidConfig(format!(
                "delta * m must be at least 1, got {}",
                self.delta * m as f64
            )));
        }
        if !(self.lambda > 0.0) || !(self.sigma > 0.0) || !(self.learning_rate > 0.0) || !(self.dpp_sigma > 0.0) {
            return Err(Error::InvalidConfig(
                "lambda, sigma, learning_rate and dpp_sigma must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Number of archived points reused per epoch, round(δm).
    pub fn reuse_count(&self, m: usize) -> usize {
        ((self.delta * m as f64).round() as usize).min(m)
    }
}

#[derive(Debug, Clone)]
pub struct TrustRegionState {
    pub theta: DVector<f64>,
    /// Evaluated points θ_prev + ε with their observed values.
    pub archive: Vec<(DVector<f64>, f64)>,
    pub config: TrustRegionConfig,
}

impl TrustRegionState {
    pub fn new(theta: DVector<f64>, config: TrustRegionConfig) -> Self {
        Self {
            theta,
            archive: Vec::new(),
            config,
        }
    }
}

/// Accounting of one epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct TrustRegionStep {
    /// Archived points offered for reuse.
    pub reused: usize,
    /// Reused points that made it into the final m.
    pub reused_selected: usize,
    /// Fresh perturbations drawn.
    pub fresh_sampled: usize,
    pub pool_size: usize,
    pub selected: usize,
    /// Blackbox queries made this epoch (including f(θ)).
    pub evaluations: u64,
    pub gradient: DVector<f64>,
}

/// Fresh perturbations drawn by a DPPMC epoch that reuses `reused` points:
/// (1 − δ/2)m = m − δm + δm/2, with the half rounded up.
fn dppmc_fresh_count(m: usize, reused: usize) -> usize {
    m - reused + reused.div_ceil(2)
}

pub fn trust_region_es_step<R: Rng>(
    state: &mut TrustRegionState,
    f: &Blackbox,
    m: usize,
    dppmc_enabled: bool,
    rng: &mut R,
) -> Result<TrustRegionStep> {
    let cfg = state.config.clone();
    cfg.validate(m)?;
    let d = state.theta.len();
    let before = f.evaluations();
    let f0 = f.eval(&state.theta);

    let mut archive = std::mem::take(&mut state.archive);
    archive.sort_by(|a, b| {
        let da = (&a.0 - &state.theta).norm_squared();
        let db = (&b.0 - &state.theta).norm_squared();
        da.total_cmp(&db)
    });
    archive.truncate(cfg.reuse_count(m));
    let reused = archive.len();

    let fresh_sampled = if dppmc_enabled {
        dppmc_fresh_count(m, reused)
    } else {
        m - reused
    };
    let fresh: Vec<DVector<f64>> = sample_isotropic_gaussian(d, fresh_sampled, rng)
        .into_vectors()
        .into_iter()
        .map(|g| g * cfg.sigma)
        .collect();

    // Pool of perturbations relative to the current θ: reused first.
    let mut vectors: Vec<DVector<f64>> = archive.iter().map(|(p, _)| p - &state.theta).collect();
    let mut tags = vec![Provenance::Reused; reused];
    vectors.extend(fresh);
    tags.extend(std::iter::repeat_n(Provenance::Fresh, fresh_sampled));
    let pool = SamplePool::new(d, vectors, tags)?;
    let pool_size = pool.len();

    let selected: Vec<usize> = if pool_size > m {
        dpp_downsample(&pool, m, cfg.dpp_sigma, false, rng)?
    } else {
        (0..pool_size).collect()
    };

    let mut directions = Vec::with_capacity(selected.len());
    let mut values = Vec::with_capacity(selected.len());
    let mut fresh_dirs = Vec::new();
    let mut fresh_diffs = Vec::new();
    for &i in &selected {
        let eps = pool.get(i).clone();
        let value = if i < reused {
            archive[i].1
        } else {
            let v = f.eval(&(&state.theta + &eps));
            fresh_dirs.push(eps.clone());
            fresh_diffs.push(v - f0);
            v
        };
        directions.push(eps);
        values.push(value);
    }

    if !f0.is_finite() || values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Diverged(format!("f(theta) = {f0}")));
    }
    let gradient = match cfg.mode {
        GradientMode::Ridge => {
            let diffs: Vec<f64> = values.iter().map(|v| v - f0).collect();
            ridge_gradient(&directions, &diffs, cfg.lambda)?
        }
        GradientMode::Mc => {
            let n = fresh_dirs.len().max(1) as f64;
            let mut g = DVector::zeros(d);
            for (eps, diff) in fresh_dirs.iter().zip(&fresh_diffs) {
                g.axpy(diff / (n * cfg.sigma * cfg.sigma), eps, 1.0);
            }
            g
        }
    };

    state.archive = directions
        .iter()
        .zip(&values)
        .map(|(eps, &v)| (&state.theta + eps, v))
        .collect();
    state.theta.axpy(-cfg.learning_rate, &gradient, 1.0);

    Ok(TrustRegionStep {
        reused,
        reused_selected: selected.iter().filter(|&&i| i < reused).count(),
        fresh_sampled,
        pool_size,
        selected: selected.len(),
        evaluations: f.evaluations() - before,
        gradient,
    })
}

#[allow(clippy::too_many_arguments)]
pub fn run_trust_region_es(
    f: &Blackbox,
    theta0: DVector<f64>,
    config: TrustRegionConfig,
    m: usize,
    iterations: usize,
    dppmc_enabled: bool,
    seed: u64,
    method: &str,
) -> Result<RunRecord> {
    config.validate(m)?;
    let mut rng = seeded(seed);
    let mut state = TrustRegionState::new(theta0, config);
    let mut record = RunRecord::new();
    for iteration in 0..iterations {
        trust_region_es_step(&mut state, f, m, dppmc_enabled, &mut rng)?;
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
