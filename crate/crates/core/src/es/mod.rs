//! Evolution-strategy optimizers with optional DPPMC perturbation sampling.
//!
//! Every optimizer step samples perturbations, queries a [`Blackbox`] and
//! updates its state. The DPPMC variants oversample perturbations and keep a
//! diverse subset with a k-DPP before any function evaluation, so they spend
//! the same evaluations per step as their baselines.

mod blackbox;
mod cma;
mod gradient;
mod guided;
mod trust_region;

pub use blackbox::{benchmark_function, Benchmark, Blackbox, Noise};
pub use cma::{cma_es_step, run_cmaes, CmaParams, CmaRun, CmaState, CmaStep, MAX_CMA_SIGMA};
pub use gradient::{es_gradient, ridge_gradient, EsGradientEstimate};
pub use guided::{guided_es_step, run_guided_es, GuidedEsConfig, GuidedEsState, GuidedStep};
pub use trust_region::{
    run_trust_region_es, trust_region_es_step, GradientMode, TrustRegionConfig, TrustRegionState, TrustRegionStep,
};
