use nalgebra::{DMatrix, DVector};

use super::Blackbox;
use crate::distributions::SamplePool;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct EsGradientEstimate {
    pub gradient: DVector<f64>,
    pub evaluations_used: u64,
    pub sigma: f64,
}

/// Gradient of the Gaussian σ-smoothing of `f` at `theta`.
///
/// Forward form: (1/(mσ)) Σ f(θ + σg) g.
/// Antithetic form: (1/m) Σ ((f(θ + σg) − f(θ − σg)) / (2σ)) g, which cancels
/// every even-order term of f around θ.
pub fn es_gradient(
    f: &Blackbox,
    theta: &DVector<f64>,
    sigma: f64,
    perturbations: &SamplePool,
    antithetic: bool,
) -> Result<EsGradientEstimate> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidConfig(format!("sigma must be positive, got {sigma}")));
    }
    if perturbations.is_empty() {
        return Err(Error::InvalidConfig("no perturbations".into()));
    }
    if perturbations.dim() != theta.len() {
        return Err(Error::DimensionMismatch {
            expected: theta.len(),
            got: perturbations.dim(),
        });
    }
    let m = perturbations.len() as f64;
    let mut gradient = DVector::zeros(theta.len());
    let mut evaluations_used = 0;
    for g in perturbations.vectors() {
        let weight = if antithetic {
            evaluations_used += 2;
            let plus = f.eval(&(theta + g * sigma));
            let minus = f.eval(&(theta - g * sigma));
            (plus - minus) / (2.0 * sigma)
        } else {
            evaluations_used += 1;
            f.eval(&(theta + g * sigma)) / sigma
        };
        gradient.axpy(weight / m, g, 1.0);
    }
    Ok(EsGradientEstimate {
        gradient,
        evaluations_used,
        sigma,
    })
}

/// Solves (GᵀG + λI) g = Gᵀy, where row i of G is `directions[i]`.
pub fn ridge_gradient(directions: &[DVector<f64>], diffs: &[f64], lambda: f64) -> Result<DVector<f64>> {
    if directions.len() != diffs.len() || directions.is_empty() {
        return Err(Error::InvalidConfig(
            "ridge regression needs one difference per direction".into(),
        ));
    }
    if !(lambda > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "ridge lambda must be positive, got {lambda}"
        )));
    }
    let d = directions[0].len();
    let g = DMatrix::from_fn(directions.len(), d, |r, c| directions[r][c]);
    let y = DVector::from_column_slice(diffs);
    let gram = g.transpose() * &g + DMatrix::identity(d, d) * lambda;
    crate::linalg::solve_spd(&gram, &(g.transpose() * y))
        .ok_or_else(|| Error::InvalidConfig("ridge system is not positive definite".into()))
}
