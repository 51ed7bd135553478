//! Constructive checks of DPP variance reduction for importance-weighted
//! downsampled estimators.
//!
//! An estimator keeps item i with indicator ε_i, E[ε_i] = p_i, and returns
//! F̂ = (1/N) Σ (ε_i / w_i) a_i, with w_i = p_i in the unbiased case. Its
//! variance (trace of the covariance for vector-valued a_i) depends on the
//! inclusion law only through the pairwise moments E[ε_i ε_j]:
//!
//! Var F̂ = (1/N²) Σ_{i,j} (E[ε_i ε_j] − p_i p_j) ⟨a_i, a_j⟩ / (w_i w_j).
//!
//! Under a DPP with marginal kernel K, E[ε_i ε_j] = K_ii K_jj − K_ij² for
//! i ≠ j, so a kernel with diagonal p and nonzero off-diagonal entries only
//! where ⟨a_i, a_j⟩ > 0 strictly lowers the variance relative to independent
//! inclusion, by (1/N²) Σ_{i≠j} K_ij² ⟨a_i, a_j⟩ / (w_i w_j).

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dpp::{
    combinations, enumerate_marginal_distribution, sample_dpp_l, MarginalKernel, DPP_ENUMERATION_CAP,
    K_DPP_ENUMERATION_CAP,
};
use crate::es::Benchmark;
use crate::linalg::{max_asymmetry, orthonormalize_columns, principal_minor, Spectrum};
use crate::rng::substream;
use crate::{Error, Result};

/// Eigenvalues of a constructed kernel must lie in (TOL, 1 − TOL).
pub const KERNEL_INTERIOR_TOL: f64 = 1e-9;
pub const BISECTION_STEPS: usize = 60;
pub const EPSILON_SHRINK: f64 = 0.99;
/// Largest N for which means and variances are also checked by enumeration.
pub const ENUMERATION_LIMIT: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DownsampledEstimatorSpec {
    /// h(v_i); scalars are one-dimensional vectors.
    pub values: Vec<DVector<f64>>,
    pub probabilities: Vec<f64>,
    pub weights: Vec<f64>,
}

impl DownsampledEstimatorSpec {
    pub fn unbiased(values: Vec<DVector<f64>>, probabilities: Vec<f64>) -> Result<Self> {
        let weights = probabilities.clone();
        Self::biased(values, probabilities, weights)
    }

    pub fn biased(values: Vec<DVector<f64>>, probabilities: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        let n = values.len();
        if n == 0 || probabilities.len() != n || weights.len() != n {
            return Err(Error::InvalidConfig(
                "values, probabilities and weights must be nonempty and of equal length".into(),
            ));
        }
        let dim = values[0].len();
        if let Some(v) = values.iter().find(|v| v.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: v.len(),
            });
        }
        if probabilities.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
            return Err(Error::InvalidConfig("probabilities must lie in [0, 1]".into()));
        }
        if weights.iter().any(|&w| !(w > 0.0)) {
            return Err(Error::InvalidConfig("weights must be positive".into()));
        }
        Ok(Self {
            values,
            probabilities,
            weights,
        })
    }

    pub fn scalar(values: &[f64], probabilities: Vec<f64>) -> Result<Self> {
        Self::unbiased(
            values.iter().map(|&a| DVector::from_element(1, a)).collect(),
            probabilities,
        )
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.values[0].len()
    }

    fn inner(&self, i: usize, j: usize) -> f64 {
        self.values[i].dot(&self.values[j])
    }

    /// (1/N) Σ a_i, the full-sample value the estimator targets.
    pub fn full_average(&self) -> DVector<f64> {
        self.values.iter().sum::<DVector<f64>>() / self.len() as f64
    }

    /// E[F̂] = (1/N) Σ (p_i / w_i) a_i, identical under every inclusion law
    /// with marginals p.
    pub fn expected_estimate(&self) -> DVector<f64> {
        let mut acc = DVector::zeros(self.dim());
        for i in 0..self.len() {
            acc.axpy(self.probabilities[i] / self.weights[i], &self.values[i], 1.0);
        }
        acc / self.len() as f64
    }

    pub fn bias(&self) -> DVector<f64> {
        self.expected_estimate() - self.full_average()
    }

    /// F̂ for one inclusion pattern.
    pub fn estimate(&self, included: &[usize]) -> DVector<f64> {
        let mut acc = DVector::zeros(self.dim());
        for &i in included {
            acc.axpy(1.0 / self.weights[i], &self.values[i], 1.0);
        }
        acc / self.len() as f64
    }
}

/// E[ε_i ε_j] under independent inclusion.
pub fn independent_pairwise(p: &[f64]) -> DMatrix<f64> {
    let n = p.len();
    DMatrix::from_fn(n, n, |i, j| if i == j { p[i] } else { p[i] * p[j] })
}

/// E[ε_i ε_j] = det(K_{ij}) under DPP(K).
pub fn dpp_pairwise(k: &MarginalKernel) -> DMatrix<f64> {
    let n = k.n_items();
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            k.matrix()[(i, i)]
        } else {
            principal_minor(k.matrix(), &[i, j])
        }
    })
}

/// Trace-variance of F̂ given the pairwise inclusion moments.
pub fn exact_variance_from_pairwise(spec: &DownsampledEstimatorSpec, pairwise: &DMatrix<f64>) -> Result<f64> {
    let n = spec.len();
    if pairwise.nrows() != n || pairwise.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: pairwise.nrows(),
        });
    }
    if max_asymmetry(pairwise) > 1e-12 {
        return Err(Error::NotSymmetric(max_asymmetry(pairwise)));
    }
    for i in 0..n {
        if (pairwise[(i, i)] - spec.probabilities[i]).abs() > 1e-12 {
            return Err(Error::InvalidConfig(format!(
                "pairwise diagonal {} differs from p_{i} = {}",
                pairwise[(i, i)],
                spec.probabilities[i]
            )));
        }
    }
    let (p, w) = (&spec.probabilities, &spec.weights);
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            let cov = pairwise[(i, j)] - p[i] * p[j];
            total += cov * spec.inner(i, j) / (w[i] * w[j]);
        }
    }
    Ok(total / (n * n) as f64)
}

#[derive(Debug, Clone)]
pub struct ConstructedKernel {
    pub kernel: MarginalKernel,
    pub epsilon: f64,
    /// Pairs (i < j) that received the off-diagonal entry ε.
    pub pairs: Vec<(usize, usize)>,
}

fn kernel_matrix(p: &[f64], pairs: &[(usize, usize)], epsilon: f64) -> DMatrix<f64> {
    let mut k = DMatrix::from_diagonal(&DVector::from_column_slice(p));
    for &(i, j) in pairs {
        k[(i, j)] = epsilon;
        k[(j, i)] = epsilon;
    }
    k
}

fn strictly_interior(m: &DMatrix<f64>) -> bool {
    let s = Spectrum::of(m);
    s.min() > KERNEL_INTERIOR_TOL && s.max() < 1.0 - KERNEL_INTERIOR_TOL
}

/// Builds K = diag(p) + ε·A, with A the adjacency of pairs whose values have
/// positive inner product.
///
/// Without an explicit `epsilon`, ε is the largest value in (0, ε_max] that
/// keeps every eigenvalue strictly inside (0, 1), found by bisection and then
/// shrunk slightly, where ε_max = min_i min(p_i, 1 − p_i).
pub fn construct_variance_reducing_kernel(
    spec: &DownsampledEstimatorSpec,
    epsilon: Option<f64>,
) -> Result<ConstructedKernel> {
    let n = spec.len();
    let d = spec.dim();
    if d == 1 && n < 3 {
        return Err(Error::InvalidConfig(format!(
            "scalar construction needs N >= 3, got {n}"
        )));
    }
    if d > 1 && n < d + 2 {
        return Err(Error::InvalidConfig(format!(
            "vector construction needs N >= d + 2 = {}, got {n}",
            d + 2
        )));
    }
    let p = &spec.probabilities;
    if p.iter().any(|&x| !(x > 0.0 && x < 1.0)) {
        return Err(Error::InvalidConfig("probabilities must lie strictly in (0, 1)".into()));
    }
    let pairs: Vec<(usize, usize)> = combinations(n, 2)
        .into_iter()
        .map(|c| (c[0], c[1]))
        .filter(|&(i, j)| spec.inner(i, j) > 0.0)
        .collect();
    if pairs.is_empty() {
        return Err(Error::NoPositivePair);
    }

    let epsilon = match epsilon {
        Some(e) => {
            if !(e >= 0.0) || !strictly_interior(&kernel_matrix(p, &pairs, e)) {
                return Err(Error::InvalidConfig(format!("epsilon {e} gives an invalid kernel")));
            }
            e
        }
        None => {
            let eps_max = p.iter().map(|&x| x.min(1.0 - x)).fold(f64::INFINITY, f64::min);
            if strictly_interior(&kernel_matrix(p, &pairs, eps_max)) {
                eps_max * EPSILON_SHRINK
            } else {
                let (mut lo, mut hi) = (0.0, eps_max);
                for _ in 0..BISECTION_STEPS {
                    let mid = 0.5 * (lo + hi);
                    if strictly_interior(&kernel_matrix(p, &pairs, mid)) {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                lo * EPSILON_SHRINK
            }
        }
    };
    let kernel = MarginalKernel::new(kernel_matrix(p, &pairs, epsilon))?;
    Ok(ConstructedKernel { kernel, epsilon, pairs })
}

/// Exact E[F̂] and Var F̂ under DPP(K) by summing over all inclusion patterns.
pub fn enumerate_moments(spec: &DownsampledEstimatorSpec, k: &MarginalKernel) -> Result<(DVector<f64>, f64)> {
    let law = enumerate_marginal_distribution(k)?;
    moments_over(spec, law.into_iter())
}

/// Exact E[F̂] and Var F̂ under independent Bernoulli(p_i) inclusion.
pub fn enumerate_moments_independent(spec: &DownsampledEstimatorSpec) -> Result<(DVector<f64>, f64)> {
    let n = spec.len();
    if n > DPP_ENUMERATION_CAP {
        return Err(Error::CapExceeded {
            n,
            cap: DPP_ENUMERATION_CAP,
        });
    }
    let p = &spec.probabilities;
    let law = crate::dpp::all_subsets(n).into_iter().map(|s| {
        let prob: f64 = (0..n)
            .map(|i| if s.binary_search(&i).is_ok() { p[i] } else { 1.0 - p[i] })
            .product();
        (s, prob)
    });
    moments_over(spec, law)
}

fn moments_over(
    spec: &DownsampledEstimatorSpec,
    law: impl Iterator<Item = (Vec<usize>, f64)>,
) -> Result<(DVector<f64>, f64)> {
    let outcomes: Vec<(DVector<f64>, f64)> = law.map(|(s, prob)| (spec.estimate(&s), prob)).collect();
    let mut mean = DVector::zeros(spec.dim());
    for (est, prob) in &outcomes {
        mean.axpy(*prob, est, 1.0);
    }
    let var = outcomes
        .iter()
        .map(|(est, prob)| prob * (est - &mean).norm_squared())
        .sum();
    Ok((mean, var))
}

/// Sample mean, trace-variance and standard errors of repeated estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalMoments {
    pub mean: Vec<f64>,
    pub mean_stderr: Vec<f64>,
    pub variance: f64,
    pub variance_stderr: f64,
    pub draws: usize,
}

fn empirical_moments(samples: &[DVector<f64>]) -> EmpiricalMoments {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<DVector<f64>>() / n;
    let sq: Vec<f64> = samples.iter().map(|s| (s - &mean).norm_squared()).collect();
    let variance = sq.iter().sum::<f64>() / (n - 1.0);
    let sq_mean = sq.iter().sum::<f64>() / n;
    let sq_var = sq.iter().map(|x| (x - sq_mean).powi(2)).sum::<f64>() / (n - 1.0);
    let mean_stderr = (0..mean.len())
        .map(|c| {
            let v = samples.iter().map(|s| (s[c] - mean[c]).powi(2)).sum::<f64>() / (n - 1.0);
            (v / n).sqrt()
        })
        .collect();
    EmpiricalMoments {
        mean: mean.iter().copied().collect(),
        mean_stderr,
        variance,
        variance_stderr: (sq_var / n).sqrt(),
        draws: samples.len(),
    }
}

fn sample_independent<R: Rng + ?Sized>(p: &[f64], rng: &mut R) -> Vec<usize> {
    (0..p.len()).filter(|&i| rng.random::<f64>() < p[i]).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceReductionReport {
    pub epsilon: f64,
    pub var_iid: f64,
    pub var_dpp_closed_form: f64,
    /// (1/N²) Σ_{i≠j} K_ij² ⟨a_i, a_j⟩ / (w_i w_j).
    pub variance_gap_identity: f64,
    pub var_dpp_empirical: f64,
    pub var_dpp_empirical_stderr: f64,
    pub mean_iid: Vec<f64>,
    pub mean_dpp: Vec<f64>,
    pub mean_exact: Vec<f64>,
    /// Exact moments by enumeration, when N is small enough.
    pub enumerated: Option<EnumeratedMoments>,
    pub strict_reduction: bool,
    pub gap_identity_holds: bool,
    pub means_agree: bool,
    pub empirical_variance_agrees: bool,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnumeratedMoments {
    pub mean_iid: Vec<f64>,
    pub mean_dpp: Vec<f64>,
    pub var_iid: f64,
    pub var_dpp: f64,
    pub matches_closed_form: bool,
}

fn gap_identity(spec: &DownsampledEstimatorSpec, k: &DMatrix<f64>) -> f64 {
    let n = spec.len();
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                total += k[(i, j)].powi(2) * spec.inner(i, j) / (spec.weights[i] * spec.weights[j]);
            }
        }
    }
    total / (n * n) as f64
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

/// Builds the variance-reducing kernel for `spec` and checks it from every
/// side: closed form, enumeration (N ≤ 10) and `trials` sampled draws under
/// each inclusion law.
pub fn verify_variance_reduction(
    spec: &DownsampledEstimatorSpec,
    trials: usize,
    seed: u64,
) -> Result<VarianceReductionReport> {
    if trials < 2 {
        return Err(Error::InvalidConfig("need at least 2 trials".into()));
    }
    let constructed = construct_variance_reducing_kernel(spec, None)?;
    let k = &constructed.kernel;
    let var_iid = exact_variance_from_pairwise(spec, &independent_pairwise(&spec.probabilities))?;
    let var_dpp = exact_variance_from_pairwise(spec, &dpp_pairwise(k))?;
    let gap = gap_identity(spec, k.matrix());
    let mean_exact = spec.expected_estimate();

    let enumerated = if spec.len() <= ENUMERATION_LIMIT {
        let (mean_i, var_i) = enumerate_moments_independent(spec)?;
        let (mean_d, var_d) = enumerate_moments(spec, k)?;
        let matches = close(var_i, var_iid, 1e-10)
            && close(var_d, var_dpp, 1e-10)
            && (0..spec.dim())
                .all(|c| close(mean_i[c], mean_exact[c], 1e-10) && close(mean_d[c], mean_exact[c], 1e-10));
        Some(EnumeratedMoments {
            mean_iid: mean_i.iter().copied().collect(),
            mean_dpp: mean_d.iter().copied().collect(),
            var_iid: var_i,
            var_dpp: var_d,
            matches_closed_form: matches,
        })
    } else {
        None
    };

    let l = k.to_l_ensemble()?;
    let mut rng_dpp = substream(seed, 0);
    let mut rng_iid = substream(seed, 1);
    let dpp_samples: Vec<DVector<f64>> = (0..trials)
        .map(|_| spec.estimate(&sample_dpp_l(&l, &mut rng_dpp)))
        .collect();
    let iid_samples: Vec<DVector<f64>> = (0..trials)
        .map(|_| spec.estimate(&sample_independent(&spec.probabilities, &mut rng_iid)))
        .collect();
    let dpp_m = empirical_moments(&dpp_samples);
    let iid_m = empirical_moments(&iid_samples);

    let means_agree = (0..spec.dim()).all(|c| {
        let se = (dpp_m.mean_stderr[c].powi(2) + iid_m.mean_stderr[c].powi(2)).sqrt();
        (dpp_m.mean[c] - iid_m.mean[c]).abs() <= 3.0 * se
    });
    let empirical_variance_agrees = (dpp_m.variance - var_dpp).abs() <= 3.0 * dpp_m.variance_stderr;
    let strict_reduction = var_dpp < var_iid;
    let gap_identity_holds = (var_iid - var_dpp - gap).abs() <= 1e-10 * var_iid.abs().max(1.0);
    let passed = strict_reduction
        && gap_identity_holds
        && means_agree
        && empirical_variance_agrees
        && enumerated.as_ref().is_none_or(|e| e.matches_closed_form);

    Ok(VarianceReductionReport {
        epsilon: constructed.epsilon,
        var_iid,
        var_dpp_closed_form: var_dpp,
        variance_gap_identity: gap,
        var_dpp_empirical: dpp_m.variance,
        var_dpp_empirical_stderr: dpp_m.variance_stderr,
        mean_iid: iid_m.mean,
        mean_dpp: dpp_m.mean,
        mean_exact: mean_exact.iter().copied().collect(),
        enumerated,
        strict_reduction,
        gap_identity_holds,
        means_agree,
        empirical_variance_agrees,
        passed,
    })
}

/// ES gradient terms a_i = (1/σ) f(θ + σ g_i) g_i for `n` Gaussian directions.
pub fn es_gradient_terms<R: Rng + ?Sized>(
    f: Benchmark,
    theta: &DVector<f64>,
    sigma: f64,
    n: usize,
    rng: &mut R,
) -> Vec<DVector<f64>> {
    let d = theta.len();
    (0..n)
        .map(|_| {
            let g = DVector::from_iterator(d, (0..d).map(|_| StandardNormal.sample(rng)));
            let value = f.value((theta + &g * sigma).as_slice());
            g * (value / sigma)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EsVarianceReport {
    pub function: Benchmark,
    pub dim: usize,
    pub n: usize,
    pub full_average: Vec<f64>,
    pub reduction: VarianceReductionReport,
    pub mean_matches_full_average: bool,
    pub passed: bool,
}

/// The variance-reduction check applied to ES gradient terms.
#[allow(clippy::too_many_arguments)]
pub fn verify_es_variance_reduction(
    d: usize,
    n: usize,
    f: Benchmark,
    theta: &DVector<f64>,
    sigma: f64,
    p: f64,
    trials: usize,
    seed: u64,
) -> Result<EsVarianceReport> {
    if theta.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: theta.len(),
        });
    }
    if n < d + 2 {
        return Err(Error::InvalidConfig(format!("need N >= d + 2 = {}, got {n}", d + 2)));
    }
    let terms = es_gradient_terms(f, theta, sigma, n, &mut substream(seed, 100));
    let spec = DownsampledEstimatorSpec::unbiased(terms, vec![p; n])?;
    let reduction = verify_variance_reduction(&spec, trials, seed)?;
    let full = spec.full_average();
    let mean_matches_full_average = (0..d).all(|c| close(reduction.mean_exact[c], full[c], 1e-12));
    let passed = reduction.passed && mean_matches_full_average;
    Ok(EsVarianceReport {
        function: f,
        dim: d,
        n,
        full_average: full.iter().copied().collect(),
        reduction,
        mean_matches_full_average,
        passed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasedReport {
    pub epsilon: f64,
    pub bias_iid: Vec<f64>,
    pub bias_dpp: Vec<f64>,
    pub var_iid: f64,
    pub var_dpp: f64,
    pub mse_iid: f64,
    pub mse_dpp: f64,
    pub biases_identical: bool,
    pub mse_gap_equals_variance_gap: bool,
    pub strict_mse_reduction: bool,
    pub passed: bool,
}

/// MSE comparison for weights w ≠ p: both laws share the bias
/// (1/N) Σ (p_i/w_i − 1) a_i, so the MSE gap is exactly the variance gap.
pub fn verify_biased_estimator(spec: &DownsampledEstimatorSpec) -> Result<BiasedReport> {
    let constructed = construct_variance_reducing_kernel(spec, None)?;
    let k = &constructed.kernel;
    let full = spec.full_average();
    let var_iid = exact_variance_from_pairwise(spec, &independent_pairwise(&spec.probabilities))?;
    let var_dpp = exact_variance_from_pairwise(spec, &dpp_pairwise(k))?;

    let (bias_iid, bias_dpp) = if spec.len() <= ENUMERATION_LIMIT {
        let (mi, _) = enumerate_moments_independent(spec)?;
        let (md, _) = enumerate_moments(spec, k)?;
        (mi - &full, md - &full)
    } else {
        (spec.bias(), spec.bias())
    };
    let biases_identical = (0..spec.dim()).all(|c| close(bias_iid[c], bias_dpp[c], 1e-10));
    let mse_iid = var_iid + bias_iid.norm_squared();
    let mse_dpp = var_dpp + bias_dpp.norm_squared();
    let mse_gap_equals_variance_gap =
        ((mse_iid - mse_dpp) - (var_iid - var_dpp)).abs() <= 1e-10 * mse_iid.abs().max(1.0);
    let strict_mse_reduction = mse_dpp < mse_iid;
    Ok(BiasedReport {
        epsilon: constructed.epsilon,
        bias_iid: bias_iid.iter().copied().collect(),
        bias_dpp: bias_dpp.iter().copied().collect(),
        var_iid,
        var_dpp,
        mse_iid,
        mse_dpp,
        biases_identical,
        mse_gap_equals_variance_gap,
        strict_mse_reduction,
        passed: biases_identical && mse_gap_equals_variance_gap && strict_mse_reduction,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NegativeCorrelationReport {
    pub dim: usize,
    /// Largest pairwise dot product among the d + 1 simplex vertices.
    pub simplex_max_dot: f64,
    pub simplex_all_negative: bool,
    pub trials: usize,
    /// Random configurations of d + 2 unit vectors with all dot products < 0.
    pub violations: usize,
    pub passed: bool,
}

/// d + 1 unit vectors in R^d with pairwise dot products −1/d.
pub fn regular_simplex(d: usize) -> Vec<DVector<f64>> {
    if d == 1 {
        return vec![DVector::from_element(1, 1.0), DVector::from_element(1, -1.0)];
    }
    let n = d + 1;
    let centred: Vec<DVector<f64>> = (0..n)
        .map(|i| DVector::from_fn(n, |r, _| if r == i { 1.0 } else { 0.0 } - 1.0 / n as f64))
        .collect();
    let basis = orthonormalize_columns(DMatrix::from_columns(&centred), 1e-7);
    centred.iter().map(|v| (basis.transpose() * v).normalize()).collect()
}

/// At most d + 1 vectors in R^d can be pairwise negatively correlated:
/// the simplex attains d + 1, and random search over d + 2 unit vectors
/// should never find a pairwise-negative configuration. The random search is
/// supporting evidence only.
pub fn verify_negative_correlation_bound(d: usize, trials: usize, seed: u64) -> Result<NegativeCorrelationReport> {
    if d == 0 {
        return Err(Error::InvalidConfig("dimension must be positive".into()));
    }
    let simplex = regular_simplex(d);
    let mut simplex_max_dot = f64::NEG_INFINITY;
    for i in 0..simplex.len() {
        for j in 0..i {
            simplex_max_dot = simplex_max_dot.max(simplex[i].dot(&simplex[j]));
        }
    }
    let simplex_all_negative = simplex_max_dot < 0.0;

    let mut rng = substream(seed, 0);
    let mut violations = 0;
    for _ in 0..trials {
        let vs: Vec<DVector<f64>> = (0..d + 2)
            .map(|_| {
                DVector::from_iterator(
                    d,
                    (0..d).map(|_| Distribution::<f64>::sample(&StandardNormal, &mut rng)),
                )
                .normalize()
            })
            .collect();
        let all_negative = (0..vs.len()).all(|i| (0..i).all(|j| vs[i].dot(&vs[j]) < 0.0));
        if all_negative {
            violations += 1;
        }
    }
    Ok(NegativeCorrelationReport {
        dim: d,
        simplex_max_dot,
        simplex_all_negative,
        trials,
        violations,
        passed: simplex_all_negative && violations == 0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrthogonalityReport {
    pub k: usize,
    pub max_det: f64,
    pub maximizers: Vec<Vec<usize>>,
    pub orthogonal_subsets: Vec<Vec<usize>>,
    /// det(L_A)^{1/k} ≤ tr(L_A)/k = 1 for every enumerated A.
    pub am_gm_bound_holds: bool,
    pub passed: bool,
}

pub const ORTHOGONALITY_TOL: f64 = 1e-9;

/// For unit-norm features, the most likely k-DPP outcomes under the Gram
/// L-ensemble are exactly the pairwise-orthogonal k-subsets, with det 1.
pub fn verify_orthogonality_argmax(features: &[DVector<f64>], k: usize) -> Result<OrthogonalityReport> {
    let n = features.len();
    if n > K_DPP_ENUMERATION_CAP {
        return Err(Error::CapExceeded {
            n,
            cap: K_DPP_ENUMERATION_CAP,
        });
    }
    if k == 0 || k > n {
        return Err(Error::InvalidConfig(format!("k must be in 1..={n}, got {k}")));
    }
    if features.iter().any(|f| (f.norm() - 1.0).abs() > ORTHOGONALITY_TOL) {
        return Err(Error::InvalidConfig("features must have unit norm".into()));
    }
    let gram = DMatrix::from_fn(n, n, |i, j| features[i].dot(&features[j]));
    let subsets = combinations(n, k);
    let dets: Vec<f64> = subsets.iter().map(|s| principal_minor(&gram, s)).collect();
    let orthogonal_subsets: Vec<Vec<usize>> = subsets
        .iter()
        .filter(|s| {
            s.iter()
                .enumerate()
                .all(|(a, &i)| s[..a].iter().all(|&j| gram[(i, j)].abs() <= ORTHOGONALITY_TOL))
        })
        .cloned()
        .collect();
    if orthogonal_subsets.is_empty() {
        return Err(Error::InvalidConfig("no pairwise-orthogonal subset of size k".into()));
    }
    let max_det = dets.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let maximizers: Vec<Vec<usize>> = subsets
        .iter()
        .zip(&dets)
        .filter(|(_, &d)| d >= max_det - ORTHOGONALITY_TOL)
        .map(|(s, _)| s.clone())
        .collect();
    let am_gm_bound_holds = dets
        .iter()
        .all(|&d| d.max(0.0).powf(1.0 / k as f64) <= 1.0 + ORTHOGONALITY_TOL);
    let passed = am_gm_bound_holds && (max_det - 1.0).abs() <= ORTHOGONALITY_TOL && maximizers == orthogonal_subsets;
    Ok(OrthogonalityReport {
        k,
        max_det,
        maximizers,
        orthogonal_subsets,
        am_gm_bound_holds,
        passed,
    })
}

/// `n` unit vectors in R^d whose first `k` are orthonormal and the rest
/// random, shuffled.
pub fn planted_orthogonal_features<R: Rng + ?Sized>(n: usize, d: usize, k: usize, rng: &mut R) -> Vec<DVector<f64>> {
    use rand::seq::SliceRandom;
    let random =
        |rng: &mut R| DVector::from_iterator(d, (0..d).map(|_| Distribution::<f64>::sample(&StandardNormal, rng)));
    let raw: Vec<DVector<f64>> = (0..k).map(|_| random(rng)).collect();
    let planted = orthonormalize_columns(DMatrix::from_columns(&raw), 1e-7);
    let mut features: Vec<DVector<f64>> = planted.column_iter().map(|c| c.into_owned()).collect();
    while features.len() < n {
        features.push(random(rng).normalize());
    }
    features.shuffle(rng);
    features
}
