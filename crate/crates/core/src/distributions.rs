//! Sampling distributions: diagonal Gaussian mixtures, isotropic Gaussians and
//! a Halton-based quasi Monte Carlo path.

use std::f64::consts::PI;
use std::sync::OnceLock;

use nalgebra::DVector;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

const WEIGHT_SUM_TOL: f64 = 1e-12;

/// Number of primes available as Halton bases.
pub const HALTON_PRIME_COUNT: usize = 200;

/// Where a pooled vector came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    Fresh,
    Reused,
    Renormalized,
}

/// An ordered collection of equal-dimension vectors with provenance tags.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePool {
    dim: usize,
    vectors: Vec<DVector<f64>>,
    tags: Vec<Provenance>,
}

impl SamplePool {
    pub fn new(dim: usize, vectors: Vec<DVector<f64>>, tags: Vec<Provenance>) -> Result<Self> {
        if vectors.len() != tags.len() {
            return Err(Error::DimensionMismatch {
                expected: vectors.len(),
                got: tags.len(),
            });
        }
        if let Some(v) = vectors.iter().find(|v| v.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: v.len(),
            });
        }
        Ok(Self { dim, vectors, tags })
    }

    /// Pool where every vector is tagged `tag`.
    pub fn uniform(dim: usize, vectors: Vec<DVector<f64>>, tag: Provenance) -> Result<Self> {
        let tags = vec![tag; vectors.len()];
        Self::new(dim, vectors, tags)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn vectors(&self) -> &[DVector<f64>] {
        &self.vectors
    }

    pub fn tags(&self) -> &[Provenance] {
        &self.tags
    }

    pub fn get(&self, i: usize) -> &DVector<f64> {
        &self.vectors[i]
    }

    pub fn into_vectors(self) -> Vec<DVector<f64>> {
        self.vectors
    }

    /// Sub-pool made of the given indices, in the given order.
    pub fn select(&self, indices: &[usize]) -> SamplePool {
        SamplePool {
            dim: self.dim,
            vectors: indices.iter().map(|&i| self.vectors[i].clone()).collect(),
            tags: indices.iter().map(|&i| self.tags[i]).collect(),
        }
    }

    /// Every vector rescaled to the pool's mean Euclidean norm. Zero vectors
    /// stay zero.
    pub fn renormalized(&self) -> SamplePool {
        let n = self.vectors.len().max(1) as f64;
        let mean_norm = self.vectors.iter().map(|v| v.norm()).sum::<f64>() / n;
        let vectors = self
            .vectors
            .iter()
            .map(|v| {
                let norm = v.norm();
                if norm > 0.0 {
                    v * (mean_norm / norm)
                } else {
                    v.clone()
                }
            })
            .collect();
        SamplePool {
            dim: self.dim,
            vectors,
            tags: vec![Provenance::Renormalized; self.vectors.len()],
        }
    }
}

/// One component of a diagonal Gaussian mixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub weight: f64,
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
}

/// A Gaussian mixture in R^d with diagonal component covariances.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GaussianMixture {
    dim: usize,
    components: Vec<MixtureComponent>,
}

impl GaussianMixture {
    pub fn new(components: Vec<MixtureComponent>) -> Result<Self> {
        let first = components
            .first()
            .ok_or_else(|| Error::InvalidMixture("no components".into()))?;
        let dim = first.mean.len();
        if dim == 0 {
            return Err(Error::InvalidMixture("zero dimension".into()));
        }
        let mut total = 0.0;
        for (q, c) in components.iter().enumerate() {
            if !(c.weight > 0.0) || !c.weight.is_finite() {
                return Err(Error::InvalidMixture(format!(
                    "component {q} has non-positive weight {}",
                    c.weight
                )));
            }
            if c.mean.len() != dim || c.variance.len() != dim {
                return Err(Error::InvalidMixture(format!(
                    "component {q} has inconsistent dimension"
                )));
            }
            if c.variance.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
                return Err(Error::InvalidMixture(format!(
                    "component {q} has a non-positive variance"
                )));
            }
            if c.mean.iter().any(|m| !m.is_finite()) {
                return Err(Error::InvalidMixture(format!("component {q} has a non-finite mean")));
            }
            total += c.weight;
        }
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidMixture(format!("weights sum to {total}, expected 1")));
        }
        Ok(Self { dim, components })
    }

    /// Standard normal N(0, I_d) as a one-component mixture.
    pub fn standard(dim: usize) -> Result<Self> {
        Self::new(vec![MixtureComponent {
            weight: 1.0,
            mean: vec![0.0; dim],
            variance: vec![1.0; dim],
        }])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn components(&self) -> &[MixtureComponent] {
        &self.components
    }

    /// Largest per-coordinate standard deviation over all components.
    pub fn max_std(&self) -> f64 {
        self.components
            .iter()
            .flat_map(|c| c.variance.iter())
            .fold(0.0_f64, |acc, &v| acc.max(v.sqrt()))
    }

    /// Component index whose cumulative weight first exceeds `u`.
    fn component_for(&self, u: f64) -> usize {
        let mut acc = 0.0;
        for (q, c) in self.components.iter().enumerate() {
            acc += c.weight;
            if u < acc {
                return q;
            }
        }
        self.components.len() - 1
    }

    fn draw_from<R: Rng + ?Sized>(&self, q: usize, rng: &mut R) -> DVector<f64> {
        let c = &self.components[q];
        DVector::from_iterator(
            self.dim,
            (0..self.dim).map(|i| {
                let z: f64 = StandardNormal.sample(rng);
                c.mean[i] + c.variance[i].sqrt() * z
            }),
        )
    }
}

impl<'de> Deserialize<'de> for GaussianMixture {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Raw {
            components: Vec<MixtureComponent>,
        }
        let raw = Raw::deserialize(deserializer)?;
        GaussianMixture::new(raw.components).map_err(serde::de::Error::custom)
    }
}

/// Anything that can produce i.i.d. pools of d-dimensional vectors.
pub trait PoolSampler {
    fn dim(&self) -> usize;
    fn sample_pool(&self, n: usize, rng: &mut dyn rand::RngCore) -> SamplePool;
}

impl PoolSampler for GaussianMixture {
    fn dim(&self) -> usize {
        self.dim
    }

    fn sample_pool(&self, n: usize, rng: &mut dyn rand::RngCore) -> SamplePool {
        sample_gaussian_mixture(self, n, rng)
    }
}

/// N(0, I_d).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IsotropicGaussian {
    pub dim: usize,
}

impl PoolSampler for IsotropicGaussian {
    fn dim(&self) -> usize {
        self.dim
    }

    fn sample_pool(&self, n: usize, rng: &mut dyn rand::RngCore) -> SamplePool {
        sample_isotropic_gaussian(self.dim, n, rng)
    }
}

pub fn sample_gaussian_mixture<R: Rng + ?Sized>(gm: &GaussianMixture, n: usize, rng: &mut R) -> SamplePool {
    let vectors = (0..n)
        .map(|_| {
            let q = if gm.components.len() == 1 {
                0
            } else {
                gm.component_for(rng.random::<f64>())
            };
            gm.draw_from(q, rng)
        })
        .collect();
    SamplePool {
        dim: gm.dim,
        tags: vec![Provenance::Fresh; n],
        vectors,
    }
}

pub fn sample_isotropic_gaussian<R: Rng + ?Sized>(dim: usize, n: usize, rng: &mut R) -> SamplePool {
    let vectors = (0..n)
        .map(|_| DVector::from_iterator(dim, (0..dim).map(|_| StandardNormal.sample(rng))))
        .collect();
    SamplePool {
        dim,
        tags: vec![Provenance::Fresh; n],
        vectors,
    }
}

/// Deterministic low-discrepancy point set mapped onto the mixture.
///
/// Point `j` uses Halton index `max(offset, 1) + j`. The d normal coordinates
/// use the first d prime bases and the component selector uses prime d + 1,
/// so a single-component mixture sees exactly the leading Halton coordinates.
pub fn qmc_gaussian_mixture(gm: &GaussianMixture, n: usize, sequence_offset: u64) -> Result<SamplePool> {
    let primes = primes();
    let needed = gm.dim + 1;
    if needed > primes.len() {
        return Err(Error::PrimeTableExhausted {
            dim: gm.dim,
            needed,
            available: primes.len(),
        });
    }
    let start = sequence_offset.max(1);
    let vectors = (0..n as u64)
        .map(|j| {
            let index = start + j;
            let q = gm.component_for(radical_inverse(index, primes[gm.dim]));
            let c = &gm.components[q];
            DVector::from_iterator(
                gm.dim,
                (0..gm.dim).map(|i| {
                    let u = radical_inverse(index, primes[i]);
                    c.mean[i] + c.variance[i].sqrt() * inverse_normal_cdf(u)
                }),
            )
        })
        .collect();
    Ok(SamplePool {
        dim: gm.dim,
        tags: vec![Provenance::Fresh; n],
        vectors,
    })
}

pub fn gaussian_mixture_density(gm: &GaussianMixture, x: &[f64]) -> Result<f64> {
    if x.len() != gm.dim {
        return Err(Error::DimensionMismatch {
            expected: gm.dim,
            got: x.len(),
        });
    }
    let density = gm
        .components
        .iter()
        .map(|c| {
            let log_pdf: f64 = x
                .iter()
                .zip(&c.mean)
                .zip(&c.variance)
                .map(|((&xi, &mu), &var)| -0.5 * (xi - mu).powi(2) / var - 0.5 * (2.0 * PI * var).ln())
                .sum();
            c.weight * log_pdf.exp()
        })
        .sum();
    Ok(density)
}

/// Van der Corput radical inverse of `index` in `base`.
pub fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let inv_base = 1.0 / base as f64;
    let mut scale = inv_base;
    let mut value = 0.0;
    while index > 0 {
        value += (index % base) as f64 * scale;
        index /= base;
        scale *= inv_base;
    }
    value
}

/// Halton point `index` using the first `dim` prime bases.
pub fn halton_point(index: u64, dim: usize) -> Result<Vec<f64>> {
    let primes = primes();
    if dim > primes.len() {
        return Err(Error::PrimeTableExhausted {
            dim,
            needed: dim,
            available: primes.len(),
        });
    }
    Ok(primes[..dim].iter().map(|&p| radical_inverse(index, p)).collect())
}

/// The first [`HALTON_PRIME_COUNT`] primes.
pub fn primes() -> &'static [u64] {
    static PRIMES: OnceLock<Vec<u64>> = OnceLock::new();
    PRIMES.get_or_init(|| {
        let mut found: Vec<u64> = Vec::with_capacity(HALTON_PRIME_COUNT);
        let mut candidate = 2u64;
        while found.len() < HALTON_PRIME_COUNT {
            if found
                .iter()
                .take_while(|&&p| p * p <= candidate)
                .all(|&p| !candidate.is_multiple_of(p))
            {
                found.push(candidate);
            }
            candidate += 1;
        }
        found
    })
}

// Acklam's rational approximation of the inverse standard normal CDF.
const ACKLAM_A: [f64; 6] = [
    -3.969_683_028_665_376e1,
    2.209_460_984_245_205e2,
    -2.759_285_104_469_687e2,
    1.383_577_518_672_69e2,
    -3.066_479_806_614_716e1,
    2.506_628_277_459_239,
];
const ACKLAM_B: [f64; 5] = [
    -5.447_609_879_822_406e1,
    1.615_858_368_580_409e2,
    -1.556_989_798_598_866e2,
    6.680_131_188_771_972e1,
    -1.328_068_155_288_572e1,
];
const ACKLAM_C: [f64; 6] = [
    -7.784_894_002_430_293e-3,
    -3.223_964_580_411_365e-1,
    -2.400_758_277_161_838,
    -2.549_732_539_343_734,
    4.374_664_141_464_968,
    2.938_163_982_698_783,
];
const ACKLAM_D: [f64; 4] = [
    7.784_695_709_041_462e-3,
    3.224_671_290_700_398e-1,
    2.445_134_137_142_996,
    3.754_408_661_907_416,
];
const ACKLAM_P_LOW: f64 = 0.024_25;

/// Inverse of the standard normal CDF on (0, 1). Returns ±inf at the ends.
pub fn inverse_normal_cdf(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let (a, b, c, d) = (ACKLAM_A, ACKLAM_B, ACKLAM_C, ACKLAM_D);
    if p < ACKLAM_P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5])
            / ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0)
    } else if p <= 1.0 - ACKLAM_P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q
            / (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0)
    } else {
        -inverse_normal_cdf(1.0 - p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use statrs::distribution::{ContinuousCDF, Normal};

    fn one_d(mean: f64, var: f64) -> GaussianMixture {
        GaussianMixture::new(vec![MixtureComponent {
            weight: 1.0,
            mean: vec![mean],
            variance: vec![var],
        }])
        .unwrap()
    }

    fn mixture_1d(parts: &[(f64, f64, f64)]) -> GaussianMixture {
        GaussianMixture::new(
            parts
                .iter()
                .map(|&(w, m, v)| MixtureComponent {
                    weight: w,
                    mean: vec![m],
                    variance: vec![v],
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn rejects_invalid_mixtures() {
        let zero_weight = GaussianMixture::new(vec![
            MixtureComponent {
                weight: 1.0,
                mean: vec![0.0],
                variance: vec![1.0],
            },
            MixtureComponent {
                weight: 0.0,
                mean: vec![0.0],
                variance: vec![1.0],
            },
        ]);
        assert!(matches!(zero_weight, Err(Error::InvalidMixture(_))));
        let bad_var = GaussianMixture::new(vec![MixtureComponent {
            weight: 1.0,
            mean: vec![0.0, 0.0],
            variance: vec![1.0, 0.0],
        }]);
        assert!(bad_var.is_err());
        let bad_sum = GaussianMixture::new(vec![MixtureComponent {
            weight: 0.9,
            mean: vec![0.0],
            variance: vec![1.0],
        }]);
        assert!(bad_sum.is_err());
        let ragged = GaussianMixture::new(vec![MixtureComponent {
            weight: 1.0,
            mean: vec![0.0, 1.0],
            variance: vec![1.0],
        }]);
        assert!(ragged.is_err());
    }

    #[test]
    fn mixture_sample_moments() {
        let gm = GaussianMixture::standard(2).unwrap();
        let pool = sample_gaussian_mixture(&gm, 100_000, &mut seeded(1));
        assert_eq!(pool.len(), 100_000);
        for i in 0..2 {
            let xs: Vec<f64> = pool.vectors().iter().map(|v| v[i]).collect();
            let mean = xs.iter().sum::<f64>() / xs.len() as f64;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / xs.len() as f64;
            assert!(mean.abs() < 0.02, "mean {mean}");
            assert!((var - 1.0).abs() < 0.05, "var {var}");
        }
        assert!(pool.tags().iter().all(|&t| t == Provenance::Fresh));
    }

    #[test]
    fn degenerate_weight_draws_first_component() {
        let gm = mixture_1d(&[(0.999_999, 100.0, 1.0), (1e-6, -100.0, 1.0)]);
        let pool = sample_gaussian_mixture(&gm, 10_000, &mut seeded(2));
        let near_first = pool.vectors().iter().filter(|v| v[0] > 50.0).count();
        assert!(near_first >= 9_990);
    }

    #[test]
    fn single_draw_has_right_shape() {
        let gm = GaussianMixture::standard(5).unwrap();
        let pool = sample_gaussian_mixture(&gm, 1, &mut seeded(3));
        assert_eq!(pool.len(), 1);
        assert_eq!(pool.get(0).len(), 5);
        let iso = sample_isotropic_gaussian(1, 1, &mut seeded(3));
        assert_eq!(iso.len(), 1);
        assert_eq!(iso.dim(), 1);
    }

    #[test]
    fn isotropic_covariance_is_identity() {
        let pool = sample_isotropic_gaussian(3, 100_000, &mut seeded(4));
        let n = pool.len() as f64;
        let mean: DVector<f64> = pool.vectors().iter().sum::<DVector<f64>>() / n;
        for a in 0..3 {
            for b in 0..3 {
                let cov = pool
                    .vectors()
                    .iter()
                    .map(|v| (v[a] - mean[a]) * (v[b] - mean[b]))
                    .sum::<f64>()
                    / n;
                let target = if a == b { 1.0 } else { 0.0 };
                assert!((cov - target).abs() < 0.05, "cov[{a},{b}] = {cov}");
            }
        }
    }

    #[test]
    fn high_dimensional_draws_are_nearly_orthogonal() {
        let mut ok = 0;
        for seed in 0..100 {
            let pool = sample_isotropic_gaussian(200, 50, &mut seeded(seed));
            let units: Vec<_> = pool.vectors().iter().map(|v| v.normalize()).collect();
            let mut max_cos = 0.0_f64;
            for i in 0..units.len() {
                for j in 0..i {
                    max_cos = max_cos.max(units[i].dot(&units[j]).abs());
                }
            }
            if max_cos < 0.35 {
                ok += 1;
            }
        }
        assert!(ok >= 99, "{ok} of 100 seeds below 0.35");
    }

    #[test]
    fn equal_seeds_give_identical_pools() {
        let gm = mixture_1d(&[(0.3, -1.0, 0.5), (0.7, 2.0, 0.1)]);
        let a = sample_gaussian_mixture(&gm, 50, &mut seeded(9));
        let b = sample_gaussian_mixture(&gm, 50, &mut seeded(9));
        assert_eq!(a, b);
    }

    #[test]
    fn inverse_cdf_matches_reference() {
        let normal = Normal::standard();
        for i in 1..2000 {
            let p = i as f64 / 2000.0;
            let reference = normal.inverse_cdf(p);
            assert!(
                (inverse_normal_cdf(p) - reference).abs() <= 1.2e-9 * reference.abs().max(1.0),
                "p = {p}"
            );
        }
        for &p in &[1e-10, 1e-6, 1e-3, 0.02, 0.98, 0.999, 1.0 - 1e-6] {
            let reference = normal.inverse_cdf(p);
            assert!((inverse_normal_cdf(p) - reference).abs() <= 1.2e-9 * reference.abs().max(1.0));
        }
    }

    #[test]
    fn qmc_golden_values() {
        let gm = one_d(0.0, 1.0);
        let pool = qmc_gaussian_mixture(&gm, 4, 1).unwrap();
        let expected = [0.0, -0.674_49, 0.674_49, -1.150_35];
        for (v, e) in pool.vectors().iter().zip(expected) {
            assert!((v[0] - e).abs() < 1e-3, "{} vs {e}", v[0]);
        }
        let again = qmc_gaussian_mixture(&gm, 4, 1).unwrap();
        assert_eq!(pool, again);
    }

    #[test]
    fn qmc_rejects_dimension_beyond_prime_table() {
        let gm = GaussianMixture::standard(HALTON_PRIME_COUNT).unwrap();
        assert!(matches!(
            qmc_gaussian_mixture(&gm, 1, 1),
            Err(Error::PrimeTableExhausted { .. })
        ));
        let ok = GaussianMixture::standard(HALTON_PRIME_COUNT - 1).unwrap();
        assert!(qmc_gaussian_mixture(&ok, 1, 1).is_ok());
    }

    #[test]
    fn qmc_symmetric_mixture_mean_beats_iid() {
        let gm = mixture_1d(&[(0.5, -1.5, 0.3), (0.5, 1.5, 0.3)]);
        let n = 256;
        let qmc = qmc_gaussian_mixture(&gm, n, 1).unwrap();
        let qmc_mean = qmc.vectors().iter().map(|v| v[0]).sum::<f64>() / n as f64;
        assert!(qmc_mean.abs() < 10.0 / n as f64, "qmc mean {qmc_mean}");
        let iid_abs: f64 = (0..100)
            .map(|s| {
                let p = sample_gaussian_mixture(&gm, n, &mut seeded(s));
                (p.vectors().iter().map(|v| v[0]).sum::<f64>() / n as f64).abs()
            })
            .sum::<f64>()
            / 100.0;
        assert!(qmc_mean.abs() < iid_abs, "{qmc_mean} vs iid {iid_abs}");
    }

    #[test]
    fn density_at_mode() {
        let gm = one_d(0.0, 1.0);
        let p = gaussian_mixture_density(&gm, &[0.0]).unwrap();
        assert!((p - 1.0 / (2.0 * PI).sqrt()).abs() < 1e-15);
        assert!(gaussian_mixture_density(&gm, &[0.0, 1.0]).is_err());
    }

    #[test]
    fn density_integrates_to_one() {
        let mixtures = [
            one_d(0.0, 1.0),
            mixture_1d(&[(0.2, -3.0, 0.25), (0.5, 0.5, 2.0), (0.3, 4.0, 0.04)]),
            mixture_1d(&[(0.5, -1.0, 0.01), (0.5, 1.0, 0.01)]),
        ];
        for gm in &mixtures {
            let s = gm.max_std();
            let lo = gm.components().iter().map(|c| c.mean[0]).fold(f64::MAX, f64::min) - 20.0 * s;
            let hi = gm.components().iter().map(|c| c.mean[0]).fold(f64::MIN, f64::max) + 20.0 * s;
            let n = 200_000;
            let h = (hi - lo) / n as f64;
            let mut total = 0.0;
            for i in 0..=n {
                let x = lo + i as f64 * h;
                let w = if i == 0 || i == n { 0.5 } else { 1.0 };
                total += w * gaussian_mixture_density(gm, &[x]).unwrap();
            }
            total *= h;
            assert!((total - 1.0).abs() < 1e-4, "integral {total}");
        }
    }

    #[test]
    fn density_tail_is_negligible() {
        let gm = one_d(0.0, 1.0);
        let mut prev = f64::MAX;
        for k in 10..40 {
            let p = gaussian_mixture_density(&gm, &[k as f64]).unwrap();
            assert!(p < 1e-12);
            assert!(p <= prev);
            prev = p;
        }
    }

    /// Max over anchored boxes [0, a) x [0, b) of |count/n - ab|, with box
    /// corners on the grid of point coordinates.
    fn star_discrepancy_2d(points: &[Vec<f64>]) -> f64 {
        let n = points.len() as f64;
        let mut xs: Vec<f64> = points.iter().map(|p| p[0]).collect();
        let mut ys: Vec<f64> = points.iter().map(|p| p[1]).collect();
        xs.push(1.0);
        ys.push(1.0);
        let mut worst = 0.0_f64;
        for &a in &xs {
            for &b in &ys {
                let open = points.iter().filter(|p| p[0] < a && p[1] < b).count() as f64;
                let closed = points.iter().filter(|p| p[0] <= a && p[1] <= b).count() as f64;
                worst = worst.max((open / n - a * b).abs()).max((closed / n - a * b).abs());
            }
        }
        worst
    }

    #[test]
    fn halton_discrepancy_decreases() {
        let disc: Vec<f64> = [16, 64, 256]
            .iter()
            .map(|&n| {
                let pts: Vec<Vec<f64>> = (1..=n as u64).map(|i| halton_point(i, 2).unwrap()).collect();
                star_discrepancy_2d(&pts)
            })
            .collect();
        assert!(disc[0] > disc[1] && disc[1] > disc[2], "{disc:?}");
    }

    #[test]
    fn renormalized_view_has_equal_lengths() {
        let pool = sample_isotropic_gaussian(4, 20, &mut seeded(5));
        let mean_norm = pool.vectors().iter().map(|v| v.norm()).sum::<f64>() / 20.0;
        let view = pool.renormalized();
        for v in view.vectors() {
            assert!((v.norm() - mean_norm).abs() < 1e-12);
        }
        assert!(view.tags().iter().all(|&t| t == Provenance::Renormalized));
    }

    #[test]
    fn first_primes() {
        assert_eq!(&primes()[..6], &[2, 3, 5, 7, 11, 13]);
        assert_eq!(primes().len(), 200);
        assert_eq!(primes()[199], 1223);
    }
}
