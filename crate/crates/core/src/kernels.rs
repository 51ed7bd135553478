//! Gaussian mixture kernels and their random-feature estimators.
//!
//! A Gaussian mixture kernel is the stationary kernel whose spectral density
//! is a diagonal Gaussian mixture with weights w_q, means μ_q and variances
//! v_q:
//!
//! K(x, y) = Σ_q w_q Π_i exp(−2π² τ_i² v_qi) cos(2π τ_i μ_qi),  τ = x − y.
//!
//! Frequencies are stored in the same units as the mixture parameters, so the
//! random-feature estimator is (1/m) Σ_v cos(2π vᵀτ) for v drawn from the
//! mixture.

use std::f64::consts::PI;
use std::io::{BufRead, Write};
use std::path::Path;

use nalgebra::DVector;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::{
    qmc_gaussian_mixture, sample_gaussian_mixture, GaussianMixture, MixtureComponent, SamplePool,
};
use crate::dppmc::{dppmc_draw, DppmcConfig};
use crate::rng::substream;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianMixtureKernel {
    /// Kernel parameters (μ^q, v^q, w^q).
    pub gm: GaussianMixture,
    /// Frequency distribution whose cosine features average to the kernel:
    /// every component split into its 2^d per-coordinate sign patterns of
    /// the mean, each with weight w^q / 2^d.
    pub spectral: GaussianMixture,
}

/// Largest dimension for which the sign-pattern expansion is built.
pub const MAX_SPECTRAL_DIM: usize = 12;

impl GaussianMixtureKernel {
    pub fn new(gm: GaussianMixture) -> Result<Self> {
        let d = gm.dim();
        if d > MAX_SPECTRAL_DIM {
            return Err(Error::InvalidMixture(format!(
                "kernel dimension {d} exceeds {MAX_SPECTRAL_DIM}"
            )));
        }
        let patterns = 1usize << d;
        let mut components = Vec::with_capacity(gm.components().len() * patterns);
        for c in gm.components() {
            // A zero mean coordinate gives identical patterns; keep them so
            // weights stay uniform, duplicates are harmless.
            for mask in 0..patterns {
                let mean = c
                    .mean
                    .iter()
                    .enumerate()
                    .map(|(i, &mu)| if mask >> i & 1 == 1 { -mu } else { mu })
                    .collect();
                components.push(MixtureComponent {
                    weight: c.weight / patterns as f64,
                    mean,
                    variance: c.variance.clone(),
                });
            }
        }
        let spectral = GaussianMixture::new(components)?;
        Ok(Self { gm, spectral })
    }

    pub fn dim(&self) -> usize {
        self.gm.dim()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Iid,
    Qmc,
    Dppmc,
}

impl Method {
    pub fn label(&self) -> &'static str {
        match self {
            Method::Iid => "iid",
            Method::Qmc => "qmc",
            Method::Dppmc => "dppmc",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Spectral frequency samples together with how they were drawn.
#[derive(Debug, Clone)]
pub struct FeatureFrequencies {
    pub frequencies: SamplePool,
    pub method: Method,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MseRow {
    pub ratio: f64,
    pub method: Method,
    pub mse: f64,
    pub stderr: f64,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MseReport {
    pub rows: Vec<MseRow>,
}

pub const MSE_REPORT_HEADER: &str = "ratio,method,mse,stderr,trials";

impl MseReport {
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{MSE_REPORT_HEADER}")?;
        for r in &self.rows {
            writeln!(out, "{},{},{},{},{}", r.ratio, r.method, r.mse, r.stderr, r.trials)?;
        }
        Ok(())
    }
}

fn check_dims(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

/// Closed-form kernel value.
pub fn gm_kernel_exact(kernel: &GaussianMixtureKernel, x: &[f64], y: &[f64]) -> Result<f64> {
    check_dims(kernel.dim(), x.len())?;
    check_dims(kernel.dim(), y.len())?;
    let tau: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    Ok(gm_kernel_at(kernel, &tau))
}

/// Closed-form kernel value as a function of τ = x − y.
pub fn gm_kernel_at(kernel: &GaussianMixtureKernel, tau: &[f64]) -> f64 {
    kernel
        .gm
        .components()
        .iter()
        .map(|c| {
            let log_envelope: f64 = tau
                .iter()
                .zip(&c.variance)
                .map(|(t, v)| -2.0 * PI * PI * t * t * v)
                .sum();
            let phase: f64 = tau
                .iter()
                .zip(&c.mean)
                .map(|(t, mu)| (2.0 * PI * t * mu).cos())
                .product();
            c.weight * log_envelope.exp() * phase
        })
        .sum()
}

/// (1/m) Σ_v cos(2π vᵀτ).
pub fn gm_kernel_feature_estimate(freqs: &FeatureFrequencies, x: &[f64], y: &[f64]) -> Result<f64> {
    let d = freqs.frequencies.dim();
    check_dims(d, x.len())?;
    check_dims(d, y.len())?;
    let tau = DVector::from_iterator(d, x.iter().zip(y).map(|(a, b)| a - b));
    Ok(feature_estimate_at(&freqs.frequencies, &tau))
}

pub fn feature_estimate_at(frequencies: &SamplePool, tau: &DVector<f64>) -> f64 {
    let m = frequencies.len() as f64;
    frequencies
        .vectors()
        .iter()
        .map(|v| (2.0 * PI * v.dot(tau)).cos())
        .sum::<f64>()
        / m
}

/// Settings shared by every estimator in an MSE sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimatorSettings {
    pub rho: f64,
    pub sigma: f64,
    pub renormalize: bool,
}

impl Default for EstimatorSettings {
    fn default() -> Self {
        Self {
            rho: crate::dppmc::DEFAULT_RHO,
            sigma: crate::dppmc::DEFAULT_RBF_SIGMA,
            renormalize: false,
        }
    }
}

/// Draws `m` frequencies for repetition `rep` with the given method.
pub fn draw_frequencies<R: Rng>(
    kernel: &GaussianMixtureKernel,
    method: Method,
    m: usize,
    rep: u64,
    settings: &EstimatorSettings,
    rng: &mut R,
) -> Result<FeatureFrequencies> {
    let frequencies = match method {
        Method::Iid => sample_gaussian_mixture(&kernel.spectral, m, rng),
        // Repetitions walk consecutive, disjoint blocks of the Halton sequence.
        Method::Qmc => qmc_gaussian_mixture(&kernel.spectral, m, 1 + rep * m as u64)?,
        Method::Dppmc => {
            let cfg = DppmcConfig {
                m,
                rho: settings.rho,
                renormalize: settings.renormalize,
                sigma: settings.sigma,
            };
            dppmc_draw(&kernel.spectral, &cfg, rng)?.selected
        }
    };
    Ok(FeatureFrequencies { frequencies, method })
}

/// Empirical MSE of the `method` estimator with `m` frequencies.
///
/// Each of the `t` repetitions draws one frequency set (from its own
/// substream of `seed`) and scores its mean squared error over all pairs; the
/// row reports the mean over repetitions and its standard error.
pub fn empirical_mse(
    kernel: &GaussianMixtureKernel,
    method: Method,
    m: usize,
    pairs: &[(DVector<f64>, DVector<f64>)],
    t: usize,
    settings: &EstimatorSettings,
    seed: u64,
) -> Result<MseRow> {
    if t < 2 {
        return Err(Error::InvalidConfig("need at least 2 repetitions".into()));
    }
    if m == 0 {
        return Err(Error::InvalidConfig("m must be at least 1".into()));
    }
    if pairs.is_empty() {
        return Err(Error::InvalidConfig("no pairs".into()));
    }
    for (x, y) in pairs {
        check_dims(kernel.dim(), x.len())?;
        check_dims(kernel.dim(), y.len())?;
    }
    let targets: Vec<(DVector<f64>, f64)> = pairs
        .iter()
        .map(|(x, y)| {
            let tau = x - y;
            let exact = gm_kernel_at(kernel, tau.as_slice());
            (tau, exact)
        })
        .collect();

    let per_rep: Vec<f64> = (0..t as u64)
        .into_par_iter()
        .map(|rep| {
            let mut rng = substream(seed, rep);
            let freqs = draw_frequencies(kernel, method, m, rep, settings, &mut rng)?;
            let se = targets
                .iter()
                .map(|(tau, exact)| (feature_estimate_at(&freqs.frequencies, tau) - exact).powi(2))
                .sum::<f64>()
                / targets.len() as f64;
            Ok(se)
        })
        .collect::<Result<_>>()?;

    let n = per_rep.len() as f64;
    let mse = per_rep.iter().sum::<f64>() / n;
    let var = per_rep.iter().map(|x| (x - mse).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(MseRow {
        ratio: m as f64 / kernel.dim() as f64,
        method,
        mse,
        stderr: (var / n).sqrt(),
        trials: t,
    })
}

/// Random Gaussian mixture with `q` components in R^d: weights from a
/// normalized uniform draw, means N(0, mean_scale²), per-coordinate standard
/// deviations uniform in [0.5, 1.5]·std_scale.
pub fn random_mixture<R: Rng + ?Sized>(
    q: usize,
    dim: usize,
    mean_scale: f64,
    std_scale: f64,
    rng: &mut R,
) -> Result<GaussianMixture> {
    let raw: Vec<f64> = (0..q).map(|_| 0.5 + rng.random::<f64>()).collect();
    let total: f64 = raw.iter().sum();
    let mut components: Vec<MixtureComponent> = raw
        .iter()
        .map(|w| MixtureComponent {
            weight: w / total,
            mean: (0..dim)
                .map(|_| mean_scale * Distribution::<f64>::sample(&StandardNormal, rng))
                .collect::<Vec<f64>>(),
            variance: (0..dim)
                .map(|_| (std_scale * (0.5 + rng.random::<f64>())).powi(2))
                .collect(),
        })
        .collect();
    // Absorb rounding so the weights sum to one within the mixture tolerance.
    let sum: f64 = components.iter().map(|c| c.weight).sum();
    components[0].weight += 1.0 - sum;
    GaussianMixture::new(components)
}

/// `n` points from `blobs` isotropic Gaussian clusters in R^d, standardized.
pub fn synthetic_blobs<R: Rng + ?Sized>(n: usize, dim: usize, blobs: usize, rng: &mut R) -> Vec<DVector<f64>> {
    let centers: Vec<DVector<f64>> = (0..blobs.max(1))
        .map(|_| {
            DVector::from_iterator(
                dim,
                (0..dim).map(|_| 3.0 * Distribution::<f64>::sample(&StandardNormal, rng)),
            )
        })
        .collect();
    let points = (0..n)
        .map(|i| {
            let c = &centers[i % centers.len()];
            DVector::from_iterator(
                dim,
                (0..dim).map(|k| c[k] + Distribution::<f64>::sample(&StandardNormal, rng)),
            )
        })
        .collect();
    standardize(points)
}

/// Per-coordinate zero mean and unit (population) variance. Constant columns
/// are centred only.
pub fn standardize(mut points: Vec<DVector<f64>>) -> Vec<DVector<f64>> {
    let Some(dim) = points.first().map(|p| p.len()) else {
        return points;
    };
    let n = points.len() as f64;
    for k in 0..dim {
        let mean = points.iter().map(|p| p[k]).sum::<f64>() / n;
        let var = points.iter().map(|p| (p[k] - mean).powi(2)).sum::<f64>() / n;
        let sd = var.sqrt();
        for p in points.iter_mut() {
            p[k] -= mean;
            if sd > 0.0 {
                p[k] /= sd;
            }
        }
    }
    points
}

/// Seeded random pairing: shuffles the points and pairs neighbours, so `n`
/// points give ⌊n/2⌋ pairs.
pub fn random_pairs<R: Rng + ?Sized>(points: &[DVector<f64>], rng: &mut R) -> Vec<(DVector<f64>, DVector<f64>)> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.shuffle(rng);
    order
        .chunks_exact(2)
        .map(|c| (points[c[0]].clone(), points[c[1]].clone()))
        .collect()
}

/// Reads one point per row. A non-numeric first row is treated as a header.
pub fn read_points_csv<R: BufRead>(reader: R) -> Result<Vec<DVector<f64>>> {
    let mut rows: Vec<DVector<f64>> = Vec::new();
    let mut width = None;
    for (line_no, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let cells: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        let parsed: Vec<std::result::Result<f64, _>> = cells.iter().map(|c| c.parse::<f64>()).collect();
        if line_no == 0 && rows.is_empty() && parsed.iter().any(|p| p.is_err()) {
            continue;
        }
        let mut values = Vec::with_capacity(cells.len());
        for (col, (cell, p)) in cells.iter().zip(parsed).enumerate() {
            match p {
                Ok(v) => values.push(v),
                Err(_) => {
                    return Err(Error::NonNumericCell {
                        row: line_no,
                        col,
                        value: cell.to_string(),
                    })
                }
            }
        }
        match width {
            None => width = Some(values.len()),
            Some(w) if w != values.len() => {
                return Err(Error::RaggedRows {
                    row: line_no,
                    expected: w,
                    got: values.len(),
                })
            }
            _ => {}
        }
        rows.push(DVector::from_vec(values));
    }
    Ok(rows)
}

pub fn write_points_csv<W: Write>(points: &[DVector<f64>], mut out: W) -> std::io::Result<()> {
    for p in points {
        let line: Vec<String> = p.iter().map(|x| format!("{x:?}")).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    Ok(())
}

/// Loads a CSV dataset, standardizes it and forms seeded random pairs.
pub fn load_pair_dataset<R: Rng + ?Sized>(path: &Path, rng: &mut R) -> Result<Vec<(DVector<f64>, DVector<f64>)>> {
    let file = std::fs::File::open(path)?;
    let points = standardize(read_points_csv(std::io::BufReader::new(file))?);
    Ok(random_pairs(&points, rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn one_d(mean: f64, var: f64) -> GaussianMixtureKernel {
        GaussianMixtureKernel::new(
            GaussianMixture::new(vec![MixtureComponent {
                weight: 1.0,
                mean: vec![mean],
                variance: vec![var],
            }])
            .unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn exact_kernel_examples() {
        let k = one_d(0.0, 1.0);
        assert!((gm_kernel_exact(&k, &[0.5], &[0.0]).unwrap() - 0.007_191_883_355_826_8).abs() < 1e-12);
        let km = GaussianMixtureKernel::new(random_mixture(3, 4, 0.5, 0.3, &mut seeded(1)).unwrap()).unwrap();
        let x = [0.3, -0.2, 1.0, 0.0];
        assert!((gm_kernel_exact(&km, &x, &x).unwrap() - 1.0).abs() < 1e-12);
        let y = [0.1, 0.5, -0.7, 0.4];
        let a = gm_kernel_exact(&km, &x, &y).unwrap();
        let b = gm_kernel_exact(&km, &y, &x).unwrap();
        assert!((a - b).abs() < 1e-15);
        assert!(gm_kernel_exact(&km, &x, &[0.0]).is_err());
    }

    #[test]
    fn feature_estimate_examples() {
        let pool = sample_gaussian_mixture(&one_d(0.0, 1.0).gm, 7, &mut seeded(2));
        let freqs = FeatureFrequencies {
            frequencies: pool,
            method: Method::Iid,
        };
        assert_eq!(gm_kernel_feature_estimate(&freqs, &[0.4], &[0.4]).unwrap(), 1.0);

        let single = FeatureFrequencies {
            frequencies: SamplePool::uniform(1, vec![DVector::from_vec(vec![1.0])], crate::Provenance::Fresh).unwrap(),
            method: Method::Iid,
        };
        let v = gm_kernel_feature_estimate(&single, &[0.5], &[0.0]).unwrap();
        assert!((v + 1.0).abs() < 1e-15);
    }

    #[test]
    fn iid_estimate_converges() {
        let k = one_d(0.0, 1.0);
        let m = 100_000;
        let pool = sample_gaussian_mixture(&k.spectral, m, &mut seeded(3));
        let tau = DVector::from_vec(vec![0.5]);
        let values: Vec<f64> = pool.vectors().iter().map(|v| (2.0 * PI * v.dot(&tau)).cos()).collect();
        let mean = values.iter().sum::<f64>() / m as f64;
        let sd = (values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m as f64 - 1.0)).sqrt();
        let exact = gm_kernel_at(&k, &[0.5]);
        assert!((mean - exact).abs() < 3.0 * sd / (m as f64).sqrt());
    }

    #[test]
    fn mse_is_deterministic() {
        let k = GaussianMixtureKernel::new(random_mixture(2, 3, 0.3, 0.2, &mut seeded(4)).unwrap()).unwrap();
        let pts = synthetic_blobs(20, 3, 2, &mut seeded(5));
        let pairs = random_pairs(&pts, &mut seeded(6));
        let s = EstimatorSettings::default();
        for method in [Method::Iid, Method::Qmc, Method::Dppmc] {
            let a = empirical_mse(&k, method, 3, &pairs, 5, &s, 9).unwrap();
            let b = empirical_mse(&k, method, 3, &pairs, 5, &s, 9).unwrap();
            assert_eq!(a, b);
            assert!(a.mse >= 0.0);
        }
        assert!(empirical_mse(&k, Method::Iid, 3, &pairs, 1, &s, 9).is_err());
        assert!(empirical_mse(&k, Method::Iid, 0, &pairs, 2, &s, 9).is_err());
    }

    #[test]
    fn large_m_mse_is_small() {
        let k = GaussianMixtureKernel::new(random_mixture(2, 2, 0.3, 0.2, &mut seeded(7)).unwrap()).unwrap();
        let pts = synthetic_blobs(10, 2, 1, &mut seeded(8));
        let pairs = random_pairs(&pts, &mut seeded(9));
        let row = empirical_mse(&k, Method::Iid, 100_000, &pairs, 2, &EstimatorSettings::default(), 1).unwrap();
        assert!(row.mse <= 1e-4, "{}", row.mse);
    }

    #[test]
    fn csv_reader_handles_header_and_errors() {
        let data = "a,b\n1,2\n3,4\n";
        let pts = read_points_csv(data.as_bytes()).unwrap();
        assert_eq!(pts.len(), 2);
        let no_header = read_points_csv("1,2\n3,4\n".as_bytes()).unwrap();
        assert_eq!(pts, no_header);
        assert!(matches!(
            read_points_csv("1,2\n3,x\n".as_bytes()),
            Err(Error::NonNumericCell { row: 1, col: 1, .. })
        ));
        assert!(matches!(
            read_points_csv("1,2\n3\n".as_bytes()),
            Err(Error::RaggedRows { .. })
        ));
    }

    #[test]
    fn two_rows_make_one_pair() {
        let pts = standardize(read_points_csv("1,2\n3,5\n".as_bytes()).unwrap());
        assert_eq!(random_pairs(&pts, &mut seeded(1)).len(), 1);
    }

    #[test]
    fn standardization_moments() {
        let pts = synthetic_blobs(200, 8, 4, &mut seeded(10));
        for k in 0..8 {
            let mean = pts.iter().map(|p| p[k]).sum::<f64>() / 200.0;
            let var = pts.iter().map(|p| (p[k] - mean).powi(2)).sum::<f64>() / 200.0;
            assert!(mean.abs() < 1e-12);
            assert!((var - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let pts = synthetic_blobs(30, 5, 3, &mut seeded(11));
        let mut buf = Vec::new();
        write_points_csv(&pts, &mut buf).unwrap();
        let back = read_points_csv(buf.as_slice()).unwrap();
        assert_eq!(pts, back);
    }

    #[test]
    fn report_csv_header() {
        let report = MseReport {
            rows: vec![MseRow {
                ratio: 1.0,
                method: Method::Dppmc,
                mse: 0.01,
                stderr: 0.001,
                trials: 10,
            }],
        };
        let mut buf = Vec::new();
        report.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "ratio,method,mse,stderr,trials\n1,dppmc,0.01,0.001,10\n"
        );
    }
}
