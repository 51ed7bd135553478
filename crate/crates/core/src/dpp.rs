//! Exact determinantal point processes over a finite ground set.
//!
//! A DPP is given either as an [`LEnsemble`] (P[S] = det(L_S) / det(L + I)) or
//! as a [`MarginalKernel`] (P[A ⊆ S] = det(K_A)). Both types carry their
//! eigendecomposition, computed once at construction, so repeated sampling
//! only pays for the elementary-DPP phase.
//!
//! Subsets are represented as sorted `Vec<usize>`.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::Rng;

use crate::linalg::{
    check_indices, ensure_square, max_abs, max_asymmetry, orthonormalize_columns, principal_minor, Spectrum,
};
use crate::{Error, Result};

/// Allowed drift of eigenvalues outside their valid range before clamping.
pub const EIGEN_CLAMP_TOL: f64 = 1e-8;
/// Symmetry tolerance, relative to max(1, ‖M‖_max).
pub const SYMMETRY_TOL: f64 = 1e-10;
/// Eigenvalues above this count towards the rank of an L-ensemble.
pub const RANK_TOL: f64 = 1e-10;
/// Gram–Schmidt second-pass trigger in the elementary-DPP phase.
pub const REORTH_THRESHOLD: f64 = 1e-7;
pub const K_DPP_ENUMERATION_CAP: usize = 20;
pub const DPP_ENUMERATION_CAP: usize = 16;

fn symmetrized(matrix: DMatrix<f64>) -> Result<DMatrix<f64>> {
    ensure_square(&matrix)?;
    let asym = max_asymmetry(&matrix);
    if asym > SYMMETRY_TOL * max_abs(&matrix).max(1.0) {
        return Err(Error::NotSymmetric(asym));
    }
    Ok((&matrix + matrix.transpose()) * 0.5)
}

/// L-ensemble: P[S] = det(L_S) / det(L + I).
#[derive(Debug, Clone)]
pub struct LEnsemble {
    matrix: DMatrix<f64>,
    spectrum: Spectrum,
}

impl LEnsemble {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        let matrix = symmetrized(matrix)?;
        let spectrum = Spectrum::of(&matrix);
        if spectrum.min() < -EIGEN_CLAMP_TOL {
            return Err(Error::NotPositiveSemidefinite(spectrum.min()));
        }
        let spectrum = spectrum.map(|l| l.max(0.0));
        Ok(Self { matrix, spectrum })
    }

    pub fn n_items(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn spectrum(&self) -> &Spectrum {
        &self.spectrum
    }

    pub fn rank(&self) -> usize {
        self.spectrum.eigenvalues.iter().filter(|&&l| l > RANK_TOL).count()
    }

    /// det(L + I) = Π (1 + λ).
    pub fn normalizer(&self) -> f64 {
        self.spectrum.eigenvalues.iter().map(|l| 1.0 + l).product()
    }

    /// K = L (L + I)⁻¹, sharing L's eigenvectors.
    pub fn to_marginal(&self) -> MarginalKernel {
        let spectrum = self.spectrum.map(|l| l / (1.0 + l));
        MarginalKernel {
            matrix: spectrum.reconstruct(),
            spectrum,
        }
    }
}

/// Marginal kernel: P[A ⊆ S] = det(K_A), valid iff 0 ⪯ K ⪯ I.
#[derive(Debug, Clone)]
pub struct MarginalKernel {
    matrix: DMatrix<f64>,
    spectrum: Spectrum,
}

impl MarginalKernel {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        let matrix = symmetrized(matrix)?;
        let spectrum = Spectrum::of(&matrix);
        if spectrum.min() < -EIGEN_CLAMP_TOL {
            return Err(Error::InvalidMarginalKernel(spectrum.min()));
        }
        if spectrum.max() > 1.0 + EIGEN_CLAMP_TOL {
            return Err(Error::InvalidMarginalKernel(spectrum.max()));
        }
        let spectrum = spectrum.map(|l| l.clamp(0.0, 1.0));
        Ok(Self { matrix, spectrum })
    }

    pub fn n_items(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn spectrum(&self) -> &Spectrum {
        &self.spectrum
    }

    /// L = K (I − K)⁻¹. Fails when an eigenvalue of K reaches 1.
    pub fn to_l_ensemble(&self) -> Result<LEnsemble> {
        if let Some(&l) = self.spectrum.eigenvalues.iter().find(|&&l| l >= 1.0 - 1e-12) {
            return Err(Error::InvalidMarginalKernel(l));
        }
        let spectrum = self.spectrum.map(|l| l / (1.0 - l));
        LEnsemble::new(spectrum.reconstruct())
    }
}

/// P[S] = det(L_S) / det(L + I).
pub fn lensemble_subset_probability(l: &LEnsemble, subset: &[usize]) -> Result<f64> {
    check_indices(subset, l.n_items())?;
    Ok(principal_minor(&l.matrix, subset) / l.normalizer())
}

/// P[A ⊆ S] = det(K_A).
pub fn marginal_inclusion_probability(k: &MarginalKernel, subset: &[usize]) -> Result<f64> {
    check_indices(subset, k.n_items())?;
    Ok(principal_minor(&k.matrix, subset))
}

pub fn l_to_marginal(l: &LEnsemble) -> MarginalKernel {
    l.to_marginal()
}

/// Elementary symmetric polynomials of every prefix of `eigenvalues`.
///
/// `table[k][n]` is e_k of the first `n` eigenvalues, for `k <= k_max` and
/// `n <= N`.
pub fn elementary_symmetric(eigenvalues: &[f64], k_max: usize) -> Result<Vec<Vec<f64>>> {
    let n = eigenvalues.len();
    if k_max > n {
        return Err(Error::InvalidConfig(format!(
            "k_max = {k_max} exceeds the number of eigenvalues {n}"
        )));
    }
    let mut table = vec![vec![0.0; n + 1]; k_max + 1];
    table[0].iter_mut().for_each(|e| *e = 1.0);
    for k in 1..=k_max {
        for i in 1..=n {
            table[k][i] = table[k][i - 1] + eigenvalues[i - 1] * table[k - 1][i - 1];
        }
    }
    Ok(table)
}

/// Draws an index with probability proportional to `weights`.
fn categorical<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, &w) in weights.iter().enumerate() {
        if u < w {
            return i;
        }
        u -= w;
    }
    // Rounding can leave u slightly above the last bucket.
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

/// Elementary-DPP phase: samples exactly `basis.ncols()` items from the
/// projection DPP spanned by the orthonormal columns of `basis`.
fn sample_elementary<R: Rng + ?Sized>(mut basis: DMatrix<f64>, rng: &mut R) -> Vec<usize> {
    let n = basis.nrows();
    let mut chosen = Vec::with_capacity(basis.ncols());
    while basis.ncols() > 0 {
        let weights: Vec<f64> = (0..n).map(|i| basis.row(i).norm_squared()).collect();
        let item = categorical(&weights, rng);
        chosen.push(item);

        let pivot = (0..basis.ncols())
            .max_by(|&a, &b| basis[(item, a)].abs().total_cmp(&basis[(item, b)].abs()))
            .expect("nonempty basis");
        let pivot_col = basis.column(pivot).into_owned();
        let pivot_val = pivot_col[item];
        let mut projected = DMatrix::zeros(n, basis.ncols() - 1);
        for (dst, src) in (0..basis.ncols()).filter(|&c| c != pivot).enumerate() {
            let factor = basis[(item, src)] / pivot_val;
            let mut col = basis.column(src).into_owned();
            col.axpy(-factor, &pivot_col, 1.0);
            col[item] = 0.0;
            projected.set_column(dst, &col);
        }
        basis = orthonormalize_columns(projected, REORTH_THRESHOLD);
    }
    chosen.sort_unstable();
    chosen
}

fn columns(spectrum: &Spectrum, keep: &[usize]) -> DMatrix<f64> {
    let n = spectrum.eigenvectors.nrows();
    DMatrix::from_fn(n, keep.len(), |r, c| spectrum.eigenvectors[(r, keep[c])])
}

/// Spectral DPP sampler: keep eigenvector n with probability λ_n, then run
/// the elementary phase on the kept eigenvectors.
pub fn sample_dpp<R: Rng + ?Sized>(k: &MarginalKernel, rng: &mut R) -> Vec<usize> {
    let keep: Vec<usize> = k
        .spectrum
        .eigenvalues
        .iter()
        .enumerate()
        .filter(|(_, &l)| rng.random::<f64>() < l)
        .map(|(i, _)| i)
        .collect();
    sample_elementary(columns(&k.spectrum, &keep), rng)
}

/// Samples from the L-ensemble DPP directly.
pub fn sample_dpp_l<R: Rng + ?Sized>(l: &LEnsemble, rng: &mut R) -> Vec<usize> {
    let keep: Vec<usize> = l
        .spectrum
        .eigenvalues
        .iter()
        .enumerate()
        .filter(|(_, &lam)| rng.random::<f64>() < lam / (1.0 + lam))
        .map(|(i, _)| i)
        .collect();
    sample_elementary(columns(&l.spectrum, &keep), rng)
}

/// Exactly-`size` DPP: P[S] ∝ det(L_S) over |S| = size.
pub fn sample_k_dpp<R: Rng + ?Sized>(l: &LEnsemble, size: usize, rng: &mut R) -> Result<Vec<usize>> {
    let rank = l.rank();
    if size > rank {
        return Err(Error::InsufficientRank { k: size, rank });
    }
    if size == 0 {
        return Ok(Vec::new());
    }
    // Rescaling L leaves the k-DPP unchanged; pick the scale that keeps the
    // elementary symmetric polynomials in floating-point range.
    let total: f64 = l.spectrum.eigenvalues.iter().sum();
    let scale = size as f64 / total;
    let lambdas: Vec<f64> = l.spectrum.eigenvalues.iter().map(|x| x * scale).collect();
    let e = elementary_symmetric(&lambdas, size)?;

    let mut remaining = size;
    let mut keep = Vec::with_capacity(size);
    for n in (1..=lambdas.len()).rev() {
        if remaining == 0 {
            break;
        }
        if remaining > n {
            break;
        }
        let p = lambdas[n - 1] * e[remaining - 1][n - 1] / e[remaining][n];
        if rng.random::<f64>() < p {
            keep.push(n - 1);
            remaining -= 1;
        }
    }
    if remaining > 0 {
        return Err(Error::InsufficientRank {
            k: size,
            rank: keep.len(),
        });
    }
    Ok(sample_elementary(columns(&l.spectrum, &keep), rng))
}

/// All size-`k` subsets of `0..n` in lexicographic order.
pub fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k > n {
        return out;
    }
    let mut current: Vec<usize> = (0..k).collect();
    loop {
        out.push(current.clone());
        let mut i = k;
        while i > 0 && current[i - 1] == n - k + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return out;
        }
        current[i - 1] += 1;
        for j in i..k {
            current[j] = current[j - 1] + 1;
        }
    }
}

/// All subsets of `0..n`, smallest first within each size.
pub fn all_subsets(n: usize) -> Vec<Vec<usize>> {
    (0..=n).flat_map(|k| combinations(n, k)).collect()
}

/// Exact law of the k-DPP: det(L_S) / Σ_{|S'|=k} det(L_S').
pub fn enumerate_k_dpp_distribution(l: &LEnsemble, k: usize) -> Result<BTreeMap<Vec<usize>, f64>> {
    let n = l.n_items();
    if n > K_DPP_ENUMERATION_CAP {
        return Err(Error::CapExceeded {
            n,
            cap: K_DPP_ENUMERATION_CAP,
        });
    }
    let minors: Vec<(Vec<usize>, f64)> = combinations(n, k)
        .into_iter()
        .map(|s| {
            let det = principal_minor(&l.matrix, &s).max(0.0);
            (s, det)
        })
        .collect();
    let total: f64 = minors.iter().map(|(_, d)| d).sum();
    if !(total > 0.0) {
        return Err(Error::InsufficientRank { k, rank: l.rank() });
    }
    Ok(minors.into_iter().map(|(s, d)| (s, d / total)).collect())
}

/// Exact law of DPP(L) over all 2^N subsets.
pub fn enumerate_dpp_distribution(l: &LEnsemble) -> Result<BTreeMap<Vec<usize>, f64>> {
    let n = l.n_items();
    if n > DPP_ENUMERATION_CAP {
        return Err(Error::CapExceeded {
            n,
            cap: DPP_ENUMERATION_CAP,
        });
    }
    let z = l.normalizer();
    Ok(all_subsets(n)
        .into_iter()
        .map(|s| {
            let p = principal_minor(&l.matrix, &s).max(0.0) / z;
            (s, p)
        })
        .collect())
}

/// Exact law of DPP(K) via P[S = A] = |det(K − I_Ā)|, where I_Ā is the
/// identity restricted to the complement of A. Valid even when K has unit
/// eigenvalues.
pub fn enumerate_marginal_distribution(k: &MarginalKernel) -> Result<BTreeMap<Vec<usize>, f64>> {
    let n = k.n_items();
    if n > DPP_ENUMERATION_CAP {
        return Err(Error::CapExceeded {
            n,
            cap: DPP_ENUMERATION_CAP,
        });
    }
    Ok(all_subsets(n)
        .into_iter()
        .map(|s| {
            let mut m = k.matrix.clone();
            for i in 0..n {
                if s.binary_search(&i).is_err() {
                    m[(i, i)] -= 1.0;
                }
            }
            let p = if n == 0 { 1.0 } else { m.determinant().abs() };
            (s, p)
        })
        .collect())
}

/// P[i ∈ S | j ∈ S] = det(K_{ij}) / K_jj.
pub fn conditional_inclusion(k: &MarginalKernel, i: usize, j: usize) -> Result<f64> {
    check_indices(&[i, j], k.n_items())?;
    let kjj = k.matrix[(j, j)];
    if !(kjj > 0.0) {
        return Err(Error::InvalidConfig(format!("K[{j},{j}] must be positive")));
    }
    Ok(principal_minor(&k.matrix, &[i, j]) / kjj)
}

/// Whether conditioning on j strictly lowers the inclusion probability of i.
/// Algebraically det(K_{ij}) / K_jj < K_ii reduces to K_ij² > 0.
pub fn negative_dependence_check(k: &MarginalKernel, i: usize, j: usize) -> Result<bool> {
    check_indices(&[i, j], k.n_items())?;
    if i == j {
        return Err(Error::InvalidConfig("i and j must differ".into()));
    }
    if !(k.matrix[(j, j)] > 0.0) {
        return Err(Error::InvalidConfig(format!("K[{j},{j}] must be positive")));
    }
    Ok(k.matrix[(i, j)].powi(2) > 0.0)
}
