//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::{Error, Result};

/// Eigendecomposition of a symmetric matrix with eigenvalues sorted
/// nonincreasing and eigenvectors stored as matching columns.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: DMatrix<f64>,
}

impl Spectrum {
    pub fn of(matrix: &DMatrix<f64>) -> Self {
        let eig = SymmetricEigen::new(matrix.clone());
        let n = eig.eigenvalues.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let eigenvalues = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let eigenvectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
        Self {
            eigenvalues,
            eigenvectors,
        }
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(0.0)
    }

    pub fn max(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(0.0)
    }

    /// V diag(λ) Vᵀ.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let n = self.len();
        let scaled = DMatrix::from_fn(n, n, |r, c| self.eigenvectors[(r, c)] * self.eigenvalues[c]);
        &scaled * self.eigenvectors.transpose()
    }

    /// Same eigenvectors, eigenvalues mapped through `f`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Spectrum {
        Spectrum {
            eigenvalues: self.eigenvalues.iter().map(|&l| f(l)).collect(),
            eigenvectors: self.eigenvectors.clone(),
        }
    }
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

pub fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in 0..i {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

pub fn ensure_square(m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(())
}

/// Principal submatrix M_S.
pub fn principal_submatrix(m: &DMatrix<f64>, subset: &[usize]) -> DMatrix<f64> {
    let k = subset.len();
    DMatrix::from_fn(k, k, |r, c| m[(subset[r], subset[c])])
}

/// det(M_S), with det of the empty submatrix equal to 1.
pub fn principal_minor(m: &DMatrix<f64>, subset: &[usize]) -> f64 {
    match subset.len() {
        0 => 1.0,
        1 => m[(subset[0], subset[0])],
        2 => {
            let (a, b) = (subset[0], subset[1]);
            m[(a, a)] * m[(b, b)] - m[(a, b)] * m[(b, a)]
        }
        _ => principal_submatrix(m, subset).determinant(),
    }
}

pub fn check_indices(subset: &[usize], n: usize) -> Result<()> {
    match subset.iter().find(|&&i| i >= n) {
        Some(&index) => Err(Error::IndexOutOfRange { index, n }),
        None => Ok(()),
    }
}

/// Orthonormalize the columns of `v` in place with modified Gram–Schmidt,
/// dropping columns whose residual norm collapses. A second pass runs when
/// any projected norm falls below `reorth_threshold` relative to its input.
pub fn orthonormalize_columns(v: DMatrix<f64>, reorth_threshold: f64) -> DMatrix<f64> {
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(v.ncols());
    for j in 0..v.ncols() {
        let mut col = v.column(j).into_owned();
        let original = col.norm();
        if original == 0.0 {
            continue;
        }
        for b in &basis {
            let proj = b.dot(&col);
            col.axpy(-proj, b, 1.0);
        }
        if col.norm() < reorth_threshold * original {
            for b in &basis {
                let proj = b.dot(&col);
                col.axpy(-proj, b, 1.0);
            }
        }
        let norm = col.norm();
        if norm > 1e-12 * original.max(1.0) {
            basis.push(col / norm);
        }
    }
    if basis.is_empty() {
        return DMatrix::zeros(v.nrows(), 0);
    }
    DMatrix::from_columns(&basis)
}

/// Solves the SPD system A x = b via Cholesky.
pub fn solve_spd(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    a.clone().cholesky().map(|c| c.solve(b))
}
