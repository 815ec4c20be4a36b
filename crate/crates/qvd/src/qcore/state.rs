//! Density operators with a cached eigendecomposition.

use num_complex::Complex64;

use super::matrix::{self, cr, CMatrix, DEFAULT_TOL, POS_FLOOR};
use crate::error::{QvdError, Result};

/// Positive-semidefinite, unit-trace Hermitian matrix together with its
/// eigendecomposition (eigenvalues ascending).
#[derive(Debug, Clone)]
pub struct DensityOperator {
    matrix: CMatrix,
    eigenvalues: Vec<f64>,
    eigenvectors: CMatrix,
}

impl DensityOperator {
    /// Validate `m` as a state: Hermitian, unit trace, and PSD, each within
    /// `tol`. Eigenvalues are clamped to [0, 1] only when inside the tolerance
    /// band.
    pub fn new(m: &CMatrix, tol: f64) -> Result<Self> {
        let d = m.nrows();
        if d != m.ncols() {
            return Err(QvdError::DimensionMismatch {
                context: format!("state must be square, got {}x{}", d, m.ncols()),
            });
        }
        let tr = matrix::trace(m);
        let trace_dev = (tr - Complex64::new(1.0, 0.0)).norm();
        if trace_dev > tol {
            return Err(QvdError::TraceDeviation {
                deviation: trace_dev,
                tol,
            });
        }
        let (raw_values, eigenvectors) = matrix::hermitian_eigen(m, tol)?;
        let min = raw_values[0];
        if min < -tol {
            return Err(QvdError::NotPositive {
                min_eigenvalue: min,
                tol,
            });
        }
        let eigenvalues: Vec<f64> = raw_values.iter().map(|&p| p.clamp(0.0, 1.0)).collect();
        Ok(Self {
            matrix: matrix::hermitize(m),
            eigenvalues,
            eigenvectors,
        })
    }

    /// State with the given spectrum in the given orthonormal basis
    /// (column j of `basis` carries `spectrum[j]`).
    pub fn from_spectrum(spectrum: &[f64], basis: &CMatrix) -> Result<Self> {
        let d = spectrum.len();
        if basis.nrows() != d || basis.ncols() != d {
            return Err(QvdError::DimensionMismatch {
                context: format!("basis {}x{} for a {d}-level spectrum", basis.nrows(), basis.ncols()),
            });
        }
        let mut m = matrix::zeros(d, d);
        for j in 0..d {
            let v = basis.column(j);
            for r in 0..d {
                for c in 0..d {
                    m[(r, c)] += cr(spectrum[j]) * v[r] * v[c].conj();
                }
            }
        }
        Self::new(&m, DEFAULT_TOL)
    }

    pub fn maximally_mixed(d: usize) -> Self {
        let m = matrix::identity(d).scale(1.0 / d as f64);
        Self::new(&m, DEFAULT_TOL).expect("I/d is a state")
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    /// Eigenvalues, ascending.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Orthonormal eigenvectors as columns, matching [`Self::eigenvalues`].
    pub fn eigenvectors(&self) -> &CMatrix {
        &self.eigenvectors
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues[0]
    }

    /// True when every eigenvalue clears the positivity floor.
    pub fn is_strictly_positive(&self) -> bool {
        self.min_eigenvalue() >= POS_FLOOR
    }

    /// Spectrum sorted descending — the convention used for lattice weights,
    /// so that probabilities pair with eigenprojectors deterministically.
    pub fn spectrum_descending(&self) -> Vec<(f64, usize)> {
        let mut idx: Vec<usize> = (0..self.dim()).collect();
        idx.sort_by(|&a, &b| self.eigenvalues[b].partial_cmp(&self.eigenvalues[a]).unwrap());
        idx.into_iter().map(|i| (self.eigenvalues[i], i)).collect()
    }
}

/// Validate a matrix as a density operator. Thin constructor wrapper kept as
/// the crate-level entry point.
pub fn make_density(m: &CMatrix, tol: f64) -> Result<DensityOperator> {
    DensityOperator::new(m, tol)
}

pub fn diag_state(entries: &[f64]) -> Result<DensityOperator> {
    let d = entries.len();
    let mut m = matrix::zeros(d, d);
    for (i, &p) in entries.iter().enumerate() {
        m[(i, i)] = cr(p);
    }
    make_density(&m, DEFAULT_TOL)
}
