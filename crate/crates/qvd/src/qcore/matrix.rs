//! Dense complex matrices, Hermitian spectral calculus, and Schatten norms.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{QvdError, Result};

/// Dense complex matrix used throughout the crate.
pub type CMatrix = DMatrix<Complex64>;

/// Default tolerance for Hermiticity, trace, and positivity checks.
pub const DEFAULT_TOL: f64 = 1e-9;
/// Tolerance for representation round trips.
pub const ROUND_TRIP_TOL: f64 = 1e-10;
/// Eigenvalue floor below which a state counts as singular.
pub const POS_FLOOR: f64 = 1e-12;

pub fn czero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

pub fn cr(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

pub fn identity(d: usize) -> CMatrix {
    CMatrix::identity(d, d)
}

pub fn zeros(rows: usize, cols: usize) -> CMatrix {
    CMatrix::zeros(rows, cols)
}

pub fn dagger(m: &CMatrix) -> CMatrix {
    m.adjoint()
}

pub fn trace(m: &CMatrix) -> Complex64 {
    m.diagonal().iter().sum()
}

/// Largest absolute deviation from Hermitian symmetry.
pub fn hermiticity_deviation(m: &CMatrix) -> f64 {
    let mut dev: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    dev
}

/// Hermitian part (M + M†)/2.
pub fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

pub fn max_abs_entry(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending with the
/// columns of the returned matrix as the matching orthonormal eigenvectors.
/// Symmetrizes first when the Hermiticity deviation is within `tol`, and
/// rejects otherwise.
pub fn hermitian_eigen(m: &CMatrix, tol: f64) -> Result<(Vec<f64>, CMatrix)> {
    if m.nrows() != m.ncols() {
        return Err(QvdError::DimensionMismatch {
            context: format!("eigendecomposition of a {}x{} matrix", m.nrows(), m.ncols()),
        });
    }
    let dev = hermiticity_deviation(m);
    if dev > tol {
        return Err(QvdError::NotHermitian {
            deviation: dev,
            tol,
        });
    }
    let se = hermitize(m).symmetric_eigen();
    let d = m.nrows();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| se.eigenvalues[a].partial_cmp(&se.eigenvalues[b]).unwrap());
    let values: Vec<f64> = order.iter().map(|&i| se.eigenvalues[i]).collect();
    let mut vectors = zeros(d, d);
    for (col, &src) in order.iter().enumerate() {
        vectors.set_column(col, &se.eigenvectors.column(src));
    }
    Ok((values, vectors))
}

/// Functional calculus U f(Λ) U† on a Hermitian matrix. `f` returning NaN or
/// infinity at some eigenvalue is reported as undefined there.
pub fn spectral_apply<F: Fn(f64) -> f64>(f: F, h: &CMatrix, tol: f64) -> Result<CMatrix> {
    let (values, vectors) = hermitian_eigen(h, tol)?;
    let d = h.nrows();
    let mut out = zeros(d, d);
    for (j, &lam) in values.iter().enumerate() {
        let fl = f(lam);
        if !fl.is_finite() {
            return Err(QvdError::FunctionUndefined { eigenvalue: lam });
        }
        let v = vectors.column(j);
        for r in 0..d {
            for c in 0..d {
                out[(r, c)] += cr(fl) * v[r] * v[c].conj();
            }
        }
    }
    Ok(out)
}

/// Singular values, descending.
pub fn singular_values(m: &CMatrix) -> Vec<f64> {
    let mut sv: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
    sv
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchattenP {
    One,
    Two,
    Inf,
}

/// Schatten norm: sum (p=1), root-sum-square (p=2), or max (p=∞) of the
/// singular values.
pub fn schatten_norm(m: &CMatrix, p: SchattenP) -> f64 {
    let sv = singular_values(m);
    match p {
        SchattenP::One => sv.iter().sum(),
        SchattenP::Two => sv.iter().map(|s| s * s).sum::<f64>().sqrt(),
        SchattenP::Inf => sv.first().copied().unwrap_or(0.0),
    }
}

pub fn trace_norm(m: &CMatrix) -> f64 {
    schatten_norm(m, SchattenP::One)
}

pub fn op_norm(m: &CMatrix) -> f64 {
    schatten_norm(m, SchattenP::Inf)
}

/// Column-stacking vectorization: vec(M)[i + j*d] = M[i, j].
pub fn vec_col(m: &CMatrix) -> CMatrix {
    let (r, c) = (m.nrows(), m.ncols());
    let mut v = zeros(r * c, 1);
    for j in 0..c {
        for i in 0..r {
            v[(i + j * r, 0)] = m[(i, j)];
        }
    }
    v
}

/// Inverse of [`vec_col`] for square matrices.
pub fn unvec_col(v: &CMatrix, d: usize) -> CMatrix {
    let mut m = zeros(d, d);
    for j in 0..d {
        for i in 0..d {
            m[(i, j)] = v[(i + j * d, 0)];
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pauli_y() -> CMatrix {
        CMatrix::from_row_slice(
            2,
            2,
            &[
                czero(),
                Complex64::new(0.0, -1.0),
                Complex64::new(0.0, 1.0),
                czero(),
            ],
        )
    }

    #[test]
    fn spectral_identity_returns_input() {
        let h = pauli_y();
        let back = spectral_apply(|x| x, &h, DEFAULT_TOL).unwrap();
        assert!(max_abs_entry(&(&back - &h)) < 1e-12);
    }

    #[test]
    fn spectral_sqrt_on_diagonal() {
        let h = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![cr(4.0), cr(9.0)]));
        let s = spectral_apply(f64::sqrt, &h, DEFAULT_TOL).unwrap();
        assert!((s[(0, 0)].re - 2.0).abs() < 1e-12);
        assert!((s[(1, 1)].re - 3.0).abs() < 1e-12);
        assert!(s[(0, 1)].norm() < 1e-12);
    }

    #[test]
    fn spectral_tanh_at_zero_is_zero() {
        let z = zeros(3, 3);
        let t = spectral_apply(f64::tanh, &z, DEFAULT_TOL).unwrap();
        assert!(max_abs_entry(&t) < 1e-15);
    }

    #[test]
    fn sqrt_of_negative_eigenvalue_is_rejected() {
        let h = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![cr(1.0), cr(-1.0)]));
        assert!(matches!(
            spectral_apply(f64::sqrt, &h, DEFAULT_TOL),
            Err(QvdError::FunctionUndefined { .. })
        ));
    }

    #[test]
    fn schatten_norms_on_diag() {
        let m = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![cr(1.0), cr(-2.0)]));
        assert!((schatten_norm(&m, SchattenP::One) - 3.0).abs() < 1e-12);
        assert!((schatten_norm(&m, SchattenP::Inf) - 2.0).abs() < 1e-12);
        assert!((schatten_norm(&m, SchattenP::Two) - 5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn vec_round_trip() {
        let m = pauli_y();
        assert!(max_abs_entry(&(unvec_col(&vec_col(&m), 2) - &m)) < 1e-15);
    }

    #[test]
    fn non_hermitian_is_rejected() {
        let mut m = pauli_y();
        m[(0, 1)] += cr(0.1);
        assert!(matches!(
            hermitian_eigen(&m, DEFAULT_TOL),
            Err(QvdError::NotHermitian { .. })
        ));
    }
}
