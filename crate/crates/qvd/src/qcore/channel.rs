//! Channels in Kraus / Choi / Liouville representations, conversions between
//! them, CPTP verification, and a small zoo of standard channels.
//!
//! Conventions, fixed once for the whole crate:
//! - vectorization is column-stacking, so the Liouville matrix of
//!   X ↦ Σ K X K† is Σ conj(K) ⊗ K;
//! - the Choi matrix is J = Σ_{ij} Φ(E_ij) ⊗ E_ij (output factor first,
//!   unnormalized: Tr J = d for a CPTP map, Tr over the output factor = I).


use super::matrix::{
    self, cr, czero, dagger, hermitian_eigen, identity, op_norm, unvec_col, vec_col, zeros,
    CMatrix, DEFAULT_TOL,
};
use crate::error::{QvdError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Representation {
    Kraus,
    Choi,
    Liouville,
}

#[derive(Debug, Clone)]
pub struct Channel {
    dim: usize,
    kraus: Option<Vec<CMatrix>>,
    choi: Option<CMatrix>,
    liouville: Option<CMatrix>,
}

/// Outcome of a CPTP check: most negative Choi eigenvalue and the operator-norm
/// distance of the output-traced Choi matrix from the identity.
#[derive(Debug, Clone, Copy)]
pub struct CptpReport {
    pub min_choi_eigenvalue: f64,
    pub tp_deviation: f64,
}

impl CptpReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.min_choi_eigenvalue >= -tol && self.tp_deviation <= tol
    }
}

impl Channel {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kraus(&self) -> Option<&[CMatrix]> {
        self.kraus.as_deref()
    }

    /// Build a channel from Kraus operators. Completeness is not demanded
    /// here; call [`Channel::require_cptp`] or [`verify_cptp`] for that.
    pub fn from_kraus(kraus: Vec<CMatrix>) -> Result<Self> {
        if kraus.is_empty() {
            return Err(QvdError::DimensionMismatch {
                context: "empty Kraus list".into(),
            });
        }
        let d = kraus[0].nrows();
        for (i, k) in kraus.iter().enumerate() {
            if k.nrows() != d || k.ncols() != d {
                return Err(QvdError::DimensionMismatch {
                    context: format!(
                        "Kraus operator {i} is {}x{}, expected {d}x{d}",
                        k.nrows(),
                        k.ncols()
                    ),
                });
            }
        }
        Ok(Self {
            dim: d,
            kraus: Some(kraus),
            choi: None,
            liouville: None,
        })
    }

    pub fn from_choi(choi: CMatrix) -> Result<Self> {
        let d2 = choi.nrows();
        let d = (d2 as f64).sqrt().round() as usize;
        if d * d != d2 || choi.ncols() != d2 {
            return Err(QvdError::DimensionMismatch {
                context: format!("Choi matrix is {}x{}, expected d²xd²", choi.nrows(), choi.ncols()),
            });
        }
        Ok(Self {
            dim: d,
            kraus: None,
            choi: Some(choi),
            liouville: None,
        })
    }

    pub fn from_liouville(liouville: CMatrix) -> Result<Self> {
        let d2 = liouville.nrows();
        let d = (d2 as f64).sqrt().round() as usize;
        if d * d != d2 || liouville.ncols() != d2 {
            return Err(QvdError::DimensionMismatch {
                context: format!(
                    "Liouville matrix is {}x{}, expected d²xd²",
                    liouville.nrows(),
                    liouville.ncols()
                ),
            });
        }
        Ok(Self {
            dim: d,
            kraus: None,
            choi: None,
            liouville: Some(liouville),
        })
    }

    /// Error unless the Kraus completeness sum is the identity within `tol`.
    pub fn require_cptp(&self, tol: f64) -> Result<()> {
        let report = verify_cptp(self, tol)?;
        if !report.passes(tol) {
            return Err(QvdError::CompletenessViolation {
                deviation: report.tp_deviation.max((-report.min_choi_eigenvalue).max(0.0)),
            });
        }
        Ok(())
    }

    /// Liouville matrix, computing it from another representation if needed.
    pub fn liouville_matrix(&self) -> Result<CMatrix> {
        if let Some(l) = &self.liouville {
            return Ok(l.clone());
        }
        if let Some(kraus) = &self.kraus {
            let d2 = self.dim * self.dim;
            let mut l = zeros(d2, d2);
            for k in kraus {
                let kc = k.map(|z| z.conj());
                l += kc.kronecker(k);
            }
            return Ok(l);
        }
        if let Some(choi) = &self.choi {
            return Ok(choi_to_liouville(choi, self.dim));
        }
        Err(QvdError::MissingRepresentation)
    }

    /// Choi matrix, computing it from another representation if needed.
    pub fn choi_matrix(&self) -> Result<CMatrix> {
        if let Some(j) = &self.choi {
            return Ok(j.clone());
        }
        if let Some(kraus) = &self.kraus {
            let d = self.dim;
            let mut j = zeros(d * d, d * d);
            for k in kraus {
                // w[m*d + i] = K[m, i]; J += w w†.
                let mut w = zeros(d * d, 1);
                for m in 0..d {
                    for i in 0..d {
                        w[(m * d + i, 0)] = k[(m, i)];
                    }
                }
                j += &w * dagger(&w);
            }
            return Ok(j);
        }
        if let Some(l) = &self.liouville {
            return Ok(liouville_to_choi(l, self.dim));
        }
        Err(QvdError::MissingRepresentation)
    }

    /// Kraus operators from the Choi eigendecomposition, descending by
    /// eigenvalue. Fails if the Choi matrix is not PSD within the default
    /// tolerance.
    pub fn kraus_operators(&self) -> Result<Vec<CMatrix>> {
        if let Some(k) = &self.kraus {
            return Ok(k.clone());
        }
        let j = self.choi_matrix()?;
        let (values, vectors) = hermitian_eigen(&j, 1e-6)?;
        if values[0] < -DEFAULT_TOL {
            return Err(QvdError::NonPsdChoi {
                min_eigenvalue: values[0],
            });
        }
        let d = self.dim;
        let mut kraus = Vec::new();
        for idx in (0..values.len()).rev() {
            let mu = values[idx];
            if mu <= DEFAULT_TOL {
                continue;
            }
            let v = vectors.column(idx);
            let mut k = zeros(d, d);
            for m in 0..d {
                for i in 0..d {
                    k[(m, i)] = cr(mu.sqrt()) * v[m * d + i];
                }
            }
            kraus.push(k);
        }
        if kraus.is_empty() {
            kraus.push(zeros(d, d));
        }
        Ok(kraus)
    }

    /// A copy with the target representation populated (others retained).
    pub fn convert(&self, target: Representation) -> Result<Self> {
        let mut out = self.clone();
        match target {
            Representation::Kraus => out.kraus = Some(self.kraus_operators()?),
            Representation::Choi => out.choi = Some(self.choi_matrix()?),
            Representation::Liouville => out.liouville = Some(self.liouville_matrix()?),
        }
        Ok(out)
    }

    /// Apply the channel to a matrix, preferring the cheapest representation
    /// at hand.
    pub fn apply(&self, x: &CMatrix) -> Result<CMatrix> {
        let d = self.dim;
        if x.nrows() != d || x.ncols() != d {
            return Err(QvdError::DimensionMismatch {
                context: format!("channel on dim {d} applied to {}x{}", x.nrows(), x.ncols()),
            });
        }
        if let Some(kraus) = &self.kraus {
            let mut out = zeros(d, d);
            for k in kraus {
                out += k * x * dagger(k);
            }
            return Ok(out);
        }
        let l = self.liouville_matrix()?;
        Ok(unvec_col(&(&l * vec_col(x)), d))
    }

    // ---- zoo --------------------------------------------------------------

    pub fn identity_channel(d: usize) -> Self {
        Self::from_kraus(vec![identity(d)]).expect("identity Kraus")
    }

    pub fn unitary(u: CMatrix) -> Result<Self> {
        Self::from_kraus(vec![u])
    }

    /// ρ ↦ (1-p)ρ + p·Tr(ρ)·I/d.
    pub fn depolarizing(d: usize, p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(QvdError::InvalidParameter(format!(
                "depolarizing probability {p} outside [0, 1]"
            )));
        }
        let mut kraus = vec![identity(d).scale((1.0 - p).sqrt())];
        let s = (p / d as f64).sqrt();
        for i in 0..d {
            for j in 0..d {
                let mut e = zeros(d, d);
                e[(i, j)] = cr(s);
                kraus.push(e);
            }
        }
        Self::from_kraus(kraus)
    }

    /// Qubit amplitude damping with decay probability `gamma`.
    pub fn amplitude_damping(gamma: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(QvdError::InvalidParameter(format!(
                "damping rate {gamma} outside [0, 1]"
            )));
        }
        let k0 = CMatrix::from_row_slice(2, 2, &[cr(1.0), czero(), czero(), cr((1.0 - gamma).sqrt())]);
        let k1 = CMatrix::from_row_slice(2, 2, &[czero(), cr(gamma.sqrt()), czero(), czero()]);
        Self::from_kraus(vec![k0, k1])
    }

    /// Qubit bit flip: X applied with probability p.
    pub fn bit_flip(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(QvdError::InvalidParameter(format!(
                "flip probability {p} outside [0, 1]"
            )));
        }
        let k0 = identity(2).scale((1.0 - p).sqrt());
        let k1 = CMatrix::from_row_slice(2, 2, &[czero(), cr(p.sqrt()), cr(p.sqrt()), czero()]);
        Self::from_kraus(vec![k0, k1])
    }
}

/// Reindex a Liouville matrix into the Choi matrix:
/// J[(m·d+i),(n·d+j)] = L[(m+n·d),(i+j·d)].
fn liouville_to_choi(l: &CMatrix, d: usize) -> CMatrix {
    let mut j = zeros(d * d, d * d);
    for m in 0..d {
        for i in 0..d {
            for n in 0..d {
                for jj in 0..d {
                    j[(m * d + i, n * d + jj)] = l[(m + n * d, i + jj * d)];
                }
            }
        }
    }
    j
}

fn choi_to_liouville(j: &CMatrix, d: usize) -> CMatrix {
    let mut l = zeros(d * d, d * d);
    for m in 0..d {
        for i in 0..d {
            for n in 0..d {
                for jj in 0..d {
                    l[(m + n * d, i + jj * d)] = j[(m * d + i, n * d + jj)];
                }
            }
        }
    }
    l
}

/// Partial trace of a matrix on A⊗B (index a·dB + b).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subsystem {
    A,
    B,
}

pub fn partial_trace(m: &CMatrix, dims: (usize, usize), keep: Subsystem) -> Result<CMatrix> {
    let (da, db) = dims;
    let n = da * db;
    if m.nrows() != n || m.ncols() != n {
        return Err(QvdError::DimensionMismatch {
            context: format!("partial trace on {}x{} with dims ({da},{db})", m.nrows(), m.ncols()),
        });
    }
    match keep {
        Subsystem::A => {
            let mut out = zeros(da, da);
            for a1 in 0..da {
                for a2 in 0..da {
                    let mut s = czero();
                    for b in 0..db {
                        s += m[(a1 * db + b, a2 * db + b)];
                    }
                    out[(a1, a2)] = s;
                }
            }
            Ok(out)
        }
        Subsystem::B => {
            let mut out = zeros(db, db);
            for b1 in 0..db {
                for b2 in 0..db {
                    let mut s = czero();
                    for a in 0..da {
                        s += m[(a * db + b1, a * db + b2)];
                    }
                    out[(b1, b2)] = s;
                }
            }
            Ok(out)
        }
    }
}

/// Check complete positivity (Choi PSD) and trace preservation
/// (Tr_out J = I).
pub fn verify_cptp(c: &Channel, tol: f64) -> Result<CptpReport> {
    let j = c.choi_matrix()?;
    let (values, _) = hermitian_eigen(&j, tol.max(1e-6))?;
    let reduced = partial_trace(&j, (c.dim(), c.dim()), Subsystem::B)?;
    let tp_deviation = op_norm(&(reduced - identity(c.dim())));
    Ok(CptpReport {
        min_choi_eigenvalue: values[0],
        tp_deviation,
    })
}

/// Maximum entrywise deviation between the Choi matrices of two channels.
pub fn channel_distance_choi(a: &Channel, b: &Channel) -> Result<f64> {
    Ok(matrix::max_abs_entry(&(a.choi_matrix()? - b.choi_matrix()?)))
}
