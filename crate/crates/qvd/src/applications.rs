//! Applications of the approximation machinery: Kubo–Ando matrix means,
//! channel geodesic interpolation through Choi matrices, the lattice-operator
//! spline path, Richardson/Romberg acceleration, and the covariance form of
//! the central-limit regime.

use serde::{Deserialize, Serialize};

use crate::error::{QvdError, Result};
use crate::expansion::multi_indices;
use crate::kernel::{moment_exact, KernelSpec};
use crate::qcore::{
    diamond_distance, hermitian_eigen, hermitize, identity, op_norm, partial_trace,
    spectral_apply, trace_norm, CMatrix, Channel, DensityOperator, MatrixJson, Subsystem,
    DEFAULT_TOL, POS_FLOOR,
};
use crate::qnno::{qnno_apply, LambdaRule};
use crate::statemaps::{derivative_on_identity, DirectionBasis, LinearChannelMap, StateMap};

// ---- Kubo–Ando means ---------------------------------------------------------

/// A#_tB = A^{1/2}(A^{-1/2} B A^{-1/2})^t A^{1/2} via the functional calculus.
/// Both arguments must clear the positivity floor; see
/// [`kubo_ando_regularized`] for the εI fallback.
pub fn kubo_ando(a: &CMatrix, b: &CMatrix, t: f64) -> Result<CMatrix> {
    if a.nrows() != b.nrows() || a.ncols() != b.ncols() {
        return Err(QvdError::DimensionMismatch {
            context: "operator mean of unequal shapes".into(),
        });
    }
    if !(0.0..=1.0).contains(&t) {
        return Err(QvdError::InvalidParameter(format!(
            "interpolation parameter {t} outside [0, 1]"
        )));
    }
    let (va, _) = hermitian_eigen(a, 1e-8)?;
    if va[0] < POS_FLOOR {
        return Err(QvdError::SingularMatrix {
            min_eigenvalue: va[0],
        });
    }
    let (vb, _) = hermitian_eigen(b, 1e-8)?;
    if vb[0] < POS_FLOOR {
        return Err(QvdError::SingularMatrix {
            min_eigenvalue: vb[0],
        });
    }
    let a_half = spectral_apply(f64::sqrt, a, 1e-8)?;
    let a_inv_half = spectral_apply(|x| 1.0 / x.sqrt(), a, 1e-8)?;
    let middle = hermitize(&(&a_inv_half * b * &a_inv_half));
    // Rounding can leave eigenvalues a hair below zero; clamp inside 1e-10.
    let powered = spectral_apply(
        move |x| {
            if x < -1e-10 {
                f64::NAN
            } else {
                x.max(0.0).powf(t)
            }
        },
        &middle,
        1e-8,
    )?;
    Ok(hermitize(&(&a_half * powered * &a_half)))
}

/// Kubo–Ando mean of A + εI and B + εI; the recorded ε is returned alongside.
pub fn kubo_ando_regularized(a: &CMatrix, b: &CMatrix, t: f64, eps: f64) -> Result<(CMatrix, f64)> {
    let reg = identity(a.nrows()).scale(eps);
    Ok((kubo_ando(&(a + &reg), &(b + &reg), t)?, eps))
}

// ---- channel interpolation ------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InterpolationResult {
    pub t: f64,
    pub mean_choi: MatrixJson,
    pub tp_deviation: f64,
    pub projected: bool,
    /// Estimated diamond distance to the geodesic point; only the spline path
    /// fills this in.
    pub distance_to_geodesic: Option<f64>,
    /// ε used to regularize rank-deficient Choi matrices, when needed.
    pub regularization_eps: Option<f64>,
    /// Largest least-squares residual of the channel refit (spline path only).
    pub refit_residual: Option<f64>,
    /// Lattice orders used to smooth the endpoints (spline path only).
    pub smoothing_orders: Option<(usize, usize)>,
    /// Set when the refit residual exceeds 1e-6.
    pub refit_flagged: bool,
}

impl InterpolationResult {
    pub fn mean_channel(&self) -> Result<Channel> {
        Channel::from_choi(self.mean_choi.to_matrix()?)
    }
}

const CHOI_REGULARIZATION_EPS: f64 = 1e-8;

/// Kubo–Ando mean of the Choi matrices of two channels. The trace-preserving
/// property is measured, not assumed; `project` restores it exactly by the
/// sandwich normalization J′ = (I ⊗ σ^{-1/2}) J (I ⊗ σ^{-1/2}).
pub fn channel_geomean(c0: &Channel, c1: &Channel, t: f64, project: bool) -> Result<InterpolationResult> {
    if c0.dim() != c1.dim() {
        return Err(QvdError::DimensionMismatch {
            context: format!("geomean of dims {} and {}", c0.dim(), c1.dim()),
        });
    }
    let d = c0.dim();
    let mut j0 = c0.choi_matrix()?;
    let mut j1 = c1.choi_matrix()?;
    let mut regularization_eps = None;
    let min0 = hermitian_eigen(&j0, 1e-8)?.0[0];
    let min1 = hermitian_eigen(&j1, 1e-8)?.0[0];
    if min0 < POS_FLOOR || min1 < POS_FLOOR {
        let reg = identity(d * d).scale(CHOI_REGULARIZATION_EPS);
        j0 += &reg;
        j1 += &reg;
        regularization_eps = Some(CHOI_REGULARIZATION_EPS);
    }
    let mut mean = kubo_ando(&j0, &j1, t)?;
    let sigma = partial_trace(&mean, (d, d), Subsystem::B)?;
    let tp_deviation = op_norm(&(&sigma - identity(d)));
    if project {
        let s = spectral_apply(|x| 1.0 / x.sqrt(), &sigma, 1e-8)?;
        let sandwich = identity(d).kronecker(&s);
        mean = hermitize(&(&sandwich * mean * &sandwich));
    }
    Ok(InterpolationResult {
        t,
        mean_choi: MatrixJson::from(&mean),
        tp_deviation,
        projected: project,
        distance_to_geodesic: None,
        regularization_eps,
        refit_residual: None,
        smoothing_orders: None,
        refit_flagged: false,
    })
}

/// A spanning set of strictly positive states: the standard informationally
/// complete pure family blended with the maximally mixed state, plus seeded
/// random states to overdetermine the refit.
fn probe_states(d: usize, seed: u64) -> Result<Vec<DensityOperator>> {
    let mut pure = Vec::new();
    for i in 0..d {
        let mut v = crate::qcore::zeros(d, 1);
        v[(i, 0)] = crate::qcore::matrix::cr(1.0);
        pure.push(v);
    }
    for i in 0..d {
        for jj in (i + 1)..d {
            let mut v = crate::qcore::zeros(d, 1);
            v[(i, 0)] = crate::qcore::matrix::cr(std::f64::consts::FRAC_1_SQRT_2);
            v[(jj, 0)] = crate::qcore::matrix::cr(std::f64::consts::FRAC_1_SQRT_2);
            pure.push(v.clone());
            v[(jj, 0)] = num_complex::Complex64::new(0.0, std::f64::consts::FRAC_1_SQRT_2);
            pure.push(v);
        }
    }
    let mut states = Vec::with_capacity(2 * d * d);
    for v in pure {
        let proj = &v * v.adjoint();
        let blended = proj.scale(0.8) + identity(d).scale(0.2 / d as f64);
        states.push(DensityOperator::new(&blended, DEFAULT_TOL)?);
    }
    for k in 0..d * d {
        states.push(crate::qcore::random_state(d, seed.wrapping_add(k as u64))?);
    }
    Ok(states)
}

/// Smooth a channel by the lattice operator on a spanning state set and refit
/// a linear map by least squares. Returns the refit channel and the largest
/// per-state residual (trace distance between fit and smoothed output).
pub fn qnno_smooth_channel(c: &Channel, n: usize, seed: u64) -> Result<(Channel, f64)> {
    let d = c.dim();
    let map = LinearChannelMap::new(c.clone());
    let spec = KernelSpec::for_n(n.max(2), d)?;
    let states = probe_states(d, seed)?;
    let cols = states.len();
    let mut xs = crate::qcore::zeros(d * d, cols);
    let mut ys = crate::qcore::zeros(d * d, cols);
    for (k, rho) in states.iter().enumerate() {
        let y = qnno_apply(&map, rho, n.max(2), &spec, true)?;
        xs.set_column(k, &crate::qcore::vec_col(rho.matrix()).column(0));
        ys.set_column(k, &crate::qcore::vec_col(&y).column(0));
    }
    // L = Y X⁺ through the SVD pseudo-inverse.
    let svd = xs.clone().svd(true, true);
    let u = svd.u.as_ref().expect("svd U");
    let vt = svd.v_t.as_ref().expect("svd Vt");
    let rank = svd.singular_values.len();
    let mut sinv = crate::qcore::zeros(rank, rank);
    for i in 0..rank {
        let s = svd.singular_values[i];
        if s > 1e-12 {
            sinv[(i, i)] = crate::qcore::matrix::cr(1.0 / s);
        }
    }
    let pinv = vt.adjoint() * sinv * u.adjoint();
    let liou = &ys * pinv;

    let mut residual = 0.0f64;
    let fitted = &liou * &xs;
    for k in 0..cols {
        let col = (fitted.column(k) - ys.column(k)).into_owned();
        let diff = crate::qcore::unvec_col(&CMatrix::from_column_slice(d * d, 1, col.as_slice()), d);
        residual = residual.max(trace_norm(&diff));
    }
    Ok((Channel::from_liouville(liou)?, residual))
}

/// Geodesic interpolation between lattice-smoothed endpoint channels, with the
/// diamond distance to the unsmoothed geodesic point reported.
pub fn spline_path(c0: &Channel, c1: &Channel, t: f64, seed: u64) -> Result<InterpolationResult> {
    if !(0.0 < t && t < 1.0) {
        return Err(QvdError::InvalidParameter(format!(
            "spline parameter must lie in (0, 1), got {t}"
        )));
    }
    let n0 = ((1.0 / t).round() as usize).max(2);
    let n1 = ((1.0 / (1.0 - t)).round() as usize).max(2);
    let (s0, r0) = qnno_smooth_channel(c0, n0, seed)?;
    let (s1, r1) = qnno_smooth_channel(c1, n1, seed.wrapping_add(1))?;
    let refit_residual = r0.max(r1);

    let mut result = channel_geomean(&s0, &s1, t, true)?;
    let reference = channel_geomean(c0, c1, t, true)?;
    let distance = diamond_distance(
        &result.mean_channel()?,
        &reference.mean_channel()?,
        4,
        seed.wrapping_add(2),
    )?;
    result.distance_to_geodesic = Some(distance);
    result.refit_residual = Some(refit_residual);
    result.smoothing_orders = Some((n0, n1));
    result.refit_flagged = refit_residual > 1e-6;
    Ok(result)
}

// ---- Romberg acceleration ---------------------------------------------------------

#[derive(Debug, Clone)]
pub struct RombergTable {
    pub n0: usize,
    pub k_levels: usize,
    pub m_columns: usize,
    /// entries[k][l] for l ≤ min(k, M).
    pub entries: Vec<Vec<CMatrix>>,
    /// Trace-norm distance of each entry to the reference value.
    pub errors: Vec<Vec<f64>>,
}

/// The Richardson recurrence T[k][l] = (4^l T[k][l-1] − T[k-1][l-1])/(4^l − 1)
/// applied to an injected first column.
pub fn romberg_extrapolate(column0: &[CMatrix], m: usize) -> Vec<Vec<CMatrix>> {
    let mut table: Vec<Vec<CMatrix>> = column0.iter().map(|t| vec![t.clone()]).collect();
    for k in 1..column0.len() {
        for l in 1..=k.min(m) {
            let factor = 4f64.powi(l as i32);
            let next = (table[k][l - 1].scale(factor) - &table[k - 1][l - 1])
                .scale(1.0 / (factor - 1.0));
            table[k].push(next);
        }
    }
    table
}

/// Romberg table of lattice-operator outputs at n_k = 2^k·n0, accelerated by
/// the even-power recurrence, with errors against F(ρ).
pub fn romberg(
    f: &dyn StateMap,
    rho: &DensityOperator,
    n0: usize,
    k_levels: usize,
    m_columns: usize,
    q: f64,
    rule: LambdaRule,
) -> Result<RombergTable> {
    if m_columns < 1 || k_levels < m_columns {
        return Err(QvdError::InvalidParameter(format!(
            "need K >= M >= 1, got K = {k_levels}, M = {m_columns}"
        )));
    }
    let reference = f.evaluate(rho)?;
    let mut column0 = Vec::with_capacity(k_levels + 1);
    for k in 0..=k_levels {
        let n = n0 << k;
        let lambda = rule.lambda_for(n)?;
        let spec = KernelSpec::new(q, lambda, rho.dim())?;
        column0.push(qnno_apply(f, rho, n, &spec, true)?);
    }
    let entries = romberg_extrapolate(&column0, m_columns);
    let errors = entries
        .iter()
        .map(|row| {
            row.iter()
                .map(|t| trace_norm(&(t - &reference)))
                .collect()
        })
        .collect();
    Ok(RombergTable {
        n0,
        k_levels,
        m_columns,
        entries,
        errors,
    })
}

// ---- covariance form -------------------------------------------------------------

/// The covariance bilinear form on the tensor-square space:
/// Σ = Σ_{|α|=2,|β|=2} (D^α F ⊗ D^β F) · Cov(m_α, m_β), with moment
/// covariances from exact quadrature at the given bandwidth.
pub fn qclt_covariance(
    f: &dyn StateMap,
    rho: &DensityOperator,
    n: usize,
    spec: &KernelSpec,
) -> Result<CMatrix> {
    let _ = n;
    let d = rho.dim();
    if spec.dim != d {
        return Err(QvdError::DimensionMismatch {
            context: format!("kernel dim {} vs state dim {d}", spec.dim),
        });
    }
    let basis = DirectionBasis::from_state(rho);
    let indices = multi_indices(2, d);
    let mut derivs = Vec::with_capacity(indices.len());
    let mut moments = Vec::with_capacity(indices.len());
    for alpha in &indices {
        derivs.push(derivative_on_identity(f, rho, alpha, &basis, false)?);
        moments.push(moment_exact(spec, alpha, 0.0)?.value);
    }
    let mut sigma = crate::qcore::zeros(d * d, d * d);
    for (ia, alpha) in indices.iter().enumerate() {
        for (ib, beta) in indices.iter().enumerate() {
            let combined: Vec<usize> = alpha.iter().zip(beta).map(|(&a, &b)| a + b).collect();
            let joint = moment_exact(spec, &combined, 0.0)?.value;
            let cov = joint - moments[ia] * moments[ib];
            if cov == 0.0 {
                continue;
            }
            sigma += derivs[ia].kronecker(&derivs[ib]).scale(cov);
        }
    }
    Ok(sigma)
}
