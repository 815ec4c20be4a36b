//! The simplex lattice, quantized states, kernel weights, and the
//! neural-network-style approximation operator built from them.

use serde::{Deserialize, Serialize};

use crate::error::{QvdError, Result};
use crate::kernel::{density1d, KernelSpec};
use crate::qcore::{trace_norm, CMatrix, DensityOperator};
use crate::statemaps::{DirectionBasis, StateMap};

/// Integer tuples k ≥ 0 of length d with Σk = n, in lexicographic order.
#[derive(Debug, Clone)]
pub struct SimplexLattice {
    pub n: usize,
    pub d: usize,
    pub points: Vec<Vec<usize>>,
}

/// Binomial coefficient in u128, saturating on overflow.
fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k.min(n));
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul((n - i) as u128) / (i as u128 + 1);
    }
    acc
}

/// Enumerate the simplex lattice. Guarded at 10⁷ points.
pub fn simplex_enum(n: usize, d: usize) -> Result<SimplexLattice> {
    if n < 1 || d < 1 {
        return Err(QvdError::InvalidParameter(format!(
            "simplex needs n >= 1 and d >= 1, got n = {n}, d = {d}"
        )));
    }
    let count = binomial(n + d - 1, d - 1);
    if count > 10_000_000 {
        return Err(QvdError::CostGuard {
            context: format!("simplex of order {n} in dimension {d} has {count} points"),
        });
    }
    let mut points = Vec::with_capacity(count as usize);
    let mut current = vec![0usize; d];
    fill(&mut points, &mut current, 0, n, d);
    Ok(SimplexLattice { n, d, points })
}

fn fill(points: &mut Vec<Vec<usize>>, current: &mut [usize], pos: usize, remaining: usize, d: usize) {
    if pos == d - 1 {
        current[pos] = remaining;
        points.push(current.to_vec());
        return;
    }
    for v in 0..=remaining {
        current[pos] = v;
        fill(points, current, pos + 1, remaining - v, d);
    }
}

/// The quantized state Σ (k_j/n) E_j over the eigenprojectors of a reference
/// state.
pub fn quantized_state(n: usize, k: &[usize], basis: &DirectionBasis) -> Result<DensityOperator> {
    let total: usize = k.iter().sum();
    if total != n {
        return Err(QvdError::LatticeSumMismatch {
            got: total,
            expected: n,
        });
    }
    if k.len() != basis.len() {
        return Err(QvdError::DimensionMismatch {
            context: format!("lattice point length {} vs basis size {}", k.len(), basis.len()),
        });
    }
    let d = basis.projectors()[0].nrows();
    let mut m = crate::qcore::zeros(d, d);
    for (j, &kj) in k.iter().enumerate() {
        if kj > 0 {
            m += basis.projectors()[j].scale(kj as f64 / n as f64);
        }
    }
    DensityOperator::new(&m, crate::qcore::DEFAULT_TOL)
}

/// Kernel weights over the simplex lattice.
#[derive(Debug, Clone)]
pub struct QnnoWeights {
    pub lattice: SimplexLattice,
    pub raw: Vec<f64>,
    pub normalized: Vec<f64>,
    pub raw_sum: f64,
}

/// Raw weight Π_i density1d(n·p_i − k_i) per lattice point, optionally
/// renormalized to sum to one. The raw sum is always reported.
pub fn qnno_weights(
    n: usize,
    p: &[f64],
    spec: &KernelSpec,
    renormalize: bool,
) -> Result<QnnoWeights> {
    for (i, &pi) in p.iter().enumerate() {
        if pi <= 0.0 {
            return Err(QvdError::DegenerateSpectrum {
                index: i,
                value: pi,
            });
        }
    }
    let lattice = simplex_enum(n, p.len())?;
    let mut raw = Vec::with_capacity(lattice.points.len());
    for k in &lattice.points {
        let mut w = 1.0;
        for (i, &ki) in k.iter().enumerate() {
            w *= density1d(spec, n as f64 * p[i] - ki as f64);
        }
        raw.push(w);
    }
    let raw_sum: f64 = raw.iter().sum();
    if raw_sum <= 0.0 {
        return Err(QvdError::WeightUnderflow);
    }
    let normalized = if renormalize {
        raw.iter().map(|w| w / raw_sum).collect()
    } else {
        raw.clone()
    };
    Ok(QnnoWeights {
        lattice,
        raw,
        normalized,
        raw_sum,
    })
}

/// Boundary lattice points (some k_j = 0) below this weight are silently
/// dropped for interior-only maps.
const BOUNDARY_DROP_WEIGHT: f64 = 1e-16;

/// The approximation operator: Σ_k w_k F(ρ_{n,k}), with weights evaluated at
/// the spectrum of ρ (descending, paired with the eigenprojectors).
pub fn qnno_apply(
    f: &dyn StateMap,
    rho: &DensityOperator,
    n: usize,
    spec: &KernelSpec,
    renormalize: bool,
) -> Result<CMatrix> {
    if !rho.is_strictly_positive() {
        return Err(QvdError::NotPositive {
            min_eigenvalue: rho.min_eigenvalue(),
            tol: crate::qcore::POS_FLOOR,
        });
    }
    let p: Vec<f64> = rho.spectrum_descending().iter().map(|&(v, _)| v).collect();
    let basis = DirectionBasis::from_state(rho);
    let weights = qnno_weights(n, &p, spec, renormalize)?;

    // Interior-only maps cannot see boundary lattice states; negligible-weight
    // boundary points are dropped and the survivors renormalized.
    let mut keep: Vec<(usize, f64)> = Vec::with_capacity(weights.lattice.points.len());
    for (idx, k) in weights.lattice.points.iter().enumerate() {
        let w = weights.normalized[idx];
        if f.interior_only() && k.iter().any(|&ki| ki == 0) {
            if w.abs() < BOUNDARY_DROP_WEIGHT {
                continue;
            }
            return Err(QvdError::BoundaryState { weight: w });
        }
        keep.push((idx, w));
    }
    let mut scale = 1.0;
    if renormalize {
        let kept_sum: f64 = keep.iter().map(|&(_, w)| w).sum();
        if kept_sum <= 0.0 {
            return Err(QvdError::WeightUnderflow);
        }
        scale = 1.0 / kept_sum;
    }

    let d = rho.dim();
    let mut out = crate::qcore::zeros(d, d);
    for &(idx, w) in &keep {
        if w == 0.0 {
            continue;
        }
        let state = quantized_state(n, &weights.lattice.points[idx], &basis)?;
        out += f.evaluate(&state)?.scale(w * scale);
    }
    Ok(out)
}

/// Trace-norm approximation error ‖Ψ_n(F)(ρ) − F(ρ)‖₁.
pub fn approx_error(
    f: &dyn StateMap,
    rho: &DensityOperator,
    n: usize,
    spec: &KernelSpec,
    renormalize: bool,
) -> Result<f64> {
    let approx = qnno_apply(f, rho, n, spec, renormalize)?;
    let target = f.evaluate(rho)?;
    Ok(trace_norm(&(approx - target)))
}

/// Bandwidth selection rule for the error curve.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LambdaRule {
    LogN,
    Fixed { value: f64 },
}

impl Default for LambdaRule {
    fn default() -> Self {
        LambdaRule::LogN
    }
}

impl LambdaRule {
    pub fn lambda_for(&self, n: usize) -> Result<f64> {
        match self {
            LambdaRule::LogN => {
                if n < 2 {
                    return Err(QvdError::InvalidParameter(format!(
                        "log-n bandwidth needs n >= 2, got {n}"
                    )));
                }
                Ok((n as f64).ln())
            }
            LambdaRule::Fixed { value } => {
                if *value <= 0.0 {
                    return Err(QvdError::InvalidParameter(format!(
                        "fixed bandwidth must be positive, got {value}"
                    )));
                }
                Ok(*value)
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurveRow {
    pub n: usize,
    pub lambda: f64,
    pub error_trace_norm: f64,
    pub raw_weight_sum: f64,
}

/// One approximation error per n, with the bandwidth chosen by `rule`.
pub fn error_curve(
    f: &dyn StateMap,
    rho: &DensityOperator,
    n_list: &[usize],
    q: f64,
    rule: LambdaRule,
    renormalize: bool,
) -> Result<Vec<CurveRow>> {
    let mut rows = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let lambda = rule.lambda_for(n)?;
        let spec = KernelSpec::new(q, lambda, rho.dim())?;
        let p: Vec<f64> = rho.spectrum_descending().iter().map(|&(v, _)| v).collect();
        let raw_weight_sum = qnno_weights(n, &p, &spec, renormalize)?.raw_sum;
        let error_trace_norm = approx_error(f, rho, n, &spec, renormalize)?;
        rows.push(CurveRow {
            n,
            lambda,
            error_trace_norm,
            raw_weight_sum,
        });
    }
    Ok(rows)
}
