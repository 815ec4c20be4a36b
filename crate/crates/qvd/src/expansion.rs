//! Asymptotic-expansion machinery: the γ-deformed commutator, the integer,
//! fractional, and mixed coefficient families, predicted error partial sums,
//! the explicit remainder constant, and empirical order fitting.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{QvdError, Result};
use crate::kernel::{moment_exact, moment_paper, KernelSpec};
use crate::qcore::{trace_norm, CMatrix, DensityOperator};
use crate::statemaps::{derivative_on_identity, marchaud_fd, DirectionBasis, StateMap};

/// [A, B]_γ = AB − e^{iπγ} BA. γ = 0 is the ordinary commutator and γ = 1 the
/// anticommutator.
pub fn deformed_commutator(a: &CMatrix, b: &CMatrix, gamma_order: f64) -> Result<CMatrix> {
    if a.nrows() != b.nrows() || a.ncols() != b.ncols() {
        return Err(QvdError::DimensionMismatch {
            context: "deformed commutator of unequal shapes".into(),
        });
    }
    let phase = Complex64::from_polar(1.0, std::f64::consts::PI * gamma_order);
    Ok(a * b - (b * a).map(|z| z * phase))
}

/// All length-d multi-indices with |α| = j, lexicographic.
pub fn multi_indices(j: usize, d: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current = vec![0usize; d];
    fn rec(out: &mut Vec<Vec<usize>>, current: &mut [usize], pos: usize, remaining: usize, d: usize) {
        if pos == d - 1 {
            current[pos] = remaining;
            out.push(current.to_vec());
            return;
        }
        for v in 0..=remaining {
            current[pos] = v;
            rec(out, current, pos + 1, remaining - v, d);
        }
    }
    rec(&mut out, &mut current, 0, j, d);
    out
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// j! / Π α_i! for |α| = j.
pub fn multinomial(j: usize, alpha: &[usize]) -> f64 {
    factorial(j) / alpha.iter().map(|&a| factorial(a)).product::<f64>()
}

/// Where moments come from: direct quadrature or the published leading-order
/// formula.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MomentSource {
    Exact,
    Paper,
}

fn moment_for(
    spec: &KernelSpec,
    alpha: &[usize],
    delta: f64,
    n: usize,
    source: MomentSource,
) -> Result<f64> {
    match source {
        MomentSource::Exact => Ok(moment_exact(spec, alpha, delta)?.value),
        MomentSource::Paper => Ok(moment_paper(alpha, delta, n, spec.dim)),
    }
}

fn check_spec_dim(spec: &KernelSpec, rho: &DensityOperator) -> Result<()> {
    if spec.dim != rho.dim() {
        return Err(QvdError::DimensionMismatch {
            context: format!("kernel dim {} vs state dim {}", spec.dim, rho.dim()),
        });
    }
    Ok(())
}

/// Integer-order coefficient: (1/j!) Σ_{|α|=j} multinomial · D^α F(ρ) · m_α.
/// Odd j short-circuits to zero for exact moments of the symmetric kernel.
pub fn coeff_a(
    j: usize,
    f: &dyn StateMap,
    rho: &DensityOperator,
    n: usize,
    spec: &KernelSpec,
    source: MomentSource,
) -> Result<CMatrix> {
    check_spec_dim(spec, rho)?;
    let d = rho.dim();
    if source == MomentSource::Exact && spec.q == 1.0 && j % 2 == 1 {
        return Ok(crate::qcore::zeros(d, d));
    }
    let basis = DirectionBasis::from_state(rho);
    let mut acc = crate::qcore::zeros(d, d);
    for alpha in multi_indices(j, d) {
        let m = moment_for(spec, &alpha, 0.0, n, source)?;
        if m == 0.0 {
            continue;
        }
        let deriv = derivative_on_identity(f, rho, &alpha, &basis, false)?;
        acc += deriv.scale(multinomial(j, &alpha) * m);
    }
    Ok(acc.scale(1.0 / factorial(j)))
}

/// Adapter turning ρ ↦ D^α F(ρ) into a map the Marchaud machinery can
/// differentiate. The direction basis stays pinned to the original state.
struct AlphaDerivativeMap<'a> {
    f: &'a dyn StateMap,
    alpha: Vec<usize>,
    basis: DirectionBasis,
}

impl StateMap for AlphaDerivativeMap<'_> {
    fn apply_matrix(&self, x: &CMatrix) -> Result<CMatrix> {
        let state = crate::qcore::make_density(x, 1e-6)?;
        derivative_on_identity(self.f, &state, &self.alpha, &self.basis, false)
    }

    fn regularity(&self) -> (usize, f64) {
        let (m, g) = self.f.regularity();
        (m.saturating_sub(self.alpha.iter().sum()), g)
    }

    fn label(&self) -> String {
        format!("alpha-derivative[{:?}]", self.alpha)
    }

    fn domain(&self) -> crate::statemaps::Domain {
        crate::statemaps::Domain::PositiveSemidefinite
    }
}

/// Fractional coefficient: (1/Γ(γ+1)) Σ_{|α|=j} multinomial · Δ_γ(D^α F)(ρ)
/// · m_{α,γ}, with the Marchaud derivative taken along the centering
/// direction h = ρ − I/d (or a caller-supplied one).
pub fn coeff_b(
    j: usize,
    f: &dyn StateMap,
    rho: &DensityOperator,
    n: usize,
    spec: &KernelSpec,
    gamma_order: f64,
    source: MomentSource,
    direction: Option<&CMatrix>,
) -> Result<CMatrix> {
    check_spec_dim(spec, rho)?;
    let d = rho.dim();
    let default_dir = rho.matrix() - crate::qcore::identity(d).scale(1.0 / d as f64);
    let h = direction.unwrap_or(&default_dir);
    let basis = DirectionBasis::from_state(rho);
    let mut acc = crate::qcore::zeros(d, d);
    for alpha in multi_indices(j, d) {
        let m = moment_for(spec, &alpha, gamma_order, n, source)?;
        if m == 0.0 {
            continue;
        }
        let adapter = AlphaDerivativeMap {
            f,
            alpha: alpha.clone(),
            basis: basis.clone(),
        };
        let frac = marchaud_fd(&adapter, rho, h, gamma_order, None)?;
        acc += frac.value.scale(multinomial(j, &alpha) * m);
    }
    Ok(acc.scale(1.0 / gamma(gamma_order + 1.0)))
}

/// Mixed coefficient: (1/(j!·Γ(2γ+1))) Σ_{|α|+|β|=j} multinomial ·
/// [D^α F, D^β F]_γ · m_{α+β, 2γ}.
pub fn coeff_c(
    j: usize,
    f: &dyn StateMap,
    rho: &DensityOperator,
    n: usize,
    spec: &KernelSpec,
    gamma_order: f64,
    source: MomentSource,
) -> Result<CMatrix> {
    check_spec_dim(spec, rho)?;
    let d = rho.dim();
    let basis = DirectionBasis::from_state(rho);
    let mut derivative_cache: BTreeMap<Vec<usize>, CMatrix> = BTreeMap::new();
    let mut deriv = |alpha: &[usize]| -> Result<CMatrix> {
        if let Some(m) = derivative_cache.get(alpha) {
            return Ok(m.clone());
        }
        let m = derivative_on_identity(f, rho, alpha, &basis, false)?;
        derivative_cache.insert(alpha.to_vec(), m.clone());
        Ok(m)
    };

    let mut acc = crate::qcore::zeros(d, d);
    for i in 0..=j {
        for alpha in multi_indices(i, d) {
            for beta in multi_indices(j - i, d) {
                let combined: Vec<usize> =
                    alpha.iter().zip(&beta).map(|(&a, &b)| a + b).collect();
                let m = moment_for(spec, &combined, 2.0 * gamma_order, n, source)?;
                if m == 0.0 {
                    continue;
                }
                let la = deriv(&alpha)?;
                let lb = deriv(&beta)?;
                let comm = deformed_commutator(&la, &lb, gamma_order)?;
                // j! / (α!·β!): the coefficient of the (α, β) split.
                let coef =
                    factorial(j) / (alpha.iter().chain(&beta).map(|&a| factorial(a)).product::<f64>());
                acc += comm.scale(coef * m);
            }
        }
    }
    Ok(acc.scale(1.0 / (factorial(j) * gamma(2.0 * gamma_order + 1.0))))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExpansionTerm {
    /// "a", "b", or "c".
    pub kind: String,
    pub j: usize,
    /// The power of 1/n this term carries.
    pub exponent: f64,
    /// Trace norm of the scaled contribution coefficient/n^exponent.
    pub norm: f64,
    /// The unscaled coefficient matrix.
    pub matrix: crate::qcore::MatrixJson,
}

#[derive(Debug, Clone)]
pub struct PredictedError {
    pub partial_sum: CMatrix,
    pub terms: Vec<ExpansionTerm>,
}

/// Assemble Σ_j a_j/n^j + Σ_j b_j/n^{j+γ} + Σ_j c_j/n^{j+2γ} with every term
/// retained for reporting. No agreement with the measured error is asserted.
pub fn predicted_error(
    f: &dyn StateMap,
    rho: &DensityOperator,
    n: usize,
    m: usize,
    gamma_order: f64,
    spec: &KernelSpec,
    source: MomentSource,
) -> Result<PredictedError> {
    let d = rho.dim();
    let mut partial_sum = crate::qcore::zeros(d, d);
    let mut terms = Vec::new();
    let nf = n as f64;

    for j in 1..=m {
        let a = coeff_a(j, f, rho, n, spec, source)?;
        let exponent = j as f64;
        let scaled = a.scale(nf.powf(-exponent));
        partial_sum += &scaled;
        terms.push(ExpansionTerm {
            kind: "a".into(),
            j,
            exponent,
            norm: trace_norm(&scaled),
            matrix: crate::qcore::MatrixJson::from(&a),
        });
    }
    for j in 1..=(m / 2) {
        let b = coeff_b(j, f, rho, n, spec, gamma_order, source, None)?;
        let exponent = j as f64 + gamma_order;
        let scaled = b.scale(nf.powf(-exponent));
        partial_sum += &scaled;
        terms.push(ExpansionTerm {
            kind: "b".into(),
            j,
            exponent,
            norm: trace_norm(&scaled),
            matrix: crate::qcore::MatrixJson::from(&b),
        });
    }
    for j in 1..=(m / 3) {
        let c = coeff_c(j, f, rho, n, spec, gamma_order, source)?;
        let exponent = j as f64 + 2.0 * gamma_order;
        let scaled = c.scale(nf.powf(-exponent));
        partial_sum += &scaled;
        terms.push(ExpansionTerm {
            kind: "c".into(),
            j,
            exponent,
            norm: trace_norm(&scaled),
            matrix: crate::qcore::MatrixJson::from(&c),
        });
    }
    Ok(PredictedError { partial_sum, terms })
}

/// The explicit remainder constant
/// 2^{m+3} d^{m/2} e^{π²/4} / Γ(m+γ+1) · (1 + 1/√(2π))^m.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RemainderConstant {
    pub m: usize,
    pub gamma: f64,
    pub d: usize,
    pub value: f64,
}

pub fn remainder_constant(m: usize, gamma_order: f64, d: usize) -> Result<RemainderConstant> {
    if m < 1 || d < 1 || !(0.0 < gamma_order && gamma_order <= 1.0) {
        return Err(QvdError::InvalidParameter(format!(
            "remainder constant needs m >= 1, d >= 1, gamma in (0,1]; got m={m}, gamma={gamma_order}, d={d}"
        )));
    }
    let mf = m as f64;
    let value = 2f64.powf(mf + 3.0) * (d as f64).powf(mf / 2.0)
        * (std::f64::consts::PI.powi(2) / 4.0).exp()
        / gamma(mf + gamma_order + 1.0)
        * (1.0 + 1.0 / (2.0 * std::f64::consts::PI).sqrt()).powf(mf);
    Ok(RemainderConstant {
        m,
        gamma: gamma_order,
        d,
        value,
    })
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct OrderFit {
    /// Slope of log error against log n; the empirical order is its negation.
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    /// Points dropped because the error was zero or negative.
    pub dropped: usize,
}

/// Least-squares fit of log error vs log n.
pub fn order_fit(curve: &[(f64, f64)]) -> Result<OrderFit> {
    let usable: Vec<(f64, f64)> = curve
        .iter()
        .filter(|&&(_, e)| e > 0.0)
        .map(|&(n, e)| (n.ln(), e.ln()))
        .collect();
    let dropped = curve.len() - usable.len();
    if usable.len() < 3 {
        return Err(QvdError::TooFewFitPoints {
            kept: usable.len(),
            dropped,
        });
    }
    let n = usable.len() as f64;
    let sx: f64 = usable.iter().map(|p| p.0).sum();
    let sy: f64 = usable.iter().map(|p| p.1).sum();
    let sxx: f64 = usable.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = usable.iter().map(|p| p.0 * p.1).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    let intercept = (sy - slope * sx) / n;
    let mean_y = sy / n;
    let ss_tot: f64 = usable.iter().map(|p| (p.1 - mean_y).powi(2)).sum();
    let ss_res: f64 = usable
        .iter()
        .map(|p| (p.1 - slope * p.0 - intercept).powi(2))
        .sum();
    let r2 = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Ok(OrderFit {
        slope,
        intercept,
        r2,
        dropped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::matrix::{cr, max_abs_entry};
    use crate::qcore::{diag_state, Channel};
    use crate::statemaps::{LinearChannelMap, PolynomialMap};

    #[test]
    fn deformed_commutator_limits() {
        let a = CMatrix::from_row_slice(2, 2, &[cr(1.0), cr(2.0), cr(0.0), cr(1.0)]);
        let b = CMatrix::from_row_slice(2, 2, &[cr(0.0), cr(1.0), cr(1.0), cr(0.0)]);
        let plain = deformed_commutator(&a, &b, 0.0).unwrap();
        assert!(max_abs_entry(&(&plain - (&a * &b - &b * &a))) < 1e-14);
        let anti = deformed_commutator(&a, &b, 1.0).unwrap();
        assert!(max_abs_entry(&(&anti - (&a * &b + &b * &a))) < 1e-12);
        // A = B gives (1 - e^{iπγ}) A².
        let self_comm = deformed_commutator(&a, &a, 0.5).unwrap();
        let phase = Complex64::new(1.0, -1.0); // 1 - i
        let want = (&a * &a).map(|z| z * phase);
        assert!(max_abs_entry(&(self_comm - want)) < 1e-12);
    }

    #[test]
    fn multinomials() {
        assert_eq!(multinomial(2, &[2, 0]), 1.0);
        assert_eq!(multinomial(2, &[1, 1]), 2.0);
        assert_eq!(multinomial(4, &[2, 2]), 6.0);
        assert_eq!(multi_indices(2, 2).len(), 3);
        assert_eq!(multi_indices(3, 3).len(), 10);
    }

    #[test]
    fn odd_coefficient_vanishes_exactly() {
        let rho = diag_state(&[0.6, 0.4]).unwrap();
        let spec = KernelSpec::for_n(16, 2).unwrap();
        let map = PolynomialMap::new(2);
        let a1 = coeff_a(1, &map, &rho, 16, &spec, MomentSource::Exact).unwrap();
        assert_eq!(max_abs_entry(&a1), 0.0);
    }

    #[test]
    fn linear_map_second_coefficient_vanishes() {
        let rho = diag_state(&[0.6, 0.4]).unwrap();
        let spec = KernelSpec::for_n(16, 2).unwrap();
        let map = LinearChannelMap::new(Channel::depolarizing(2, 0.35).unwrap());
        let a2 = coeff_a(2, &map, &rho, 16, &spec, MomentSource::Exact).unwrap();
        assert!(max_abs_entry(&a2) < 1e-6);
    }

    #[test]
    fn quadratic_coefficient_matches_hand_assembly() {
        let rho = diag_state(&[0.6, 0.4]).unwrap();
        let spec = KernelSpec::new(1.0, 8.0, 2).unwrap();
        let map = PolynomialMap::new(2);
        let a2 = coeff_a(2, &map, &rho, 16, &spec, MomentSource::Exact).unwrap();

        // Hand assembly: (1/2)[2E₀²·m20 + (E₀E₁+E₁E₀)·2·m11 + 2E₁²·m02].
        let basis = DirectionBasis::from_state(&rho);
        let e0 = &basis.projectors()[0];
        let e1 = &basis.projectors()[1];
        let m20 = moment_exact(&spec, &[2, 0], 0.0).unwrap().value;
        let m11 = moment_exact(&spec, &[1, 1], 0.0).unwrap().value;
        let m02 = moment_exact(&spec, &[0, 2], 0.0).unwrap().value;
        // D^{(2,0)}(ρ²) = 2E₀², D^{(1,1)}(ρ²) = E₀E₁+E₁E₀, D^{(0,2)}(ρ²) = 2E₁².
        let want = ((e0 * e0).scale(2.0 * m20)
            + (e0 * e1 + e1 * e0).scale(2.0 * m11)
            + (e1 * e1).scale(2.0 * m02))
        .scale(0.5);
        assert!(max_abs_entry(&(a2 - want)) < 1e-5);
    }

    #[test]
    fn fractional_coefficient_of_linear_map_vanishes() {
        // The first derivative of a linear map is constant in ρ, so its
        // Marchaud derivative vanishes.
        let rho = diag_state(&[0.6, 0.4]).unwrap();
        let spec = KernelSpec::for_n(16, 2).unwrap();
        let map = LinearChannelMap::new(Channel::bit_flip(0.3).unwrap());
        let b1 = coeff_b(1, &map, &rho, 16, &spec, 0.5, MomentSource::Exact, None).unwrap();
        assert!(max_abs_entry(&b1) < 1e-5, "{}", max_abs_entry(&b1));
    }

    #[test]
    fn fractional_coefficient_of_cubic_map_is_nonzero() {
        // Odd-|α| fractional moments vanish by parity, so the first nonzero
        // b_j sits at j = 2; the cubic map's second-derivative maps are
        // linear in ρ, with nonvanishing fractional derivatives.
        let rho = diag_state(&[0.6, 0.4]).unwrap();
        let spec = KernelSpec::for_n(32, 2).unwrap();
        let map = PolynomialMap::new(3);
        let b2 = coeff_b(2, &map, &rho, 32, &spec, 0.5, MomentSource::Exact, None).unwrap();
        assert!(max_abs_entry(&b2) > 1e-4, "{}", max_abs_entry(&b2));
    }

    #[test]
    fn fractional_coefficient_odd_order_vanishes_by_parity() {
        let rho = diag_state(&[0.6, 0.4]).unwrap();
        let spec = KernelSpec::for_n(32, 2).unwrap();
        let map = PolynomialMap::new(2);
        let b1 = coeff_b(1, &map, &rho, 32, &spec, 0.5, MomentSource::Exact, None).unwrap();
        assert!(max_abs_entry(&b1) < 1e-12);
    }

    #[test]
    fn mixed_coefficient_commuting_case() {
        // All derivatives of ρ ↦ ρ² at a diagonal state along eigenprojectors
        // are diagonal, hence commuting: γ = 0 gives ordinary commutators,
        // which vanish.
        let rho = diag_state(&[0.6, 0.4]).unwrap();
        let spec = KernelSpec::for_n(32, 2).unwrap();
        let map = PolynomialMap::new(2);
        // Use a tiny positive gamma stand-in for the moment weight but phase 0.
        let c1 = coeff_c(1, &map, &rho, 32, &spec, 1e-12, MomentSource::Exact).unwrap();
        assert!(max_abs_entry(&c1) < 1e-4, "{}", max_abs_entry(&c1));
    }

    #[test]
    fn remainder_constant_examples() {
        let r = remainder_constant(1, 1.0, 2).unwrap();
        assert!((r.value - 186.6).abs() / 186.6 < 5e-4, "{}", r.value);

        let r1 = remainder_constant(1, 1.0, 1).unwrap();
        assert!((r.value / r1.value - 2f64.sqrt()).abs() < 1e-10);

        // strictly decreasing in gamma
        let lo = remainder_constant(2, 0.3, 2).unwrap().value;
        let hi = remainder_constant(2, 0.9, 2).unwrap().value;
        assert!(hi < lo);
    }

    #[test]
    fn order_fit_recovers_power_laws() {
        let curve: Vec<(f64, f64)> = [8.0, 16.0, 32.0, 64.0]
            .iter()
            .map(|&n: &f64| (n, n.powi(-2)))
            .collect();
        let fit = order_fit(&curve).unwrap();
        assert!((fit.slope + 2.0).abs() < 1e-6);
        assert!((fit.r2 - 1.0).abs() < 1e-12);

        let curve: Vec<(f64, f64)> = [8.0, 16.0, 32.0, 64.0]
            .iter()
            .map(|&n: &f64| (n, 5.0 * n.powf(-1.5)))
            .collect();
        let fit = order_fit(&curve).unwrap();
        assert!((fit.slope + 1.5).abs() < 1e-9);
        assert!((fit.intercept - 5f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn order_fit_drops_nonpositive_points() {
        let curve = vec![(8.0, 0.0), (16.0, 1e-2), (32.0, 1e-3)];
        assert!(matches!(
            order_fit(&curve),
            Err(QvdError::TooFewFitPoints { kept: 2, dropped: 1 })
        ));
    }

    #[test]
    fn predicted_error_of_linear_map_is_negligible() {
        // a₁ vanishes by parity, a₂ by linearity; the prediction collapses.
        let rho = diag_state(&[0.6, 0.4]).unwrap();
        let spec = KernelSpec::for_n(16, 2).unwrap();
        let map = LinearChannelMap::new(Channel::depolarizing(2, 0.2).unwrap());
        let p = predicted_error(&map, &rho, 16, 2, 1.0, &spec, MomentSource::Exact).unwrap();
        assert!(trace_norm(&p.partial_sum) < 1e-5);
        assert_eq!(p.terms.len(), 3); // a1, a2, b1
    }
}
