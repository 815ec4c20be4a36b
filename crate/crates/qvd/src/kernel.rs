//! The tanh-difference density kernel: activation, symmetrized 1-d density,
//! multivariate product kernel, Fourier diagnostics, lattice aliasing, and
//! exact-vs-asymptotic moments.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{QvdError, Result};
use crate::quad;

/// Kernel parameters: deformation q, bandwidth λ, and coordinate dimension d.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub q: f64,
    pub lambda: f64,
    pub dim: usize,
}

impl KernelSpec {
    pub fn new(q: f64, lambda: f64, dim: usize) -> Result<Self> {
        if !(q > 0.0) || !q.is_finite() {
            return Err(QvdError::InvalidParameter(format!("q must be positive, got {q}")));
        }
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(QvdError::InvalidParameter(format!(
                "lambda must be positive, got {lambda}"
            )));
        }
        if dim == 0 {
            return Err(QvdError::InvalidParameter("dim must be at least 1".into()));
        }
        Ok(Self { q, lambda, dim })
    }

    /// Default bandwidth rule λ_n = log n.
    pub fn for_n(n: usize, dim: usize) -> Result<Self> {
        if n < 2 {
            return Err(QvdError::InvalidParameter(format!(
                "bandwidth rule log n needs n >= 2, got {n}"
            )));
        }
        Self::new(1.0, (n as f64).ln(), dim)
    }

    /// Half-width of the certified quadrature window beyond [-1, 1]: the
    /// density decays like e^{-2λ(|x|-1)}, so this leaves tail mass < 1e-14.
    pub fn window_margin(&self) -> f64 {
        f64::max(8.0, 40.0 / self.lambda)
    }
}

/// (e^{λx} - q e^{-λx}) / (e^{λx} + q e^{-λx}), evaluated overflow-safely by
/// factoring out the dominant exponential.
pub fn activation(spec: &KernelSpec, x: f64) -> f64 {
    let (q, l) = (spec.q, spec.lambda);
    if x >= 0.0 {
        let t = q * (-2.0 * l * x).exp();
        (1.0 - t) / (1.0 + t)
    } else {
        let s = (2.0 * l * x).exp();
        (s - q) / (s + q)
    }
}

/// Raw one-dimensional density: a smoothed indicator of [-1, 1] built from the
/// activation difference.
pub fn density1d_raw(spec: &KernelSpec, x: f64) -> f64 {
    0.25 * (activation(spec, x + 1.0) - activation(spec, x - 1.0))
}

/// Symmetrized one-dimensional density: the average of the raw densities at q
/// and 1/q, which is even in x for every q.
pub fn density1d(spec: &KernelSpec, x: f64) -> f64 {
    if spec.q == 1.0 {
        return density1d_raw(spec, x);
    }
    let inv = KernelSpec {
        q: 1.0 / spec.q,
        ..*spec
    };
    0.5 * (density1d_raw(spec, x) + density1d_raw(&inv, x))
}

/// Product kernel over d coordinates.
pub fn kernel_nd(spec: &KernelSpec, x: &[f64]) -> Result<f64> {
    if x.len() != spec.dim {
        return Err(QvdError::DimensionMismatch {
            context: format!("kernel_nd expects {} coordinates, got {}", spec.dim, x.len()),
        });
    }
    Ok(x.iter().map(|&xi| density1d(spec, xi)).product())
}

/// Uniform-panel quadrature of f(x)·density1d(x) over the certified window.
/// `refine` doubles the panel count for error estimation.
fn integrate_against_density<F: Fn(f64) -> f64>(spec: &KernelSpec, refine: usize, f: F) -> Result<f64> {
    let w = spec.window_margin();
    if w > 200.0 {
        return Err(QvdError::QuadratureFailure {
            context: format!("window half-width {w:.1} unattainable at lambda {}", spec.lambda),
        });
    }
    let (a, b) = (-1.0 - w, 1.0 + w);
    // Panels no wider than the kernel transition scale 2/λ.
    let base = ((b - a) / f64::min(0.5, 2.0 / spec.lambda)).ceil() as usize;
    let panels = base * refine;
    Ok(quad::integrate_composite(
        |x| f(x) * density1d(spec, x),
        a,
        b,
        panels,
        12,
    ))
}

/// A kernel moment together with its provenance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MomentValue {
    pub alpha: Vec<usize>,
    pub delta: f64,
    pub value: f64,
    pub quadrature_error_estimate: f64,
}

/// Exact (quadrature) moment ∫ |x|₂^δ x^α Z(x) dx.
///
/// Odd-parity integrands short-circuit to an exact zero when q = 1. Integer
/// moments (δ = 0) are separable and computed per coordinate; fractional
/// moments use a full product grid, capped at d ≤ 3.
pub fn moment_exact(spec: &KernelSpec, alpha: &[usize], delta: f64) -> Result<MomentValue> {
    if alpha.len() != spec.dim {
        return Err(QvdError::DimensionMismatch {
            context: format!(
                "multi-index length {} does not match kernel dim {}",
                alpha.len(),
                spec.dim
            ),
        });
    }
    if delta < 0.0 {
        return Err(QvdError::InvalidParameter(format!("delta must be >= 0, got {delta}")));
    }
    let parity_zero = spec.q == 1.0 && alpha.iter().any(|&a| a % 2 == 1);
    if parity_zero {
        return Ok(MomentValue {
            alpha: alpha.to_vec(),
            delta,
            value: 0.0,
            quadrature_error_estimate: 0.0,
        });
    }
    if delta == 0.0 {
        let mut coarse = 1.0;
        let mut fine = 1.0;
        for &a in alpha {
            coarse *= integrate_against_density(spec, 1, |x| x.powi(a as i32))?;
            fine *= integrate_against_density(spec, 2, |x| x.powi(a as i32))?;
        }
        return Ok(MomentValue {
            alpha: alpha.to_vec(),
            delta,
            value: fine,
            quadrature_error_estimate: (fine - coarse).abs().max(1e-16),
        });
    }
    if spec.dim > 3 {
        return Err(QvdError::CostGuard {
            context: format!("fractional moments limited to d <= 3, got d = {}", spec.dim),
        });
    }
    let coarse = fractional_moment_grid(spec, alpha, delta, 1)?;
    let fine = fractional_moment_grid(spec, alpha, delta, 2)?;
    Ok(MomentValue {
        alpha: alpha.to_vec(),
        delta,
        value: fine,
        quadrature_error_estimate: (fine - coarse).abs().max(1e-16),
    })
}

/// Full product-grid quadrature of |x|₂^δ x^α Z(x). When every α_i is even and
/// q = 1 the integrand is even per coordinate, so the positive orthant is
/// integrated and scaled by 2^d.
fn fractional_moment_grid(spec: &KernelSpec, alpha: &[usize], delta: f64, refine: usize) -> Result<f64> {
    let w = spec.window_margin();
    if w > 200.0 {
        return Err(QvdError::QuadratureFailure {
            context: format!("window half-width {w:.1} unattainable at lambda {}", spec.lambda),
        });
    }
    let hi = 1.0 + w;
    let even_reduce = spec.q == 1.0 && alpha.iter().all(|&a| a % 2 == 0);
    let (lo, symmetry_factor) = if even_reduce {
        (0.0, 2f64.powi(spec.dim as i32))
    } else {
        (-hi, 1.0)
    };
    let panels_base = ((hi - lo) * f64::max(2.0, spec.lambda / 2.0)).ceil() as usize;
    let panels = panels_base.clamp(16, 64) * refine;
    let grid = quad::composite_nodes(lo, hi, panels, 8);

    // Per-axis factor: weight · x^{α_i} · density(x).
    let axes: Vec<Vec<(f64, f64)>> = alpha
        .iter()
        .map(|&a| {
            grid.iter()
                .map(|&(x, wq)| (x, wq * x.powi(a as i32) * density1d(spec, x)))
                .collect()
        })
        .collect();

    let half = 0.5 * delta;
    let total = match spec.dim {
        1 => axes[0]
            .iter()
            .map(|&(x, g)| g * (x * x).powf(half))
            .sum::<f64>(),
        2 => {
            let mut s = 0.0;
            for &(x0, g0) in &axes[0] {
                let r0 = x0 * x0;
                for &(x1, g1) in &axes[1] {
                    s += g0 * g1 * (r0 + x1 * x1).powf(half);
                }
            }
            s
        }
        3 => {
            let mut s = 0.0;
            for &(x0, g0) in &axes[0] {
                let r0 = x0 * x0;
                for &(x1, g1) in &axes[1] {
                    let r01 = r0 + x1 * x1;
                    let g01 = g0 * g1;
                    for &(x2, g2) in &axes[2] {
                        s += g01 * g2 * (r01 + x2 * x2).powf(half);
                    }
                }
            }
            s
        }
        _ => unreachable!("guarded above"),
    };
    Ok(total * symmetry_factor)
}

/// Double factorial (2r-1)!! with (-1)!! = 1.
fn odd_double_factorial(r: usize) -> f64 {
    (1..=r).map(|k| (2 * k - 1) as f64).product()
}

/// The published leading-order moment prediction at bandwidth log n. Returned
/// verbatim for side-by-side reporting; never asserted to match the
/// quadrature value.
pub fn moment_paper(alpha: &[usize], delta: f64, n: usize, d: usize) -> f64 {
    let order: usize = alpha.iter().sum();
    let log_n = (n as f64).ln();
    if delta == 0.0 {
        if order % 2 == 1 {
            return 0.0;
        }
        let r = order / 2;
        let sign = if r % 2 == 0 { 1.0 } else { -1.0 };
        sign / odd_double_factorial(r) * (std::f64::consts::PI / (2.0 * log_n)).powi(r as i32)
    } else {
        let s = order as f64 + delta;
        gamma((s + d as f64) / 2.0) / gamma(d as f64 / 2.0) * (2.0 / log_n).powf(s / 2.0)
    }
}

/// Side-by-side Fourier diagnostic at frequency ξ.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FourierCompare {
    pub xi: Vec<f64>,
    pub numeric: f64,
    pub paper_formula: f64,
    pub deviation: f64,
    pub converged: bool,
}

/// Quadrature transform of the product kernel against the published
/// closed-form prediction. The deviation is reported data, not an assertion.
pub fn fourier_compare(spec: &KernelSpec, xi: &[f64]) -> Result<FourierCompare> {
    if spec.q != 1.0 {
        return Err(QvdError::InvalidParameter(
            "fourier_compare requires q = 1 (symmetric kernel)".into(),
        ));
    }
    let mut numeric = 1.0;
    let mut coarse = 1.0;
    let mut paper = 1.0;
    for &f in xi {
        // Evenness makes the transform real: ∫ cos(ξx) density(x) dx.
        numeric *= integrate_against_density(spec, 2, |x| (f * x).cos())?;
        coarse *= integrate_against_density(spec, 1, |x| (f * x).cos())?;
        let u = std::f64::consts::PI * f / (2.0 * spec.lambda);
        paper *= if u.abs() < 1e-12 {
            1.0
        } else {
            u.sinh() / u / u.cosh()
        };
    }
    Ok(FourierCompare {
        xi: xi.to_vec(),
        numeric,
        paper_formula: paper,
        deviation: (numeric - paper).abs(),
        converged: (numeric - coarse).abs() < 1e-8,
    })
}

/// Lattice alias diagnostic: Σ_{k=-window..window} density1d(y - k).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AliasReport {
    pub sum: f64,
    pub deviation_from_one: f64,
}

pub fn lattice_alias(spec: &KernelSpec, y: f64, window: i64) -> Result<AliasReport> {
    if window < 2 {
        return Err(QvdError::InvalidParameter(format!(
            "alias window must be at least 2, got {window}"
        )));
    }
    let mut sum = 0.0;
    for k in -window..=window {
        sum += density1d(spec, y - k as f64);
    }
    Ok(AliasReport {
        sum,
        deviation_from_one: (sum - 1.0).abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(lambda: f64) -> KernelSpec {
        KernelSpec::new(1.0, lambda, 1).unwrap()
    }

    #[test]
    fn activation_reduces_to_tanh_at_q_one() {
        let s = spec(2.0);
        for x in [-1.5, -0.2, 0.0, 0.3, 4.0] {
            assert!((activation(&s, x) - (2.0 * x).tanh()).abs() < 1e-14);
        }
    }

    #[test]
    fn activation_at_zero_for_general_q() {
        let s = KernelSpec::new(3.0, 1.7, 1).unwrap();
        assert!((activation(&s, 0.0) - (1.0 - 3.0) / (1.0 + 3.0)).abs() < 1e-15);
    }

    #[test]
    fn activation_is_stable_at_large_arguments() {
        let s = spec(1.0);
        // Saturates to exactly 1.0 once e^{-2λx} underflows past f64 precision.
        let v = activation(&s, 50.0);
        assert!(v <= 1.0 && 1.0 - v < 1e-15);
        assert!(activation(&s, -50.0) >= -1.0 && activation(&s, -50.0) + 1.0 < 1e-15);
    }

    #[test]
    fn density_center_value() {
        let s = spec(1.3);
        assert!((density1d(&s, 0.0) - (1.3f64).tanh() / 2.0).abs() < 1e-14);
    }

    #[test]
    fn density_is_even_for_q_one() {
        let s = spec(std::f64::consts::LN_10);
        for x in [0.1, 0.7, 1.3] {
            assert!((density1d(&s, x) - density1d(&s, -x)).abs() < 1e-15);
        }
    }

    #[test]
    fn symmetrized_density_is_even_for_general_q() {
        let s = KernelSpec::new(0.5, 2.0, 1).unwrap();
        for x in [0.2, 0.9, 1.6] {
            assert!((density1d(&s, x) - density1d(&s, -x)).abs() < 1e-14);
        }
    }

    #[test]
    fn density_normalizes_to_one() {
        for lambda in [1.0, 2.0, std::f64::consts::LN_10, 100f64.ln()] {
            let s = spec(lambda);
            let v = integrate_against_density(&s, 1, |_| 1.0).unwrap();
            assert!((v - 1.0).abs() < 1e-8, "lambda {lambda}: {v}");
        }
    }

    #[test]
    fn kernel_nd_matches_hand_value() {
        let s = KernelSpec::new(1.0, 1.0, 2).unwrap();
        let v = kernel_nd(&s, &[0.0, 0.0]).unwrap();
        assert!((v - 0.145006).abs() < 1e-5);
        // evenness per coordinate
        let a = kernel_nd(&s, &[0.4, -0.8]).unwrap();
        let b = kernel_nd(&s, &[-0.4, -0.8]).unwrap();
        assert!((a - b).abs() < 1e-15);
    }

    #[test]
    fn kernel_1d_equals_density() {
        let s = spec(2.5);
        assert_eq!(kernel_nd(&s, &[0.37]).unwrap(), density1d(&s, 0.37));
    }

    #[test]
    fn odd_moments_vanish_exactly() {
        let s = KernelSpec::new(1.0, 3.0, 2).unwrap();
        let m = moment_exact(&s, &[1, 2], 0.0).unwrap();
        assert_eq!(m.value, 0.0);
        assert_eq!(m.quadrature_error_estimate, 0.0);
    }

    #[test]
    fn zeroth_moment_is_one() {
        let s = spec(100f64.ln());
        let m = moment_exact(&s, &[0], 0.0).unwrap();
        assert!((m.value - 1.0).abs() < 1e-8);
    }

    #[test]
    fn second_moment_matches_closed_form() {
        // The kernel is a unit box smoothed by a logistic-type bump, so the
        // second moment is exactly 1/3 + π²/(12λ²).
        for lambda in [5.0, 10.0, 20.0] {
            let s = spec(lambda);
            let m = moment_exact(&s, &[2], 0.0).unwrap();
            let exact = 1.0 / 3.0 + std::f64::consts::PI.powi(2) / (12.0 * lambda * lambda);
            assert!((m.value - exact).abs() < 1e-8, "lambda {lambda}: {}", m.value);
        }
    }

    #[test]
    fn fractional_moment_consistent_with_separable_case() {
        // δ = 2 with α = 0 in d = 1 equals the plain second moment.
        let s = spec(6.0);
        let frac = moment_exact(&s, &[0], 2.0).unwrap();
        let sep = moment_exact(&s, &[2], 0.0).unwrap();
        assert!((frac.value - sep.value).abs() < 1e-7, "{} vs {}", frac.value, sep.value);
    }

    #[test]
    fn fractional_moment_2d_has_small_error_estimate() {
        let s = KernelSpec::new(1.0, 32f64.ln(), 2).unwrap();
        let m = moment_exact(&s, &[0, 0], 0.5).unwrap();
        assert!(m.value > 0.0);
        assert!(m.quadrature_error_estimate < 1e-6 * m.value.max(1.0));
    }

    #[test]
    fn closed_form_moment_examples() {
        assert_eq!(moment_paper(&[3, 0], 0.0, 10, 2), 0.0);
        // With ln n = 2 the |α| = 2 prediction is -π/4 ≈ -0.785398; n = 7 has
        // ln n ≈ 1.9459, so the value sits just below that.
        let v = moment_paper(&[2, 0], 0.0, 7, 2);
        assert!(v < 0.0 && (v + std::f64::consts::PI / (2.0 * 7f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn closed_form_fractional_moment_example() {
        // Γ(1)/Γ(1/2)·(2/ln n)^{1/2} at ln n = 2 is 1/√π ≈ 0.564190.
        let v = gamma(1.0) / gamma(0.5);
        assert!((v - 0.564190).abs() < 1e-6);
    }

    #[test]
    fn fourier_at_zero_is_one() {
        let s = spec(100f64.ln());
        let r = fourier_compare(&s, &[0.0]).unwrap();
        assert!((r.numeric - 1.0).abs() < 1e-8);
        assert!((r.paper_formula - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fourier_is_even_in_xi() {
        let s = spec(100f64.ln());
        let a = fourier_compare(&s, &[1.0]).unwrap();
        let b = fourier_compare(&s, &[-1.0]).unwrap();
        assert!((a.numeric - b.numeric).abs() < 1e-10);
        assert!(a.converged);
    }

    #[test]
    fn alias_sum_is_one_inside_support() {
        let s = spec(50f64.ln());
        let r = lattice_alias(&s, 0.3, 10).unwrap();
        assert!(r.deviation_from_one < 1e-6, "{}", r.deviation_from_one);
    }

    #[test]
    fn alias_deviation_improves_with_bandwidth() {
        let lo = lattice_alias(&spec(2.0), 0.3, 10).unwrap();
        let hi = lattice_alias(&spec(8.0), 0.3, 10).unwrap();
        assert!(hi.deviation_from_one <= lo.deviation_from_one);
    }

    #[test]
    fn alias_window_far_from_mass_flags_zero() {
        let s = spec(4.0);
        let r = lattice_alias(&s, 1000.0, 2).unwrap();
        assert!(r.sum < 1e-10);
        assert!(r.deviation_from_one > 0.999);
    }

    #[test]
    fn alias_window_too_small_is_rejected() {
        let s = spec(4.0);
        assert!(lattice_alias(&s, 0.0, 1).is_err());
    }

    #[test]
    fn cost_guard_on_high_dimensional_fractional_moment() {
        let s = KernelSpec::new(1.0, 3.0, 4).unwrap();
        assert!(matches!(
            moment_exact(&s, &[0, 0, 0, 0], 0.5),
            Err(QvdError::CostGuard { .. })
        ));
    }
}
