//! Diamond-distance estimation by alternating ascent over bipartite pure
//! states, bracketed by the Choi trace-norm sandwich.

use super::channel::Channel;
use super::matrix::{
    cr, dagger, hermitian_eigen, hermitize, trace_norm, unvec_col, zeros, CMatrix,
};
use super::random::{random_bipartite_vector, seeded_rng};
use crate::error::{QvdError, Result};

/// Apply a map given by its Liouville matrix to the A factor of a matrix on
/// A⊗B: X = Σ E_ac ⊗ B_ac maps to Σ Δ(E_ac) ⊗ B_ac.
fn apply_to_first_factor(liou: &CMatrix, x: &CMatrix, d: usize) -> CMatrix {
    let n = d * d;
    let mut out = zeros(n, n);
    for a in 0..d {
        for c in 0..d {
            // Δ(E_ac) is column a + c·d of the Liouville matrix, unvectorized.
            let col = liou.column(a + c * d).into_owned();
            let delta_e = unvec_col(&CMatrix::from_column_slice(n, 1, col.as_slice()), d);
            for b in 0..d {
                for e in 0..d {
                    let xbe = x[(a * d + b, c * d + e)];
                    if xbe.norm_sqr() == 0.0 {
                        continue;
                    }
                    for m in 0..d {
                        for nn in 0..d {
                            out[(m * d + b, nn * d + e)] += delta_e[(m, nn)] * xbe;
                        }
                    }
                }
            }
        }
    }
    out
}

/// One ascent from a starting bipartite vector. Alternates between the optimal
/// dual unitary (from the SVD of the output) and the optimal input state (top
/// eigenvector of the Hermitian part of the adjoint image of that unitary).
fn ascend(
    liou: &CMatrix,
    liou_adj: &CMatrix,
    d: usize,
    start: &CMatrix,
    iterations: usize,
) -> f64 {
    let mut psi = start.clone();
    let mut best = 0.0f64;
    for _ in 0..iterations {
        let rho = &psi * dagger(&psi);
        let out = apply_to_first_factor(liou, &rho, d);
        let svd = out.clone().svd(true, true);
        let value: f64 = svd.singular_values.iter().sum();
        if value > best {
            best = value;
        }
        // Optimal U for the trace norm: with out = W Σ V†, Tr(U out) is
        // maximized at U = V W†.
        let w = svd.u.as_ref().expect("svd U");
        let vt = svd.v_t.as_ref().expect("svd Vt");
        let u = dagger(vt) * dagger(w);
        // Pull U back through the adjoint map and take the top eigenvector of
        // the Hermitian part as the next input state.
        let back = hermitize(&apply_to_first_factor(liou_adj, &u, d));
        match hermitian_eigen(&back, 1e-8) {
            Ok((_, vectors)) => {
                let top = vectors.column(vectors.ncols() - 1).into_owned();
                psi = CMatrix::from_column_slice(d * d, 1, top.as_slice());
            }
            Err(_) => break,
        }
    }
    best
}

/// Estimate the diamond distance between two channels by multi-restart
/// alternating ascent. The maximally entangled start is always included, which
/// pins the result to at least ‖J(Δ)‖₁/d; the exact value is at most ‖J(Δ)‖₁.
pub fn diamond_distance(c1: &Channel, c2: &Channel, restarts: usize, seed: u64) -> Result<f64> {
    let d = c1.dim();
    if c2.dim() != d {
        return Err(QvdError::DimensionMismatch {
            context: format!("diamond distance between dims {d} and {}", c2.dim()),
        });
    }
    let liou = c1.liouville_matrix()? - c2.liouville_matrix()?;
    let liou_adj = dagger(&liou);

    // Maximally entangled start: Σ|ii⟩/√d.
    let mut omega = zeros(d * d, 1);
    for i in 0..d {
        omega[(i * d + i, 0)] = cr(1.0 / (d as f64).sqrt());
    }
    let mut best = ascend(&liou, &liou_adj, d, &omega, 30);

    let mut rng = seeded_rng(seed);
    for _ in 0..restarts {
        let start = random_bipartite_vector(d, &mut rng);
        let value = ascend(&liou, &liou_adj, d, &start, 30);
        if value > best {
            best = value;
        }
    }
    Ok(best)
}

/// The trace-norm sandwich for the diamond distance: the exact value lies in
/// [‖J(Δ)‖₁/d, ‖J(Δ)‖₁].
pub fn diamond_sandwich(c1: &Channel, c2: &Channel) -> Result<(f64, f64)> {
    let j = c1.choi_matrix()? - c2.choi_matrix()?;
    let tn = trace_norm(&j);
    Ok((tn / c1.dim() as f64, tn))
}

/// Brute-force lower bound: the best of `samples` random bipartite pure
/// states. Used as the acceptance oracle at small dimension.
pub fn diamond_brute_force(c1: &Channel, c2: &Channel, samples: usize, seed: u64) -> Result<f64> {
    let d = c1.dim();
    if c2.dim() != d {
        return Err(QvdError::DimensionMismatch {
            context: "brute-force diamond distance".into(),
        });
    }
    let liou = c1.liouville_matrix()? - c2.liouville_matrix()?;
    let mut rng = seeded_rng(seed);
    let mut best = 0.0f64;
    for _ in 0..samples {
        let psi = random_bipartite_vector(d, &mut rng);
        let rho = &psi * dagger(&psi);
        let out = apply_to_first_factor(&liou, &rho, d);
        let value = trace_norm(&out);
        if value > best {
            best = value;
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_channels_have_zero_distance() {
        let c = Channel::amplitude_damping(0.3).unwrap();
        let v = diamond_distance(&c, &c, 3, 1).unwrap();
        assert!(v.abs() < 1e-10);
    }

    #[test]
    fn identity_vs_depolarizing_matches_known_value() {
        let id = Channel::identity_channel(2);
        let dep = Channel::depolarizing(2, 0.2).unwrap();
        let v = diamond_distance(&id, &dep, 8, 11).unwrap();
        assert!((v - 0.300).abs() < 0.005, "got {v}");
        let (lo, hi) = diamond_sandwich(&id, &dep).unwrap();
        assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
    }

    #[test]
    fn value_stays_in_sandwich_for_random_pairs() {
        for seed in 0..5u64 {
            let a = crate::qcore::random::random_cptp(2, 2, seed).unwrap();
            let b = crate::qcore::random::random_cptp(2, 3, seed + 100).unwrap();
            let v = diamond_distance(&a, &b, 4, seed).unwrap();
            let (lo, hi) = diamond_sandwich(&a, &b).unwrap();
            assert!(v >= lo - 1e-12 && v <= hi + 1e-12, "seed {seed}");
        }
    }

    #[test]
    fn restarts_are_monotone() {
        let a = crate::qcore::random::random_cptp(2, 2, 3).unwrap();
        let b = crate::qcore::random::random_cptp(2, 3, 17).unwrap();
        let mut prev = 0.0;
        for restarts in [0, 2, 5, 10] {
            let v = diamond_distance(&a, &b, restarts, 9).unwrap();
            assert!(v >= prev - 1e-12);
            prev = v;
        }
    }
}
