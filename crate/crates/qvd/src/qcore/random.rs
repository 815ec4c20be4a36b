//! Seeded random channels and states via a counter-based generator.

use num_complex::Complex64;
use rand_chacha::ChaCha12Rng;
use rand_core::{RngCore, SeedableRng};

use super::channel::Channel;
use super::matrix::{zeros, CMatrix};
use super::state::DensityOperator;
use crate::error::{QvdError, Result};

/// Uniform in (0, 1): top 53 bits of a 64-bit draw, offset to exclude 0.
fn uniform_open(rng: &mut ChaCha12Rng) -> f64 {
    (((rng.next_u64() >> 11) as f64) + 0.5) * (1.0 / 9007199254740992.0)
}

/// One standard complex Gaussian via Box–Muller: the two real draws become the
/// real and imaginary parts (each N(0, 1)).
pub fn complex_gaussian(rng: &mut ChaCha12Rng) -> Complex64 {
    let u1 = uniform_open(rng);
    let u2 = uniform_open(rng);
    let r = (-2.0 * u1.ln()).sqrt();
    let theta = 2.0 * std::f64::consts::PI * u2;
    Complex64::new(r * theta.cos(), r * theta.sin())
}

/// Modified Gram–Schmidt on the columns of `m`, in fixed column order.
fn orthonormalize_columns(m: &mut CMatrix) {
    let cols = m.ncols();
    for j in 0..cols {
        for k in 0..j {
            let proj: Complex64 = (0..m.nrows()).map(|r| m[(r, k)].conj() * m[(r, j)]).sum();
            for r in 0..m.nrows() {
                let mk = m[(r, k)];
                m[(r, j)] -= proj * mk;
            }
        }
        let norm: f64 = (0..m.nrows())
            .map(|r| m[(r, j)].norm_sqr())
            .sum::<f64>()
            .sqrt();
        for r in 0..m.nrows() {
            m[(r, j)] /= Complex64::new(norm, 0.0);
        }
    }
}

/// Haar-style random isometry from d to rank·d, as orthonormalized columns of
/// a seeded complex Gaussian matrix.
fn random_isometry(rows: usize, cols: usize, seed: u64) -> CMatrix {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut m = zeros(rows, cols);
    // Column-major fill so the draw order matches the orthonormalization order.
    for j in 0..cols {
        for i in 0..rows {
            m[(i, j)] = complex_gaussian(&mut rng);
        }
    }
    orthonormalize_columns(&mut m);
    m
}

/// Seeded Haar-style random unitary.
pub fn random_unitary(d: usize, seed: u64) -> CMatrix {
    random_isometry(d, d, seed)
}

/// Random CPTP channel of the given Kraus rank: the Kraus operators are the
/// d×d blocks of a seeded random isometry, so Σ K†K = I by construction.
pub fn random_cptp(d: usize, kraus_rank: usize, seed: u64) -> Result<Channel> {
    if kraus_rank < 1 || kraus_rank > d * d {
        return Err(QvdError::InvalidKrausRank {
            rank: kraus_rank,
            max: d * d,
        });
    }
    let v = random_isometry(kraus_rank * d, d, seed);
    let mut kraus = Vec::with_capacity(kraus_rank);
    for a in 0..kraus_rank {
        let mut k = zeros(d, d);
        for m in 0..d {
            for i in 0..d {
                k[(m, i)] = v[(a * d + m, i)];
            }
        }
        kraus.push(k);
    }
    Channel::from_kraus(kraus)
}

/// Random strictly positive state: a seeded Gaussian matrix G yields
/// GG†/Tr(GG†).
pub fn random_state(d: usize, seed: u64) -> Result<DensityOperator> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut g = zeros(d, d);
    for j in 0..d {
        for i in 0..d {
            g[(i, j)] = complex_gaussian(&mut rng);
        }
    }
    let mut w = &g * g.adjoint();
    // Mix with the identity so the state clears the positivity floor.
    let tr: Complex64 = w.diagonal().iter().sum();
    w = w.scale(0.95 / tr.re) + super::matrix::identity(d).scale(0.05 / d as f64);
    DensityOperator::new(&w, super::matrix::DEFAULT_TOL)
}

/// Random normalized bipartite pure state on C^d ⊗ C^d, as a d²-component
/// column vector.
pub fn random_bipartite_vector(d: usize, rng: &mut ChaCha12Rng) -> CMatrix {
    let mut v = zeros(d * d, 1);
    for i in 0..d * d {
        v[(i, 0)] = complex_gaussian(rng);
    }
    let norm: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if norm == 0.0 {
        v[(0, 0)] = Complex64::new(1.0, 0.0);
        return v;
    }
    v.scale(1.0 / norm)
}

pub fn seeded_rng(seed: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed)
}
