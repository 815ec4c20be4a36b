//! Property tests for the documented invariants of every module, mixing
//! seeded sweeps with proptest-generated inputs.

use std::sync::Arc;

use proptest::prelude::*;

use qvd::applications::{kubo_ando, qclt_covariance, romberg_extrapolate};
use qvd::error::QvdError;
use qvd::expansion::{coeff_a, coeff_b, multi_indices, multinomial, MomentSource};
use qvd::kernel::{density1d, lattice_alias, moment_exact, KernelSpec};
use qvd::qcore::matrix::{cr, hermiticity_deviation, max_abs_entry};
use qvd::qcore::{
    diag_state, diamond_distance, hermitian_eigen, identity, partial_trace, random_cptp,
    random_state, schatten_norm, spectral_apply, trace_norm, CMatrix, Channel, DensityOperator,
    Representation, SchattenP, Subsystem,
};
use qvd::qnno::{approx_error, qnno_apply, qnno_weights, simplex_enum, LambdaRule};
use qvd::statemaps::{
    frechet_fd, marchaud_fd, DirectionBasis, HolderTestMap, LinearChannelMap, PolynomialMap,
    ScaledCompositeMap, SpectralFunctionMap, StateMap,
};

fn zoo(d: usize) -> Vec<Channel> {
    let mut v = vec![
        Channel::identity_channel(d),
        Channel::depolarizing(d, 0.3).unwrap(),
    ];
    if d == 2 {
        v.push(Channel::amplitude_damping(0.36).unwrap());
        v.push(Channel::bit_flip(0.25).unwrap());
    }
    v
}

// ---- qcore -------------------------------------------------------------------

#[test]
fn representation_round_trips_for_100_seeded_channels() {
    for seed in 0..100u64 {
        let d = 2 + (seed % 2) as usize;
        let rank = 1 + (seed % (d * d) as u64) as usize;
        let c = random_cptp(d, rank, seed).unwrap();
        let via_liou = c
            .convert(Representation::Liouville)
            .unwrap()
            .convert(Representation::Choi)
            .unwrap();
        let via_kraus = c
            .convert(Representation::Kraus)
            .unwrap()
            .convert(Representation::Choi)
            .unwrap();
        let j = c.choi_matrix().unwrap();
        assert!(max_abs_entry(&(via_liou.choi_matrix().unwrap() - &j)) < 1e-10, "seed {seed}");
        assert!(max_abs_entry(&(via_kraus.choi_matrix().unwrap() - &j)) < 1e-10, "seed {seed}");
    }
}

#[test]
fn kraus_and_liouville_application_agree() {
    for seed in 0..20u64 {
        let c = random_cptp(3, 4, seed).unwrap();
        let rho = random_state(3, seed + 50).unwrap();
        let via_kraus = c
            .convert(Representation::Kraus)
            .unwrap()
            .apply(rho.matrix())
            .unwrap();
        let via_liou = c
            .convert(Representation::Liouville)
            .unwrap()
            .apply(rho.matrix())
            .unwrap();
        assert!(max_abs_entry(&(via_kraus - via_liou)) < 1e-10);
    }
}

#[test]
fn diamond_distance_is_a_pseudometric_on_samples() {
    for seed in 0..3u64 {
        let a = random_cptp(2, 2, seed).unwrap();
        let b = random_cptp(2, 3, seed + 10).unwrap();
        let c = random_cptp(2, 2, seed + 20).unwrap();
        let dab = diamond_distance(&a, &b, 4, 1).unwrap();
        let dba = diamond_distance(&b, &a, 4, 1).unwrap();
        assert!((dab - dba).abs() < 0.01, "symmetry: {dab} vs {dba}");
        let dac = diamond_distance(&a, &c, 4, 1).unwrap();
        let dbc = diamond_distance(&b, &c, 4, 1).unwrap();
        assert!(dac <= dab + dbc + 0.02, "triangle: {dac} > {dab} + {dbc}");
    }
}

#[test]
fn choi_partial_trace_is_identity_for_zoo() {
    for d in [2usize, 3] {
        for c in zoo(d) {
            let j = c.choi_matrix().unwrap();
            let tr_out = partial_trace(&j, (d, d), Subsystem::B).unwrap();
            assert!(max_abs_entry(&(tr_out - identity(d))) < 1e-9);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn schatten_norms_are_ordered(entries in proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 9)) {
        let m = CMatrix::from_iterator(3, 3, entries.iter().map(|&(re, im)| num_complex::Complex64::new(re, im)));
        let one = schatten_norm(&m, SchattenP::One);
        let two = schatten_norm(&m, SchattenP::Two);
        let inf = schatten_norm(&m, SchattenP::Inf);
        prop_assert!(one >= two - 1e-12);
        prop_assert!(two >= inf - 1e-12);
    }

    #[test]
    fn multinomial_coefficients_sum_to_power(j in 1usize..5, d in 1usize..4) {
        let total: f64 = multi_indices(j, d).iter().map(|a| multinomial(j, a)).sum();
        prop_assert!((total - (d as f64).powi(j as i32)).abs() < 1e-9);
    }

    #[test]
    fn density_is_nonnegative(x in -5.0f64..5.0, qi in 0usize..3) {
        let q = [0.5, 1.0, 2.0][qi];
        let spec = KernelSpec::new(q, 2.0, 1).unwrap();
        prop_assert!(density1d(&spec, x) >= 0.0);
    }
}

// ---- kernel -----------------------------------------------------------------

#[test]
fn density_positive_on_dense_grid() {
    for q in [0.5, 1.0, 2.0] {
        let spec = KernelSpec::new(q, 3.0, 1).unwrap();
        for i in 0..10_000 {
            let x = -5.0 + 10.0 * (i as f64) / 9_999.0;
            assert!(density1d(&spec, x) >= 0.0, "q = {q}, x = {x}");
        }
    }
}

#[test]
fn quadrature_error_estimates_are_tight() {
    let spec = KernelSpec::new(1.0, 3.0, 2).unwrap();
    for alpha in [[2, 0], [2, 2], [4, 0]] {
        let m = moment_exact(&spec, &alpha, 0.0).unwrap();
        assert!(m.quadrature_error_estimate < 1e-10, "{alpha:?}: {}", m.quadrature_error_estimate);
    }
}

#[test]
fn alias_deviation_decays_with_n() {
    let mut prev = f64::INFINITY;
    for n in [16usize, 32, 64, 128] {
        let spec = KernelSpec::for_n(n, 1).unwrap();
        let dev = lattice_alias(&spec, 0.3, 40).unwrap().deviation_from_one;
        // Decay until the rounding floor.
        assert!(dev <= prev + 1e-12, "n = {n}: {dev} > {prev}");
        prev = dev.max(1e-14);
    }
}

#[test]
fn moment_cost_guard_is_a_diagnostic_not_a_crash() {
    let spec = KernelSpec::new(1.0, 2.0, 4).unwrap();
    match moment_exact(&spec, &[2, 0, 0, 0], 0.5) {
        Err(QvdError::CostGuard { .. }) => {}
        other => panic!("expected cost-guard diagnostic, got {other:?}"),
    }
}

// ---- statemaps ---------------------------------------------------------------

#[test]
fn frechet_is_multilinear_and_symmetric() {
    let rho = diag_state(&[0.55, 0.45]).unwrap();
    let map = SpectralFunctionMap::by_name("exp").unwrap();
    let basis = DirectionBasis::from_state(&rho);
    let h1 = basis.projectors()[0].clone() - basis.projectors()[1].clone();
    let h2 = basis.projectors()[0].clone();
    // Homogeneity.
    let base = frechet_fd(&map, &rho, &[h1.clone(), h2.clone()]).unwrap();
    let scaled = frechet_fd(&map, &rho, &[h1.scale(2.0), h2.clone()]).unwrap();
    assert!(max_abs_entry(&(scaled - base.scale(2.0))) < 1e-5);
    // Additivity.
    let sum_dir = frechet_fd(&map, &rho, &[&h1 + &h2, h2.clone()]).unwrap();
    let split = frechet_fd(&map, &rho, &[h1.clone(), h2.clone()]).unwrap()
        + frechet_fd(&map, &rho, &[h2.clone(), h2.clone()]).unwrap();
    assert!(max_abs_entry(&(sum_dir - split)) < 1e-5);
    // Symmetry in the directions.
    let ab = frechet_fd(&map, &rho, &[h1.clone(), h2.clone()]).unwrap();
    let ba = frechet_fd(&map, &rho, &[h2, h1]).unwrap();
    assert!(max_abs_entry(&(ab - ba)) < 1e-6);
}

#[test]
fn zoo_channels_have_vanishing_higher_derivatives() {
    for d in [2usize, 3] {
        for c in zoo(d) {
            let map = LinearChannelMap::new(c);
            let rho = random_state(d, 3).unwrap();
            let basis = DirectionBasis::from_state(&rho);
            let h = basis.projectors()[0].clone() - basis.projectors()[d - 1].clone();
            let d2 = frechet_fd(&map, &rho, &[h.clone(), h.clone()]).unwrap();
            let d3 = frechet_fd(&map, &rho, &[h.clone(), h.clone(), h]).unwrap();
            assert!(trace_norm(&d2) < 1e-6);
            assert!(trace_norm(&d3) < 1e-6);
        }
    }
}

#[test]
fn marchaud_is_linear_in_the_map() {
    let rho = diag_state(&[0.6, 0.4]).unwrap();
    let basis = DirectionBasis::from_state(&rho);
    let h = basis.projectors()[0].clone() - basis.projectors()[1].clone();
    let f: Arc<dyn StateMap> = Arc::new(PolynomialMap::new(2));
    let g: Arc<dyn StateMap> = Arc::new(SpectralFunctionMap::by_name("exp").unwrap());
    let combo = ScaledCompositeMap::sum(vec![(2.0, f.clone()), (-0.5, g.clone())]);
    let lhs = marchaud_fd(&combo, &rho, &h, 0.5, None).unwrap().value;
    let rhs = marchaud_fd(f.as_ref(), &rho, &h, 0.5, None).unwrap().value.scale(2.0)
        + marchaud_fd(g.as_ref(), &rho, &h, 0.5, None).unwrap().value.scale(-0.5);
    assert!(max_abs_entry(&(lhs - rhs)) < 1e-6);
}

#[test]
fn holder_seminorm_stays_bounded() {
    let gamma = 0.5;
    let center = identity(2).scale(0.5);
    let map = HolderTestMap::new(gamma, center).unwrap();
    let mut running_max = 0.0f64;
    for seed in 0..1000u64 {
        let a = random_state(2, seed).unwrap();
        let b = random_state(2, seed + 5000).unwrap();
        let num = trace_norm(&(map.evaluate(&a).unwrap() - map.evaluate(&b).unwrap()));
        let den = trace_norm(&(a.matrix() - b.matrix())).powf(gamma);
        if den > 1e-12 {
            running_max = running_max.max(num / den);
        }
    }
    println!("empirical Hölder seminorm over 1000 pairs: {running_max:.6}");
    assert!(running_max < 10.0);
}

// ---- qnno -------------------------------------------------------------------

#[test]
fn qnno_outputs_valid_states_for_linear_cptp_maps() {
    for d in [2usize, 3] {
        for (i, c) in zoo(d).into_iter().enumerate() {
            let map = LinearChannelMap::new(c);
            let rho = random_state(d, 60 + i as u64).unwrap();
            for n in [3usize, 6] {
                let spec = KernelSpec::new(1.0, 5.0, d).unwrap();
                let out = qnno_apply(&map, &rho, n, &spec, true).unwrap();
                let (values, _) = hermitian_eigen(&out, 1e-8).unwrap();
                assert!(values[0] > -1e-10);
                let tr: f64 = out.diagonal().iter().map(|z| z.re).sum();
                assert!((tr - 1.0).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn qnno_commutes_with_convex_combinations() {
    let rho = diag_state(&[0.6, 0.4]).unwrap();
    let spec = KernelSpec::for_n(8, 2).unwrap();
    let f: Arc<dyn StateMap> = Arc::new(PolynomialMap::new(2));
    let g: Arc<dyn StateMap> = Arc::new(LinearChannelMap::new(Channel::bit_flip(0.3).unwrap()));
    let combo = ScaledCompositeMap::sum(vec![(0.3, f.clone()), (0.7, g.clone())]);
    let lhs = qnno_apply(&combo, &rho, 8, &spec, true).unwrap();
    let rhs = qnno_apply(f.as_ref(), &rho, 8, &spec, true).unwrap().scale(0.3)
        + qnno_apply(g.as_ref(), &rho, 8, &spec, true).unwrap().scale(0.7);
    assert!(max_abs_entry(&(lhs - rhs)) < 1e-12);
}

#[test]
fn qnno_is_equivariant_under_basis_relabeling() {
    // Conjugating ρ by a permutation conjugates the output (the weights see
    // only the spectrum).
    let d = 3;
    let mut p = qvd::qcore::zeros(d, d);
    p[(0, 1)] = cr(1.0);
    p[(1, 2)] = cr(1.0);
    p[(2, 0)] = cr(1.0);
    let rho = diag_state(&[0.5, 0.3, 0.2]).unwrap();
    let permuted =
        DensityOperator::new(&(&p * rho.matrix() * p.adjoint()), 1e-9).unwrap();
    let map = PolynomialMap::new(2);
    let spec = KernelSpec::for_n(6, d).unwrap();
    let base = qnno_apply(&map, &rho, 6, &spec, true).unwrap();
    let moved = qnno_apply(&map, &permuted, 6, &spec, true).unwrap();
    assert!(max_abs_entry(&(moved - &p * base * p.adjoint())) < 1e-13);
}

#[test]
fn qnno_weights_concentrate_on_exact_lattice_points() {
    // Documented-red invariant: with the spectrum exactly on the lattice the
    // stated expectation is w_{k*} > 0.99 at λ ∈ {8, 16}. The kernel box has
    // density 1/4 exactly at offset ±1 for any λ, so the two adjacent simplex
    // points keep ~1/16 raw weight each and w_{k*} saturates near
    // 1/4 / (1/4 + 2/16) = 2/3. Asserted as stated; fails by construction.
    let p = [0.75, 0.25];
    let k_star = [3usize, 1];
    for lambda in [8.0, 16.0] {
        let spec = KernelSpec::new(1.0, lambda, 2).unwrap();
        let w = qnno_weights(4, &p, &spec, true).unwrap();
        let idx = w
            .lattice
            .points
            .iter()
            .position(|k| k.as_slice() == k_star)
            .unwrap();
        let concentration = w.normalized[idx];
        println!("λ = {lambda}: w_k* = {concentration:.6}");
        assert!(
            concentration > 0.99,
            "λ = {lambda}: w_k* = {concentration:.6} (saturates near 2/3; see note above)"
        );
    }
}

#[test]
fn linear_map_error_identity() {
    // approx_error(Φ) = ‖Φ(δ)‖₁ with δ the weighted-state defect.
    let rho = diag_state(&[0.6, 0.4]).unwrap();
    let c = Channel::depolarizing(2, 0.3).unwrap();
    let map = LinearChannelMap::new(c.clone());
    let spec = KernelSpec::for_n(8, 2).unwrap();
    let err = approx_error(&map, &rho, 8, &spec, true).unwrap();
    // Rebuild δ from the weights and lattice states.
    let basis = DirectionBasis::from_state(&rho);
    let spectrum: Vec<f64> = rho.spectrum_descending().iter().map(|&(v, _)| v).collect();
    let w = qnno_weights(8, &spectrum, &spec, true).unwrap();
    let mut delta = qvd::qcore::zeros(2, 2) - rho.matrix();
    for (k, point) in w.lattice.points.iter().enumerate() {
        let state = qvd::qnno::quantized_state(8, point, &basis).unwrap();
        delta += state.matrix().scale(w.normalized[k]);
    }
    let expected = trace_norm(&c.apply(&delta).unwrap());
    assert!((err - expected).abs() < 1e-12, "{err} vs {expected}");
}

#[test]
fn simplex_enumeration_is_lexicographic_and_complete() {
    let lat = simplex_enum(4, 3).unwrap();
    assert_eq!(lat.points.len(), 15);
    for w in lat.points.windows(2) {
        assert!(w[0] < w[1], "not lexicographic: {:?} {:?}", w[0], w[1]);
    }
    assert!(lat.points.iter().all(|k| k.iter().sum::<usize>() == 4));
}

// ---- expansion ---------------------------------------------------------------

#[test]
fn odd_coefficients_annihilate_exactly() {
    let rho = diag_state(&[0.6, 0.4]).unwrap();
    let spec = KernelSpec::for_n(16, 2).unwrap();
    let map = SpectralFunctionMap::by_name("exp").unwrap();
    for j in [1usize, 3] {
        let a = coeff_a(j, &map, &rho, 16, &spec, MomentSource::Exact).unwrap();
        assert_eq!(max_abs_entry(&a), 0.0, "j = {j}");
    }
}

#[test]
fn even_coefficient_is_hermitian() {
    let rho = diag_state(&[0.6, 0.4]).unwrap();
    let spec = KernelSpec::for_n(16, 2).unwrap();
    let map = SpectralFunctionMap::by_name("exp").unwrap();
    let a2 = coeff_a(2, &map, &rho, 16, &spec, MomentSource::Exact).unwrap();
    assert!(hermiticity_deviation(&a2) < 1e-6);
    assert!(max_abs_entry(&a2) > 1e-8);
}

#[test]
fn degeneracy_chain_for_zoo_channels() {
    for c in zoo(2) {
        let map = LinearChannelMap::new(c);
        let rho = diag_state(&[0.6, 0.4]).unwrap();
        let spec = KernelSpec::for_n(16, 2).unwrap();
        for j in [2usize, 3] {
            let a = coeff_a(j, &map, &rho, 16, &spec, MomentSource::Exact).unwrap();
            assert!(trace_norm(&a) < 1e-6, "a_{j}");
        }
        let b2 = coeff_b(2, &map, &rho, 16, &spec, 0.5, MomentSource::Exact, None).unwrap();
        assert!(trace_norm(&b2) < 1e-5, "b_2: {}", trace_norm(&b2));
    }
}

// ---- applications -------------------------------------------------------------

#[test]
fn kubo_ando_is_monotone_in_the_first_argument() {
    for seed in 0..100u64 {
        let a = random_state(2, seed).unwrap().matrix().clone() * cr(2.0);
        let bump = random_state(2, seed + 1000).unwrap().matrix().clone() * cr(0.5);
        let a_big = &a + &bump;
        let b = random_state(2, seed + 2000).unwrap().matrix().clone() * cr(3.0);
        let small = kubo_ando(&a, &b, 0.4).unwrap();
        let big = kubo_ando(&a_big, &b, 0.4).unwrap();
        let (values, _) = hermitian_eigen(&(big - small), 1e-8).unwrap();
        assert!(values[0] > -1e-8, "seed {seed}: min eig {}", values[0]);
    }
}

#[test]
fn kubo_ando_commuting_matches_log_interpolation() {
    for seed in 0..20u64 {
        let u = qvd::qcore::random_unitary(2, seed);
        let mut da = qvd::qcore::zeros(2, 2);
        da[(0, 0)] = cr(0.5 + (seed as f64) * 0.05);
        da[(1, 1)] = cr(1.5);
        let mut db = qvd::qcore::zeros(2, 2);
        db[(0, 0)] = cr(2.0);
        db[(1, 1)] = cr(0.3 + (seed as f64) * 0.02);
        let a = &u * da * u.adjoint();
        let b = &u * db * u.adjoint();
        let t = 0.35;
        let mean = kubo_ando(&a, &b, t).unwrap();
        let log_mix = spectral_apply(f64::ln, &a, 1e-8).unwrap().scale(1.0 - t)
            + spectral_apply(f64::ln, &b, 1e-8).unwrap().scale(t);
        let want = spectral_apply(f64::exp, &log_mix, 1e-8).unwrap();
        assert!(max_abs_entry(&(mean - want)) < 1e-8);
    }
}

#[test]
fn romberg_double_cancellation_recovers_limit() {
    let f = CMatrix::from_row_slice(2, 2, &[cr(0.6), cr(0.1), cr(0.1), cr(0.4)]);
    let c2 = CMatrix::from_row_slice(2, 2, &[cr(0.3), cr(0.0), cr(0.0), cr(-0.3)]);
    let c4 = CMatrix::from_row_slice(2, 2, &[cr(-0.2), cr(0.05), cr(0.05), cr(0.2)]);
    let column0: Vec<CMatrix> = [4.0f64, 8.0, 16.0, 32.0]
        .iter()
        .map(|&n| &f + c2.scale(n.powi(-2)) + c4.scale(n.powi(-4)))
        .collect();
    let table = romberg_extrapolate(&column0, 2);
    assert!(max_abs_entry(&(&table[3][2] - &f)) < 1e-10);
}

#[test]
fn covariance_form_is_hermitian() {
    let rho = diag_state(&[0.6, 0.4]).unwrap();
    let map = SpectralFunctionMap::by_name("exp").unwrap();
    let spec = KernelSpec::for_n(16, 2).unwrap();
    let sigma = qclt_covariance(&map, &rho, 16, &spec).unwrap();
    assert!(hermiticity_deviation(&sigma) < 1e-6);
}

#[test]
fn lambda_rule_rejects_degenerate_inputs() {
    assert!(LambdaRule::LogN.lambda_for(1).is_err());
    assert!(LambdaRule::Fixed { value: -1.0 }.lambda_for(8).is_err());
}
