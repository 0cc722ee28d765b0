mod common;

use common::tol;
use opindep::algebra::MatrixStarAlgebra;
use opindep::channels::{
    compose, distance_on_domain, dual_on_states, is_faithful_map, kraus_from_choi,
    luders_operation, map_from_choi, slice_map, state_prep_operation, stinespring_dilation,
    tensor_channel, ChannelMap, KrausSet, ProjectiveMeasurement,
};
use opindep::numerics::{
    eig_hermitian, frobenius_norm, ginibre, haar_unitary_with, identity, kron, matrix_unit,
    random_density, seeded_rng, trace, ComplexMatrix, SeededRng,
};
use opindep::states::AlgebraState;
use proptest::prelude::*;

fn random_kraus(n: usize, m: usize, rank: usize, rng: &mut SeededRng) -> KrausSet {
    KrausSet::new((0..rank).map(|_| ginibre(n, m, rng)).collect()).unwrap()
}

/// Rescales so that `Σ W* W = I`.
fn unital_kraus(n: usize, rank: usize, rng: &mut SeededRng) -> KrausSet {
    let k = random_kraus(n, n, rank, rng);
    let c = eig_hermitian(&k.completeness(), &tol())
        .unwrap()
        .map_spectrum(|l| 1.0 / l.sqrt());
    KrausSet::new(k.operators.iter().map(|w| w * &c).collect()).unwrap()
}

fn random_projective(n: usize, rng: &mut SeededRng) -> ProjectiveMeasurement {
    let u = haar_unitary_with(n, rng);
    let split = 1 + (n - 1) / 2;
    let p: ComplexMatrix = (0..split).fold(ComplexMatrix::zeros(n, n), |acc, i| {
        acc + matrix_unit(n, i, i)
    });
    let p = &u * p * u.adjoint();
    ProjectiveMeasurement::new(vec![p.clone(), identity(n) - p], &tol()).unwrap()
}

fn transpose_map(n: usize) -> ChannelMap {
    let mut action = ComplexMatrix::zeros(n * n, n * n);
    for i in 0..n {
        for j in 0..n {
            action[(j + n * i, i + n * j)] = 1.0.into();
        }
    }
    ChannelMap::from_action(MatrixStarAlgebra::full(n), n, action).certify(&tol())
}

#[test]
fn transpose_choi_is_the_swap() {
    let t = transpose_map(2);
    let c = t.choi().unwrap();
    let eig = eig_hermitian(&c, &tol()).unwrap();
    assert!((eig.min() + 1.0).abs() <= 1e-6);
    assert_eq!(
        eig.values
            .iter()
            .filter(|v| (*v - 1.0).abs() < 1e-9)
            .count(),
        3
    );
    assert!(!t.is_completely_positive(&tol()));
}

#[test]
fn identity_choi_yields_single_kraus_identity() {
    let c = ChannelMap::identity(MatrixStarAlgebra::full(3), &tol())
        .choi()
        .unwrap();
    let k = kraus_from_choi(&c, 3, 3, &tol()).unwrap();
    assert_eq!(k.rank(), 1);
    let w = &k.operators[0];
    // unique up to a phase
    let phase = w[(0, 0)];
    assert!((phase.norm() - 1.0).abs() < 1e-10);
    assert!(frobenius_norm(&(w.unscale(1.0) * phase.conj() - identity(3))) < 1e-10);
}

#[test]
fn diagonal_luders_choi_gives_the_projections() {
    let m = ProjectiveMeasurement::new(vec![matrix_unit(2, 0, 0), matrix_unit(2, 1, 1)], &tol())
        .unwrap();
    let t = luders_operation(&m, &tol());
    let k = kraus_from_choi(&t.choi().unwrap(), 2, 2, &tol()).unwrap();
    assert_eq!(k.rank(), 2);
    for i in 0..2 {
        for j in 0..2 {
            let e = matrix_unit(2, i, j);
            assert!(frobenius_norm(&(k.apply(&e) - t.apply(&e))) < 1e-12);
        }
    }
}

#[test]
fn luders_dilation_has_two_copies() {
    let m = ProjectiveMeasurement::new(vec![matrix_unit(2, 0, 0), matrix_unit(2, 1, 1)], &tol())
        .unwrap();
    let d = stinespring_dilation(&luders_operation(&m, &tol()), &tol()).unwrap();
    assert_eq!(d.multiplicity(), 2);
    assert!(d.residual() <= 1e-8 && d.isometry_defect() <= 1e-10);
}

#[test]
fn luders_trivial_and_random() {
    let id = ProjectiveMeasurement::new(vec![identity(3)], &tol()).unwrap();
    assert!(
        distance_on_domain(
            &luders_operation(&id, &tol()),
            &ChannelMap::identity(MatrixStarAlgebra::full(3), &tol())
        ) < 1e-12
    );
    let mut rng = seeded_rng(21);
    let t = luders_operation(&random_projective(4, &mut rng), &tol());
    assert!(t.unitality_residual() <= 1e-10);
    assert!(distance_on_domain(&compose(&t, &t, &tol()).unwrap(), &t) <= 1e-10);
}

#[test]
fn state_prep_is_unital_and_cp() {
    let mut rng = seeded_rng(5);
    for _ in 0..10 {
        let phi = AlgebraState::new(
            MatrixStarAlgebra::full(2),
            random_density(2, 2, &mut rng),
            &tol(),
        )
        .unwrap();
        let t = state_prep_operation(&phi, &tol());
        assert!(frobenius_norm(&(t.apply(&identity(2)) - identity(2))) < 1e-12);
        assert!(eig_hermitian(&t.choi().unwrap(), &tol()).unwrap().min() >= -1e-12);
    }
}

#[test]
fn tensor_of_identities_is_identity() {
    let i2 = ChannelMap::identity(MatrixStarAlgebra::full(2), &tol());
    let i3 = ChannelMap::identity(MatrixStarAlgebra::full(3), &tol());
    let t = tensor_channel(&i2, &i3, &tol()).unwrap();
    assert!(frobenius_norm(&(t.action() - identity(36))) < 1e-12);
}

#[test]
fn state_prep_tensor_identity_is_slice_type() {
    let mut rng = seeded_rng(6);
    let phi = AlgebraState::new(
        MatrixStarAlgebra::full(2),
        random_density(2, 2, &mut rng),
        &tol(),
    )
    .unwrap();
    let t = tensor_channel(
        &state_prep_operation(&phi, &tol()),
        &ChannelMap::identity(MatrixStarAlgebra::full(2), &tol()),
        &tol(),
    )
    .unwrap();
    for _ in 0..5 {
        let (x, y) = (ginibre(2, 2, &mut rng), ginibre(2, 2, &mut rng));
        let expected = kron(&identity(2), &y) * phi.value(&x);
        assert!(frobenius_norm(&(t.apply(&kron(&x, &y)) - expected)) < 1e-12);
    }
}

#[test]
fn slice_map_examples() {
    let phi2 = AlgebraState::tracial(MatrixStarAlgebra::full(2));
    let l = slice_map(&MatrixStarAlgebra::full(2), &phi2, &tol());
    assert!(frobenius_norm(&(l.apply(&identity(4)) - identity(2))) < 1e-12);
    // L ∘ (T ⊗ id) = T ∘ L
    let mut rng = seeded_rng(8);
    let t = ChannelMap::from_kraus(
        MatrixStarAlgebra::full(2),
        &unital_kraus(2, 2, &mut rng),
        &tol(),
    )
    .unwrap();
    let t_id = tensor_channel(
        &t,
        &ChannelMap::identity(MatrixStarAlgebra::full(2), &tol()),
        &tol(),
    )
    .unwrap();
    let lhs = compose(&l, &t_id, &tol()).unwrap();
    let rhs = compose(&t, &l, &tol()).unwrap();
    for _ in 0..5 {
        let z = ginibre(4, 4, &mut rng);
        assert!(frobenius_norm(&(lhs.apply(&z) - rhs.apply(&z))) < 1e-12);
    }
}

#[test]
fn extension_restricts_back() {
    let mut rng = seeded_rng(9);
    let full = MatrixStarAlgebra::full(3);
    let t = ChannelMap::from_kraus(full.clone(), &unital_kraus(3, 2, &mut rng), &tol()).unwrap();
    assert!(distance_on_domain(&t.extend_to_ambient(&tol()).unwrap(), &t) < 1e-12);

    let (a, _) = common::subalgebra(4, 10);
    let e = opindep::algebra::conditional_expectation(&a, &tol());
    let s = compose(
        &ChannelMap::from_kraus(
            MatrixStarAlgebra::full(4),
            &unital_kraus(4, 2, &mut rng),
            &tol(),
        )
        .unwrap(),
        &e,
        &tol(),
    )
    .unwrap();
    let restricted = ChannelMap::from_action(a.clone(), 4, s.action().clone()).certify(&tol());
    let ext = restricted.extend_to_ambient(&tol()).unwrap();
    assert!(distance_on_domain(&restricted, &ext) <= 1e-12);
}

#[test]
fn compression_and_identity_faithfulness() {
    let mut rng = seeded_rng(12);
    let p = matrix_unit(3, 0, 0) + matrix_unit(3, 1, 1);
    let t = ChannelMap::from_kraus(
        MatrixStarAlgebra::full(3),
        &KrausSet::new(vec![p]).unwrap(),
        &tol(),
    )
    .unwrap();
    assert!(!is_faithful_map(&t, &tol()).unwrap());
    // a generic Kraus map has invertible operators; test it on rank-one projectors
    let k = random_kraus(3, 3, 1, &mut rng);
    let s = ChannelMap::from_kraus(MatrixStarAlgebra::full(3), &k, &tol()).unwrap();
    assert!(is_faithful_map(&s, &tol()).unwrap());
    for _ in 0..10 {
        let v = opindep::numerics::random_unit_vector(3, &mut rng);
        assert!(frobenius_norm(&s.apply(&(&v * v.adjoint()))) > 1e-6);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn choi_and_kraus_round_trips(seed in any::<u64>(), n in 1usize..=4, m in 1usize..=4, rank in 1usize..=4) {
        let mut rng = seeded_rng(seed);
        let k = random_kraus(n, m, rank, &mut rng);
        let t = ChannelMap::from_kraus(MatrixStarAlgebra::full(n), &k, &tol()).unwrap();
        prop_assert!(t.flags().cp_certified);
        let c = t.choi().unwrap();
        prop_assert!(eig_hermitian(&c, &tol()).unwrap().min() >= -1e-12 * frobenius_norm(&c).max(1.0));
        let back = map_from_choi(&c, n, m, &tol()).unwrap();
        prop_assert!(frobenius_norm(&(back.action() - t.action())) <= 1e-12 * frobenius_norm(t.action()).max(1.0));
        let k2 = kraus_from_choi(&c, n, m, &tol()).unwrap();
        for i in 0..n {
            for j in 0..n {
                let e = matrix_unit(n, i, j);
                prop_assert!(frobenius_norm(&(k2.apply(&e) - t.apply(&e))) <= 1e-10 * frobenius_norm(&c).max(1.0));
            }
        }
    }

    #[test]
    fn stinespring_of_nonselective_maps(seed in any::<u64>(), n in 1usize..=4, rank in 1usize..=3) {
        let mut rng = seeded_rng(seed);
        let t = ChannelMap::from_kraus(MatrixStarAlgebra::full(n), &unital_kraus(n, rank, &mut rng), &tol()).unwrap();
        prop_assert!(t.flags().nonselective());
        let d = stinespring_dilation(&t, &tol()).unwrap();
        prop_assert!(d.residual() <= 1e-8);
        prop_assert!(d.isometry_defect() <= 1e-8);
        let v = d.isometry();
        prop_assert!(frobenius_norm(&(v.adjoint() * v - identity(n))) <= 1e-8);
    }

    #[test]
    fn dual_preserves_states(seed in any::<u64>(), n in 1usize..=4, rank in 1usize..=3) {
        let mut rng = seeded_rng(seed);
        let t = ChannelMap::from_kraus(MatrixStarAlgebra::full(n), &unital_kraus(n, rank, &mut rng), &tol()).unwrap();
        let phi = AlgebraState::new(MatrixStarAlgebra::full(n), random_density(n, 1 + seed as usize % n, &mut rng), &tol()).unwrap();
        let out = dual_on_states(&t, &phi, &tol()).unwrap();
        prop_assert!((trace(out.density()).re - 1.0).abs() <= 1e-10);
        prop_assert!(eig_hermitian(out.density(), &tol()).unwrap().min() >= -1e-10);
        let x = ginibre(n, n, &mut rng);
        prop_assert!((out.value(&x) - phi.value(&t.apply(&x))).norm() <= 1e-10 * frobenius_norm(&x).max(1.0));
    }

    #[test]
    fn luders_and_state_prep_are_nonselective(seed in any::<u64>(), n in 2usize..=5) {
        let mut rng = seeded_rng(seed);
        let l = luders_operation(&random_projective(n, &mut rng), &tol());
        prop_assert!(l.flags().nonselective() && l.is_completely_positive(&tol()));
        let phi = AlgebraState::new(MatrixStarAlgebra::full(n), random_density(n, 2, &mut rng), &tol()).unwrap();
        let s = state_prep_operation(&phi, &tol());
        prop_assert!(s.flags().nonselective() && s.is_completely_positive(&tol()));
    }

    #[test]
    fn tensor_of_faithful_maps_is_faithful(seed in any::<u64>(), r1 in 1usize..=3, r2 in 1usize..=3) {
        let mut rng = seeded_rng(seed);
        let (kt, ks) = (random_kraus(2, 2, r1, &mut rng), random_kraus(3, 3, r2, &mut rng));
        let t = ChannelMap::from_kraus(MatrixStarAlgebra::full(2), &kt, &tol()).unwrap();
        let s = ChannelMap::from_kraus(MatrixStarAlgebra::full(3), &ks, &tol()).unwrap();
        prop_assert!(is_faithful_map(&t, &tol()).unwrap() && is_faithful_map(&s, &tol()).unwrap());
        let ts = tensor_channel(&t, &s, &tol()).unwrap();
        prop_assert!(is_faithful_map(&ts, &tol()).unwrap());
        // Kronecker completeness sum as an independent oracle
        let mut sum = ComplexMatrix::zeros(6, 6);
        for w in &kt.operators {
            for v in &ks.operators {
                let wv = kron(w, v);
                sum += &wv * wv.adjoint();
            }
        }
        prop_assert!(eig_hermitian(&sum, &tol()).unwrap().min() > 1e-9);

        let p = ComplexMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0.into(), 0.0.into()]));
        let bad = ChannelMap::from_kraus(MatrixStarAlgebra::full(2), &KrausSet::new(kt.operators.iter().map(|w| &p * w).collect()).unwrap(), &tol()).unwrap();
        prop_assert!(!is_faithful_map(&bad, &tol()).unwrap());
        prop_assert!(!is_faithful_map(&tensor_channel(&bad, &s, &tol()).unwrap(), &tol()).unwrap());
    }

    #[test]
    fn composition_stays_cp(seed in any::<u64>(), n in 1usize..=4) {
        let mut rng = seeded_rng(seed);
        let t = ChannelMap::from_kraus(MatrixStarAlgebra::full(n), &random_kraus(n, n, 2, &mut rng), &tol()).unwrap();
        let s = ChannelMap::from_kraus(MatrixStarAlgebra::full(n), &random_kraus(n, n, 2, &mut rng), &tol()).unwrap();
        let c = compose(&t, &s, &tol()).unwrap();
        prop_assert!(c.flags().cp_certified);
        let id = ChannelMap::identity(MatrixStarAlgebra::full(n), &tol());
        prop_assert!(distance_on_domain(&compose(&id, &t, &tol()).unwrap(), &t) <= 1e-12 * frobenius_norm(t.action()).max(1.0));
    }
}
