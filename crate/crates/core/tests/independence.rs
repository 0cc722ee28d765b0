mod common;

use common::{rotated_tensor_pair, tol};
use opindep::algebra::{center_and_factor, conditional_expectation, join, MatrixStarAlgebra};
use opindep::channels::{
    distance_on_domain, luders_operation, unitary_conjugation, ChannelMap, ProjectiveMeasurement,
};
use opindep::families::{generate, Family};
use opindep::independence::{
    check_cstar_independence, check_product_sense, check_spatial_product_sense,
    check_wstar_independence, check_wstar_product_sense, extracted_product_state,
    find_interpolating_factor, implication_violations, joint_operation,
    random_nonselective_operation, run_hierarchy_checks, state_prep_pair,
    verify_product_transition, FactorSearch, HierarchyConfig, IndependenceVerdict,
    IndependenceWitness, Notion, ProductIsomorphism, ProductSense, Sampler, Verdict,
};
use opindep::numerics::{
    frobenius_norm, haar_unitary, identity, kron, matrix_unit, random_density, seeded_rng,
    ComplexMatrix,
};
use opindep::states::{extend_state, product_state, restrict, AlgebraState, ExtensionOptions};
use opindep::Error;
use proptest::prelude::*;

fn tensor_pair(d1: usize, d2: usize) -> (MatrixStarAlgebra, MatrixStarAlgebra) {
    (
        MatrixStarAlgebra::tensor_left(d1, d2),
        MatrixStarAlgebra::tensor_right(d1, d2),
    )
}

fn diag2() -> MatrixStarAlgebra {
    MatrixStarAlgebra::block_diagonal(&[(1, 1), (1, 1)])
}

fn faithful_state(a: &MatrixStarAlgebra, seed: u64) -> AlgebraState {
    let n = a.ambient_dim();
    AlgebraState::new(
        a.clone(),
        random_density(n, n, &mut seeded_rng(seed)),
        &tol(),
    )
    .unwrap()
}

#[test]
fn product_sense_examples() {
    let (l, r) = tensor_pair(2, 2);
    match check_product_sense(&l, &r, &tol(), 0).unwrap() {
        ProductSense::Holds(iso) => assert_eq!(iso.join().dim(), 16),
        ProductSense::Fails(_) => panic!("tensor pair must hold"),
    }
    match check_product_sense(&diag2(), &diag2(), &tol(), 0).unwrap() {
        ProductSense::Fails(w) => {
            assert_eq!((w.join_dim, w.product_dim), (2, 4));
            assert!(w.relation_residual <= 1e-8);
            assert!(w.value.norm() > 1e-6);
        }
        ProductSense::Holds(_) => panic!("same algebra must fail"),
    }
}

#[test]
fn haar_rotated_m6_pair_has_certified_eta() {
    let u = haar_unitary(6, 17);
    let (l, r) = tensor_pair(2, 3);
    let (a1, a2) = (l.conjugated(&u), r.conjugated(&u));
    let ProductSense::Holds(iso) = check_product_sense(&a1, &a2, &tol(), 0).unwrap() else {
        panic!("rotated tensor pair must hold");
    };
    let res = iso.residuals();
    assert!(res.unital.max(res.adjoint).max(res.multiplicative) <= 1e-9);
    assert_eq!(join(&a1, &a2, &tol()).unwrap().dim(), 36);
}

#[test]
fn relation_witness_for_collapsed_join() {
    // diagonal same-block pairs commute, but their join collapses
    let dd = diag2().tensor(&MatrixStarAlgebra::scalars(2));
    let finer = MatrixStarAlgebra::block_diagonal(&[(1, 1), (1, 1), (1, 2)]);
    for (a1, a2) in [(dd.clone(), dd.clone()), (dd.clone(), finer)] {
        match check_wstar_product_sense(&a1, &a2, &tol(), 3).unwrap() {
            ProductSense::Fails(w) => {
                assert!(w.join_dim < w.product_dim);
                let mut sum = ComplexMatrix::zeros(4, 4);
                for (i, a) in a1.basis().iter().enumerate() {
                    for (j, c) in a2.basis().iter().enumerate() {
                        sum += a * c * w.relation[(i, j)];
                    }
                }
                assert!(frobenius_norm(&sum) <= 1e-8);
                assert!(frobenius_norm(&w.relation) > 0.5);
            }
            ProductSense::Holds(_) => panic!("join collapses"),
        }
    }
}

#[test]
fn cstar_examples() {
    let (l, r) = tensor_pair(2, 2);
    let sampler = Sampler::new(0, 20);
    assert!(check_cstar_independence(&l, &r, &sampler, &tol())
        .unwrap()
        .holds());
    assert!(check_wstar_independence(&l, &r, &sampler, &tol())
        .unwrap()
        .holds());
    match check_cstar_independence(&diag2(), &diag2(), &sampler, &tol()).unwrap() {
        IndependenceVerdict::Fails(IndependenceWitness::Central(w)) => {
            // vector states on e₁ and e₂
            let picks = [
                w.state1.value(&matrix_unit(2, 0, 0)).re,
                w.state2.value(&matrix_unit(2, 0, 0)).re,
            ];
            let mut picks = picks.map(|v| v.round() as i64);
            picks.sort();
            assert_eq!(picks, [0, 1]);
            assert!(w.overlap <= 1e-9);
        }
        other => panic!("expected central witness, got {other:?}"),
    }
    assert!(
        check_wstar_independence(&diag2(), &diag2(), &sampler, &tol())
            .unwrap()
            .fails()
    );
}

#[test]
fn noncommuting_copies_of_m2_fail_with_certificate() {
    let a1 = MatrixStarAlgebra::full(2);
    let a2 = MatrixStarAlgebra::full(2).conjugated(&haar_unitary(2, 5));
    let v = check_cstar_independence(&a1, &a2, &Sampler::new(5, 10), &tol()).unwrap();
    let IndependenceVerdict::Fails(IndependenceWitness::Separation(w)) = v else {
        panic!("seed 5 is pinned to a certified separation, got {v:?}");
    };
    assert!(w.gap > 1e-6);
    assert!(w.separation.margin(&w.state1, &w.state2) > 0.0);
    let again = extend_state(&w.state1, &w.state2, &ExtensionOptions::default()).unwrap();
    assert!(again.is_infeasible());
}

#[test]
fn joint_identity_is_the_conditional_expectation() {
    let (a1, a2) = rotated_tensor_pair(2, 2, 3);
    let eta = ProductIsomorphism::build(&a1, &a2, &tol()).unwrap();
    let (i1, i2) = (
        ChannelMap::identity(a1.clone(), &tol()),
        ChannelMap::identity(a2.clone(), &tol()),
    );
    let (i1, i2) = (
        i1.extend_to_ambient(&tol()).unwrap(),
        i2.extend_to_ambient(&tol()).unwrap(),
    );
    let i1 = ChannelMap::from_action(a1.clone(), 4, i1.action().clone()).certify(&tol());
    let i2 = ChannelMap::from_action(a2.clone(), 4, i2.action().clone()).certify(&tol());
    let j = joint_operation(&i1, &i2, &eta, &tol()).unwrap();
    assert!(j.residuals.max() <= 1e-12);
    let e = conditional_expectation(eta.join(), &tol());
    assert!(distance_on_domain(&j.map, &e) <= 1e-10);
}

#[test]
fn joint_luders_and_unitary_on_m6() {
    let (a1, a2) = tensor_pair(2, 3);
    let eta = ProductIsomorphism::build(&a1, &a2, &tol()).unwrap();
    let p = ComplexMatrix::from_element(2, 2, 0.5.into());
    let m = ProjectiveMeasurement::new(
        vec![
            kron(&p, &identity(3)),
            kron(&(identity(2) - &p), &identity(3)),
        ],
        &tol(),
    )
    .unwrap();
    let t1 = luders_operation(&m, &tol());
    let t1 = ChannelMap::from_action(a1.clone(), 6, t1.action().clone()).certify(&tol());
    let u = kron(&identity(2), &haar_unitary(3, 4));
    let t2 = unitary_conjugation(a2.clone(), &u, &tol()).unwrap();
    let j = joint_operation(&t1, &t2, &eta, &tol()).unwrap();
    assert!(j.residuals.max() <= 1e-8);
    // direct evaluation on the 36-element product basis
    let mut worst: f64 = 0.0;
    for x in a1.basis() {
        for y in a2.basis() {
            worst = worst.max(frobenius_norm(
                &(j.map.apply(&(x * y)) - t1.apply(x) * t2.apply(y)),
            ));
        }
    }
    assert!(worst <= 1e-8);
}

#[test]
fn state_prep_transition_examples() {
    let (a1, a2) = tensor_pair(2, 2);
    let eta = ProductIsomorphism::build(&a1, &a2, &tol()).unwrap();
    let (phi1, phi2) = (faithful_state(&a1, 1), faithful_state(&a2, 2));
    let (t1, t2) = state_prep_pair(&phi1, &phi2, &tol());
    let j = joint_operation(&t1, &t2, &eta, &tol()).unwrap();
    let tracial = AlgebraState::tracial(MatrixStarAlgebra::full(4));
    assert!(
        verify_product_transition(&j.map, &tracial, &phi1, &phi2, 0, 0, &tol())
            .unwrap()
            .holds
    );

    let mut v = nalgebra::DVector::<num_complex::Complex64>::zeros(4);
    v[0] = (0.5f64).sqrt().into();
    v[3] = (0.5f64).sqrt().into();
    let bell = AlgebraState::new(MatrixStarAlgebra::full(4), &v * v.adjoint(), &tol()).unwrap();
    let check = verify_product_transition(&j.map, &bell, &phi1, &phi2, 6, 9, &tol()).unwrap();
    assert!(check.holds && check.max_residual <= 1e-8);

    let out = opindep::channels::dual_on_states(&j.map, &bell, &tol()).unwrap();
    for y in a2.basis() {
        assert!((out.value(y) - phi2.value(y)).norm() <= 1e-10);
    }
}

#[test]
fn hierarchy_examples() {
    let cfg = HierarchyConfig {
        samples: 20,
        ..Default::default()
    };
    let (l, r) = tensor_pair(2, 2);
    let rep = run_hierarchy_checks(&l, &r, &cfg).unwrap();
    assert!(
        rep.verdicts().iter().all(|(_, v)| *v == Verdict::Holds),
        "{:?}",
        rep.verdicts()
    );
    let rep = run_hierarchy_checks(&diag2(), &diag2(), &cfg).unwrap();
    assert!(
        rep.verdicts().iter().all(|(_, v)| *v == Verdict::Fails),
        "{:?}",
        rep.verdicts()
    );
    assert!(rep.violations.is_empty());
}

#[test]
fn interpolating_factor_examples() {
    let (l, r) = tensor_pair(2, 3);
    let FactorSearch::Found(f) = find_interpolating_factor(&l, &r, &tol()).unwrap() else {
        panic!("tensor pair splits");
    };
    assert!(f.factor.same_span(&l, &tol()));
    assert_eq!((f.d1, f.d2), (2, 3));
    // U = I up to a gauge inside each factor
    for x in l.basis() {
        let y = &f.unitary * x * f.unitary.adjoint();
        assert!(MatrixStarAlgebra::tensor_left(2, 3).contains(&y, &tol()));
    }

    let u = haar_unitary(6, 31);
    let (n1, n2) = (l.conjugated(&u), r.conjugated(&u));
    let FactorSearch::Found(f) = find_interpolating_factor(&n1, &n2, &tol()).unwrap() else {
        panic!("rotated tensor pair splits");
    };
    assert!(
        f.residuals
            .left
            .max(f.residuals.right)
            .max(f.residuals.product)
            <= 1e-8
    );
    // undo the known conjugation: U u is a local unitary
    let w = &f.unitary * &u;
    for x in l.basis() {
        assert!(MatrixStarAlgebra::tensor_left(2, 3).contains(&(&w * x * w.adjoint()), &tol()));
    }

    // diag(M₂) against itself: the only candidate containing it inside its
    // commutant is diag(M₂), which is not a factor
    let search = find_interpolating_factor(&diag2(), &diag2(), &tol()).unwrap();
    assert!(
        matches!(search, FactorSearch::NotFound { .. }),
        "{search:?}"
    );
}

#[test]
fn prime_dimension_abelian_pair_does_not_split() {
    let d = |v: [f64; 5]| {
        ComplexMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            5,
            v.iter().map(|&x| x.into()),
        ))
    };
    let p = d([1.0, 1.0, 0.0, 0.0, 0.0]);
    let q = d([0.0, 1.0, 1.0, 1.0, 0.0]);
    let n1 =
        MatrixStarAlgebra::from_spanning_set(5, &[p.clone(), identity(5) - p], &tol()).unwrap();
    let n2 =
        MatrixStarAlgebra::from_spanning_set(5, &[q.clone(), identity(5) - q], &tol()).unwrap();
    let found = find_interpolating_factor(&n1, &n2, &tol()).unwrap();
    let FactorSearch::NotFound { multiplicities, .. } = &found else {
        panic!("expected NotFound, got {found:?}");
    };
    let mut flat: Vec<usize> = multiplicities.iter().flatten().copied().collect();
    flat.sort();
    assert_eq!(flat, vec![1, 1, 1, 2]);
    assert!(!check_spatial_product_sense(&n1, &n2, &tol())
        .unwrap()
        .is_found());
}

#[test]
fn non_product_pairs_refuse_joint_operations() {
    let err = ProductIsomorphism::build(&diag2(), &diag2(), &tol()).unwrap_err();
    assert!(matches!(
        err,
        Error::NoProductIsomorphism {
            join: 2,
            product: 4
        }
    ));
}

#[test]
fn factor_pairs_carry_product_states() {
    for index in 0..5 {
        let inst = generate(Family::FactorSplit, 3, index);
        assert!(center_and_factor(&inst.a1, &tol()).unwrap().is_factor);
        assert!(center_and_factor(&inst.a2, &tol()).unwrap().is_factor);
        let ProductSense::Holds(eta) = check_product_sense(&inst.a1, &inst.a2, &tol(), 0).unwrap()
        else {
            panic!("commuting factors are in product position");
        };
        let (phi1, phi2) = (
            faithful_state(&inst.a1, index as u64),
            faithful_state(&inst.a2, 100 + index as u64),
        );
        let phi = product_state(&phi1, &phi2, &eta, &tol()).unwrap();
        assert!(restrict(&phi, &inst.a1, &tol()).unwrap().distance(&phi1) <= 1e-8);
        assert!(restrict(&phi, &inst.a2, &tol()).unwrap().distance(&phi2) <= 1e-8);
        assert!(phi.is_faithful(&tol()).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn eta_certification(seed in any::<u64>(), d1 in 1usize..=3, d2 in 1usize..=3) {
        let (a1, a2) = rotated_tensor_pair(d1, d2, seed);
        let eta = ProductIsomorphism::build(&a1, &a2, &tol()).unwrap();
        let dj = eta.join().dim();
        let prod = eta.matrix() * eta.inverse_matrix();
        prop_assert!(frobenius_norm(&(prod - identity(dj))) <= 1e-10);
        let n = a1.ambient_dim();
        let unit = eta.tensor_image(&identity(n));
        prop_assert!(frobenius_norm(&(unit - identity(n * n))) <= 1e-10);
        for z in eta.join().basis() {
            let lhs = eta.tensor_image(&z.adjoint());
            prop_assert!(frobenius_norm(&(lhs - eta.tensor_image(z).adjoint())) <= 1e-10);
        }
        for a in a1.basis() {
            for c in a2.basis() {
                prop_assert!(frobenius_norm(&(eta.tensor_image(&(a * c)) - kron(a, c))) <= 1e-9);
            }
        }
    }

    #[test]
    fn joint_operations_restrict_to_their_parts(seed in any::<u64>(), d1 in 1usize..=3, d2 in 1usize..=3) {
        let (a1, a2) = rotated_tensor_pair(d1, d2, seed);
        let eta = ProductIsomorphism::build(&a1, &a2, &tol()).unwrap();
        let mut rng = seeded_rng(seed);
        let t1 = random_nonselective_operation(&a1, &mut rng, &tol()).unwrap();
        let t2 = random_nonselective_operation(&a2, &mut rng, &tol()).unwrap();
        let j = joint_operation(&t1, &t2, &eta, &tol()).unwrap();
        prop_assert!(j.residuals.max() <= tol().eps_verify);
        prop_assert!(j.inputs_faithful && j.is_faithful(&tol()));
        for a in a1.basis() {
            prop_assert!(frobenius_norm(&(j.map.apply(a) - t1.apply(a))) <= tol().eps_verify);
        }
        for c in a2.basis() {
            prop_assert!(frobenius_norm(&(j.map.apply(c) - t2.apply(c))) <= tol().eps_verify);
        }
        // the product state read off the joint state preparation is faithful
        let (phi1, phi2) = (faithful_state(&a1, seed ^ 5), faithful_state(&a2, seed ^ 6));
        let (s1, s2) = state_prep_pair(&phi1, &phi2, &tol());
        let js = joint_operation(&s1, &s2, &eta, &tol()).unwrap();
        let phi = faithful_state(&MatrixStarAlgebra::full(a1.ambient_dim()), seed ^ 7);
        let extracted = extracted_product_state(&js.map, &phi, eta.join(), &tol()).unwrap();
        prop_assert!(extracted.is_faithful(&tol()).unwrap());
    }

    #[test]
    fn implications_and_wstar_agreement(seed in any::<u64>(), family in 0usize..4, index in 0usize..1000) {
        let inst = generate(Family::ALL[family], seed, index);
        let cfg = HierarchyConfig { seed, samples: 12, operation_pairs: 2, transition_sweep: 2, ..Default::default() };
        let rep = run_hierarchy_checks(&inst.a1, &inst.a2, &cfg).unwrap();
        prop_assert!(implication_violations(&rep).is_empty(), "{:?}", rep.violations);
        prop_assert_eq!(rep.verdict(Notion::CstarIndependent), rep.verdict(Notion::WstarIndependent));
        prop_assert_eq!(rep.verdict(Notion::CstarProductSense), rep.verdict(Notion::WstarProductSense));
        let sampler = Sampler::new(seed, 12);
        let c = check_cstar_independence(&inst.a1, &inst.a2, &sampler, &tol()).unwrap();
        let w = check_wstar_independence(&inst.a1, &inst.a2, &sampler, &tol()).unwrap();
        prop_assert_eq!((c.holds(), c.fails()), (w.holds(), w.fails()));
        let spatial = check_spatial_product_sense(&inst.a1, &inst.a2, &tol());
        if let Ok(s) = spatial {
            prop_assert_eq!(s.is_found(), rep.verdict(Notion::Split) == Verdict::Holds);
        }
    }
}
