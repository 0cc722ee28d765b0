mod common;

use common::{subalgebra, tol};
use opindep::algebra::{
    commutant, conditional_expectation, generate_algebra, join, mutually_commute, product_span,
    structure_decomposition, MatrixStarAlgebra,
};
use opindep::channels::{compose, distance_on_domain};
use opindep::numerics::{frobenius_norm, ginibre, matrix_unit, seeded_rng, ComplexMatrix};
use proptest::prelude::*;

/// Closure of `{x, x*}` by monomials up to length 8, as a rank count.
fn monomial_closure_dim(x: &ComplexMatrix) -> usize {
    let n = x.nrows();
    let letters = [x.clone(), x.adjoint()];
    let mut words = vec![ComplexMatrix::identity(n, n)];
    let mut frontier = words.clone();
    for _ in 0..8 {
        let mut next = Vec::new();
        for w in &frontier {
            for l in &letters {
                next.push(w * l);
            }
        }
        words.extend(next.iter().cloned());
        frontier = next;
    }
    let mut m = ComplexMatrix::zeros(n * n, words.len());
    for (k, w) in words.iter().enumerate() {
        m.set_column(k, &nalgebra::DVector::from_column_slice(w.as_slice()));
    }
    let s = m.svd(false, false).singular_values;
    let top = s.max();
    s.iter().filter(|&&v| v > 1e-9 * top).count()
}

#[test]
fn generic_generator_matches_monomial_closure() {
    let mut rng = seeded_rng(11);
    let x = ginibre(4, 4, &mut rng);
    let a = generate_algebra(&[x.clone(), x.adjoint()], 4, &tol()).unwrap();
    assert_eq!(a.dim(), monomial_closure_dim(&x));
    assert_eq!(a.dim(), 16);
}

#[test]
fn join_of_diagonal_factors_matches_generation() {
    let d = MatrixStarAlgebra::block_diagonal(&[(1, 1), (1, 1)]);
    let s = MatrixStarAlgebra::scalars(2);
    let (a1, a2) = (d.tensor(&s), s.tensor(&d));
    let gens: Vec<ComplexMatrix> = a1.basis().iter().chain(a2.basis()).cloned().collect();
    let g = generate_algebra(&gens, 4, &tol()).unwrap();
    assert!(join(&a1, &a2, &tol()).unwrap().same_span(&g, &tol()));
}

#[test]
fn commutant_of_left_factor_solves_entrywise() {
    // X (E_ij ⊗ 1) = (E_ij ⊗ 1) X for all i, j forces X = 1 ⊗ x
    let c = commutant(&MatrixStarAlgebra::tensor_left(2, 2)).unwrap();
    for x in c.basis() {
        for i in 0..2 {
            for j in 0..2 {
                let e =
                    opindep::numerics::kron(&matrix_unit(2, i, j), &ComplexMatrix::identity(2, 2));
                assert!(frobenius_norm(&(x * &e - &e * x)) < 1e-10);
            }
        }
    }
    assert_eq!(c.dim(), 4);
}

#[test]
fn block_center_projections_have_ranks_two_and_three() {
    let a = MatrixStarAlgebra::block_diagonal(&[(2, 1), (3, 1)]);
    let info = opindep::algebra::center_and_factor(&a, &tol()).unwrap();
    // a generic central element separates the blocks
    let z = info.minimal_central_projections[0].scale(1.0)
        + info.minimal_central_projections[1].scale(2.0);
    let eig = opindep::numerics::eig_hermitian(&z, &tol()).unwrap();
    let ones = eig
        .values
        .iter()
        .filter(|v| (*v - 1.0).abs() < 1e-9)
        .count();
    let twos = eig
        .values
        .iter()
        .filter(|v| (*v - 2.0).abs() < 1e-9)
        .count();
    let mut ranks = [ones, twos];
    ranks.sort();
    assert_eq!(ranks, [2, 3]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn generated_algebras_are_closed(seed in any::<u64>(), n in 1usize..=8) {
        let (a, _) = subalgebra(n, seed);
        prop_assert!(a.verify(&tol()).is_ok());
        let gram: Vec<f64> = a.basis().iter().map(frobenius_norm).collect();
        prop_assert!(gram.iter().all(|g| (g - 1.0).abs() <= 1e-10));
    }

    #[test]
    fn double_commutant(seed in any::<u64>(), n in 1usize..=8) {
        let (a, _) = subalgebra(n, seed);
        let c = commutant(&a).unwrap();
        prop_assert!(mutually_commute(&a, &c, &tol()).unwrap());
        let cc = commutant(&c).unwrap();
        prop_assert!(cc.same_span(&a, &tol()));
    }

    #[test]
    fn wedderburn_bookkeeping(seed in any::<u64>(), n in 1usize..=8) {
        let (a, _) = subalgebra(n, seed);
        let s = structure_decomposition(&a, &tol()).unwrap();
        let dim: usize = s.blocks.iter().map(|b| b.size * b.size).sum();
        let ambient: usize = s.blocks.iter().map(|b| b.size * b.multiplicity).sum();
        prop_assert_eq!(dim, a.dim());
        prop_assert_eq!(ambient, n);
        prop_assert!(s.residual(&a) <= tol().eps_verify);
    }

    #[test]
    fn conditional_expectation_properties(seed in any::<u64>(), n in 1usize..=8) {
        let (a, mut rng) = subalgebra(n, seed);
        let t = tol();
        let e = conditional_expectation(&a, &t);
        let f = e.flags();
        prop_assert!(f.cp_certified && f.unital && f.faithful);
        prop_assert!(e.is_completely_positive(&t));
        let ee = compose(&e, &e, &t).unwrap();
        prop_assert!(distance_on_domain(&ee, &e) <= t.eps_verify);
        let x = ginibre(n, n, &mut rng);
        let y = e.apply(&x);
        prop_assert!(a.contains(&y, &t));
        let (p, q) = (a.project(&ginibre(n, n, &mut rng)), a.project(&ginibre(n, n, &mut rng)));
        let bimodular = frobenius_norm(&(e.apply(&(&p * &x * &q)) - &p * &y * &q));
        prop_assert!(bimodular <= t.eps_verify * (1.0 + frobenius_norm(&x)) * 10.0);
    }

    #[test]
    fn commuting_join_is_product_span(seed in any::<u64>(), d1 in 1usize..=3, d2 in 1usize..=3) {
        let (a1, a2) = common::rotated_tensor_pair(d1, d2, seed);
        let j = join(&a1, &a2, &tol()).unwrap();
        let products = product_span(&a1, &a2, &tol()).unwrap();
        prop_assert_eq!(j.dim(), products.len());
        prop_assert_eq!(j.dim(), a1.dim() * a2.dim());
    }
}
