use super::*;
use crate::numerics::{frobenius_norm, kron, matrix_unit, random_pure_density, seeded_rng};

fn tol() -> Tolerances {
    Tolerances::default()
}

#[test]
fn tracial_values() {
    let phi = canonical_trace_state(&MatrixStarAlgebra::full(2));
    assert!((phi.value(&matrix_unit(2, 0, 0)).re - 0.5).abs() < 1e-15);
    let s = canonical_trace_state(&MatrixStarAlgebra::scalars(3));
    assert!((s.value(&identity(3)).re - 1.0).abs() < 1e-15);
    assert!(phi.is_faithful(&tol()).unwrap());
}

#[test]
fn rejects_bad_densities() {
    let full = MatrixStarAlgebra::full(2);
    assert!(AlgebraState::new(full.clone(), matrix_unit(2, 0, 1), &tol()).is_err());
    assert!(AlgebraState::new(full.clone(), identity(2), &tol()).is_err());
    let neg = ComplexMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
        Complex64::new(1.5, 0.0),
        Complex64::new(-0.5, 0.0),
    ]));
    assert!(matches!(
        AlgebraState::new(full, neg, &tol()),
        Err(Error::InvalidState(_))
    ));
}

#[test]
fn vector_state_on_diagonal_is_not_faithful() {
    let d = MatrixStarAlgebra::block_diagonal(&[(1, 1), (1, 1)]);
    let phi = AlgebraState::new(d, matrix_unit(2, 0, 0), &tol()).unwrap();
    assert!(!phi.is_faithful(&tol()).unwrap());
}

#[test]
fn restriction_keeps_values() {
    let mut rng = seeded_rng(5);
    let phi = AlgebraState::new(
        MatrixStarAlgebra::full(4),
        random_pure_density(4, &mut rng),
        &tol(),
    )
    .unwrap();
    let b = MatrixStarAlgebra::tensor_left(2, 2);
    let r = restrict(&phi, &b, &tol()).unwrap();
    for x in b.basis() {
        assert_eq!(r.value(x), phi.value(x));
    }
    let to_scalars = restrict(&phi, &MatrixStarAlgebra::scalars(4), &tol()).unwrap();
    assert!((to_scalars.value(&identity(4)).re - 1.0).abs() < 1e-12);
    let small = AlgebraState::tracial(MatrixStarAlgebra::scalars(4));
    assert!(matches!(
        restrict(&small, &b, &tol()),
        Err(Error::NotSubalgebra(_))
    ));
}

#[test]
fn basis_values_round_trip() {
    let a = MatrixStarAlgebra::block_diagonal(&[(2, 1), (1, 1)]);
    let mut rng = seeded_rng(8);
    let phi = AlgebraState::new(
        a.clone(),
        crate::numerics::random_density(3, 3, &mut rng),
        &tol(),
    )
    .unwrap();
    let psi = AlgebraState::from_basis_values(a, &phi.basis_values(), &tol()).unwrap();
    assert!(phi.distance(&psi) < 1e-12);
    assert!(frobenius_norm(&(psi.density() - phi.canonical_density())) < 1e-12);
}

#[test]
fn entangled_state_is_not_product() {
    let (l, r) = (
        MatrixStarAlgebra::tensor_left(2, 2),
        MatrixStarAlgebra::tensor_right(2, 2),
    );
    let mut v = nalgebra::DVector::<Complex64>::zeros(4);
    v[0] = Complex64::new(0.5f64.sqrt(), 0.0);
    v[3] = Complex64::new(0.5f64.sqrt(), 0.0);
    let bell = AlgebraState::new(MatrixStarAlgebra::full(4), &v * v.adjoint(), &tol()).unwrap();
    assert!(!is_product_across(&bell, &l, &r, &tol()).unwrap());
    let e = kron(&matrix_unit(2, 0, 0), &matrix_unit(2, 0, 0));
    assert!((bell.value(&e).re - 0.5).abs() < 1e-12);

    let scalars = MatrixStarAlgebra::scalars(4);
    assert!(is_product_across(&bell, &l, &scalars, &tol()).unwrap());
    assert!(matches!(
        product_defect(&bell, &MatrixStarAlgebra::full(4), &l, &tol()),
        Err(Error::NotCommuting(_))
    ));
}
