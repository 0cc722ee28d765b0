#![allow(dead_code)]

use opindep::algebra::MatrixStarAlgebra;
use opindep::families::random_subalgebra;
use opindep::numerics::{haar_unitary_with, seeded_rng, SeededRng};
use opindep::Tolerances;

pub fn tol() -> Tolerances {
    Tolerances::default()
}

/// A random subalgebra of `M_n` and the rng that produced it.
pub fn subalgebra(n: usize, seed: u64) -> (MatrixStarAlgebra, SeededRng) {
    let mut rng = seeded_rng(seed);
    let a = random_subalgebra(n, &mut rng);
    (a, rng)
}

/// `B1 ⊗ B2` factors of `M_{d1 d2}`, jointly rotated.
pub fn rotated_tensor_pair(
    d1: usize,
    d2: usize,
    seed: u64,
) -> (MatrixStarAlgebra, MatrixStarAlgebra) {
    let mut rng = seeded_rng(seed);
    let b1 = random_subalgebra(d1, &mut rng);
    let b2 = random_subalgebra(d2, &mut rng);
    let u = haar_unitary_with(d1 * d2, &mut rng);
    let s1 = MatrixStarAlgebra::scalars(d1);
    let s2 = MatrixStarAlgebra::scalars(d2);
    (b1.tensor(&s2).conjugated(&u), s1.tensor(&b2).conjugated(&u))
}
