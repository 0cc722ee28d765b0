use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::product::ProductIsomorphism;
use crate::algebra::MatrixStarAlgebra;
use crate::channels::{dual_on_states, faithfulness_margin, state_prep_operation, ChannelMap};
use crate::error::{Error, Result};
use crate::numerics::{
    eig_hermitian_unchecked, frobenius_norm, hermitian_part, kron, random_density,
    random_hermitian, random_unit_vector, seeded_rng, vectorize, ComplexMatrix, SeededRng,
    Tolerances,
};
use crate::states::AlgebraState;

/// Residuals of the extension conditions for a joint operation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct JointResiduals {
    /// `max ‖T(a) − T1(a)‖` over the basis of `A1`.
    pub restriction1: f64,
    /// `max ‖T(c) − T2(c)‖` over the basis of `A2`.
    pub restriction2: f64,
    /// `max ‖T(ac) − T(a) T(c)‖` over basis pairs.
    pub product: f64,
    /// `‖T(I) − I‖`.
    pub unital: f64,
}

impl JointResiduals {
    pub fn max(&self) -> f64 {
        self.restriction1
            .max(self.restriction2)
            .max(self.product)
            .max(self.unital)
    }
}

#[derive(Debug, Clone)]
pub struct JointOperation {
    pub map: ChannelMap,
    pub residuals: JointResiduals,
    /// Whether the inputs were both faithful.
    pub inputs_faithful: bool,
    /// Smallest eigenvalue of `Σ W W*` for the joint map's Kraus operators.
    pub faithfulness_margin: f64,
}

impl JointOperation {
    pub fn is_faithful(&self, tol: &Tolerances) -> bool {
        self.faithfulness_margin > tol.eps_psd
    }
}

fn require_nonselective_on(
    t: &ChannelMap,
    a: &MatrixStarAlgebra,
    name: &str,
    tol: &Tolerances,
) -> Result<()> {
    if t.input_dim() != a.ambient_dim() || t.output_dim() != a.ambient_dim() {
        return Err(Error::NotNonselective(format!(
            "{name} maps M_{} to M_{}, expected M_{n} to M_{n}",
            t.input_dim(),
            t.output_dim(),
            n = a.ambient_dim()
        )));
    }
    if !t.domain().same_span(a, tol) {
        return Err(Error::NotNonselective(format!(
            "{name} is not defined on its algebra"
        )));
    }
    if !t.flags().cp_certified {
        return Err(Error::NotCp(t.choi_min_eigenvalue(tol).unwrap_or(f64::NAN)));
    }
    if !t.flags().unital {
        return Err(Error::NotNonselective(format!(
            "{name} is not unital (residual {:.3e})",
            t.unitality_residual()
        )));
    }
    let leak = t.range_residual(a);
    if leak > tol.eps_verify {
        return Err(Error::NotNonselective(format!(
            "{name} does not map its algebra into itself (residual {leak:.3e})"
        )));
    }
    Ok(())
}

/// Coordinates of `T` on `A`: column `i` holds the coordinates of `T(b_i)`.
fn coordinate_matrix(t: &ChannelMap, a: &MatrixStarAlgebra) -> ComplexMatrix {
    let d = a.dim();
    let mut m = ComplexMatrix::zeros(d, d);
    for (i, b) in a.basis().iter().enumerate() {
        m.set_column(i, &a.coordinates(&t.apply(b)));
    }
    m
}

/// The joint extension `(η⁻¹ ∘ (T1 ⊗ T2) ∘ η) ∘ E` of nonselective operations
/// `T1` on `A1` and `T2` on `A2`, with `E` the conditional expectation onto the
/// join.
pub fn joint_operation(
    t1: &ChannelMap,
    t2: &ChannelMap,
    eta: &ProductIsomorphism,
    tol: &Tolerances,
) -> Result<JointOperation> {
    let (a1, a2) = (eta.left(), eta.right());
    require_nonselective_on(t1, a1, "first operation", tol)?;
    require_nonselective_on(t2, a2, "second operation", tol)?;
    let n = a1.ambient_dim();
    let on_product = kron(&coordinate_matrix(t1, a1), &coordinate_matrix(t2, a2));
    let on_join = eta.inverse_matrix() * on_product * eta.matrix();
    let j = eta.join().basis_columns();
    let action = j * on_join * j.adjoint();
    let map = ChannelMap::from_action(MatrixStarAlgebra::full(n), n, action).certify(tol);
    if !map.flags().cp_certified {
        return Err(Error::NotCp(map.choi_min_eigenvalue(tol)?));
    }
    if !map.flags().unital {
        return Err(Error::NotUnital(map.unitality_residual()));
    }

    let mut residuals = JointResiduals {
        unital: map.unitality_residual(),
        ..Default::default()
    };
    let images1: Vec<ComplexMatrix> = a1.basis().iter().map(|a| map.apply(a)).collect();
    let images2: Vec<ComplexMatrix> = a2.basis().iter().map(|c| map.apply(c)).collect();
    for (a, ta) in a1.basis().iter().zip(&images1) {
        residuals.restriction1 = residuals
            .restriction1
            .max(frobenius_norm(&(ta - t1.apply(a))));
    }
    for (c, tc) in a2.basis().iter().zip(&images2) {
        residuals.restriction2 = residuals
            .restriction2
            .max(frobenius_norm(&(tc - t2.apply(c))));
    }
    for (a, ta) in a1.basis().iter().zip(&images1) {
        for (c, tc) in a2.basis().iter().zip(&images2) {
            let d = frobenius_norm(&(map.apply(&(a * c)) - ta * tc));
            residuals.product = residuals.product.max(d);
        }
    }
    let margin = faithfulness_margin(&map, tol)?;
    Ok(JointOperation {
        inputs_faithful: t1.flags().faithful && t2.flags().faithful,
        faithfulness_margin: margin,
        map,
        residuals,
    })
}

/// The state-preparing operations `T_i(X) = φ_i(X) I` on each algebra.
pub fn state_prep_pair(
    phi1: &AlgebraState,
    phi2: &AlgebraState,
    tol: &Tolerances,
) -> (ChannelMap, ChannelMap) {
    (
        state_prep_operation(phi1, tol),
        state_prep_operation(phi2, tol),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionCheck {
    pub states_checked: usize,
    /// `max |(T*φ)(a c) − φ₁(a) φ₂(c)|` over basis pairs and input states.
    pub max_residual: f64,
    pub holds: bool,
}

/// Checks `(T*φ)(XY) = φ₁(X) φ₂(Y)` for `φ` and `sweep` further random inputs,
/// half of them pure (hence generically entangled across the pair).
pub fn verify_product_transition(
    joint: &ChannelMap,
    phi: &AlgebraState,
    phi1: &AlgebraState,
    phi2: &AlgebraState,
    sweep: usize,
    seed: u64,
    tol: &Tolerances,
) -> Result<TransitionCheck> {
    let n = joint.output_dim();
    let full = MatrixStarAlgebra::full(n);
    let mut inputs = vec![AlgebraState::new(full.clone(), phi.density().clone(), tol)?];
    let mut rng = seeded_rng(seed);
    for k in 0..sweep {
        let rho = if k % 2 == 0 {
            let v = random_unit_vector(n, &mut rng);
            &v * v.adjoint()
        } else {
            random_density(n, n, &mut rng)
        };
        inputs.push(AlgebraState::new(full.clone(), rho, tol)?);
    }
    let (a1, a2) = (phi1.algebra(), phi2.algebra());
    let v1: Vec<_> = a1.basis().iter().map(|a| phi1.value(a)).collect();
    let v2: Vec<_> = a2.basis().iter().map(|c| phi2.value(c)).collect();
    let mut worst: f64 = 0.0;
    for input in &inputs {
        let out = dual_on_states(joint, input, tol)?;
        for (a, x) in a1.basis().iter().zip(&v1) {
            for (c, y) in a2.basis().iter().zip(&v2) {
                worst = worst.max((out.value(&(a * c)) - x * y).norm());
            }
        }
    }
    Ok(TransitionCheck {
        states_checked: inputs.len(),
        max_residual: worst,
        holds: worst <= tol.eps_verify,
    })
}

/// A unitary `exp(iH)` for a random Hermitian `H` in `A`.
pub fn random_unitary_in(a: &MatrixStarAlgebra, rng: &mut SeededRng) -> ComplexMatrix {
    let h = hermitian_part(&a.project(&random_hermitian(a.ambient_dim(), rng)));
    let eig = eig_hermitian_unchecked(&h);
    let phases = DVector::from_iterator(
        eig.values.len(),
        eig.values
            .iter()
            .map(|&l| num_complex::Complex64::from_polar(1.0, l)),
    );
    &eig.vectors * ComplexMatrix::from_diagonal(&phases) * eig.vectors.adjoint()
}

/// A random faithful nonselective operation on `A` mapping `A` into itself:
/// `(1 − p) u* X u + p φ(X) I` with `u` a unitary in `A` and `φ` faithful.
pub fn random_nonselective_operation(
    a: &MatrixStarAlgebra,
    rng: &mut SeededRng,
    tol: &Tolerances,
) -> Result<ChannelMap> {
    let n = a.ambient_dim();
    let u = random_unitary_in(a, rng);
    let phi = AlgebraState::new(a.clone(), random_density(n, n, rng), tol)?;
    let p: f64 = rng.random_range(0.1..0.5);
    // vec(u* X u) = (uᵀ ⊗ u*) vec X and vec(φ(X) I) = vec(I) vec(ρᵀ)ᵀ vec X
    let conj = kron(&u.transpose(), &u.adjoint());
    let prep = vectorize(&crate::numerics::identity(n))
        * vectorize(&phi.density().transpose()).transpose();
    let action = conj.scale(1.0 - p) + prep.scale(p);
    Ok(ChannelMap::from_action(a.clone(), n, action).certify(tol))
}

/// The product state `T*φ` read off a joint state-preparing operation; for a
/// faithful input `φ` it should be faithful on the join.
pub fn extracted_product_state(
    joint: &ChannelMap,
    phi: &AlgebraState,
    join: &MatrixStarAlgebra,
    tol: &Tolerances,
) -> Result<AlgebraState> {
    let out = dual_on_states(joint, phi, tol)?;
    AlgebraState::new(join.clone(), out.density().clone(), tol)
}
