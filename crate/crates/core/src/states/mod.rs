//! States on subalgebras of `M_n` and their joint extensions.
//!
//! A state `φ` on `A ⊆ M_n` is carried by a density matrix `ρ` on the ambient
//! space with `φ(X) = tr(ρX)` for `X ∈ A`. Many densities represent the same
//! state; [`AlgebraState::canonical_density`] picks the one inside `A`.

mod extension;

pub use extension::{extend_state, ExtensionOptions, ExtensionOutcome, Separation};

use nalgebra::DVector;
use num_complex::Complex64;

use crate::algebra::{max_commutator, mutually_commute, MatrixStarAlgebra};
use crate::error::{Error, Result};
use crate::independence::ProductIsomorphism;
use crate::numerics::{
    eig_hermitian, hermitian_part, hermiticity_residual, identity, operator_norm, trace,
    ComplexMatrix, Tolerances,
};

#[derive(Debug, Clone)]
pub struct AlgebraState {
    algebra: MatrixStarAlgebra,
    density: ComplexMatrix,
}

impl AlgebraState {
    /// Validates `density` as a density matrix: Hermitian, PSD to `eps_psd`
    /// and unit trace to `eps_verify`.
    pub fn new(
        algebra: MatrixStarAlgebra,
        density: ComplexMatrix,
        tol: &Tolerances,
    ) -> Result<Self> {
        let n = algebra.ambient_dim();
        if density.shape() != (n, n) {
            return Err(Error::shape(
                format!("{n}x{n} density"),
                format!("{}x{}", density.nrows(), density.ncols()),
            ));
        }
        let herm = hermiticity_residual(&density);
        if herm > tol.eps_herm {
            return Err(Error::InvalidState(format!(
                "density not Hermitian (residual {herm:.3e})"
            )));
        }
        let density = hermitian_part(&density);
        let tr = trace(&density).re;
        if (tr - 1.0).abs() > tol.eps_verify {
            return Err(Error::InvalidState(format!("density has trace {tr}")));
        }
        let min = eig_hermitian(&density, tol)?.min();
        if min < -tol.eps_psd {
            return Err(Error::InvalidState(format!(
                "density has negative eigenvalue {min:.3e}"
            )));
        }
        Ok(AlgebraState { algebra, density })
    }

    /// State determined by its values on the algebra basis, represented by
    /// the density `Σ_k conj(f(b_k)) b_k` inside the algebra.
    pub fn from_basis_values(
        algebra: MatrixStarAlgebra,
        values: &[Complex64],
        tol: &Tolerances,
    ) -> Result<Self> {
        if values.len() != algebra.dim() {
            return Err(Error::shape(
                format!("{} basis values", algebra.dim()),
                values.len().to_string(),
            ));
        }
        let n = algebra.ambient_dim();
        let density = algebra
            .basis()
            .iter()
            .zip(values)
            .fold(ComplexMatrix::zeros(n, n), |acc, (b, v)| acc + b * v.conj());
        Self::new(algebra, density, tol)
    }

    /// The normalized trace `tr(X)/n`.
    pub fn tracial(algebra: MatrixStarAlgebra) -> Self {
        let n = algebra.ambient_dim();
        let density = identity(n).unscale(n as f64);
        AlgebraState { algebra, density }
    }

    pub fn algebra(&self) -> &MatrixStarAlgebra {
        &self.algebra
    }

    pub fn density(&self) -> &ComplexMatrix {
        &self.density
    }

    pub fn value(&self, x: &ComplexMatrix) -> Complex64 {
        self.density
            .iter()
            .zip(x.transpose().iter())
            .map(|(r, x)| r * x)
            .sum()
    }

    /// Values on the algebra's orthonormal basis.
    pub fn basis_values(&self) -> Vec<Complex64> {
        self.algebra.basis().iter().map(|b| self.value(b)).collect()
    }

    /// The representing density that lies in the algebra.
    pub fn canonical_density(&self) -> ComplexMatrix {
        hermitian_part(&self.algebra.project(&self.density))
    }

    /// `max_k |φ(b_k) − ψ(b_k)|` over the basis of this state's algebra.
    pub fn distance(&self, other: &AlgebraState) -> f64 {
        self.algebra
            .basis()
            .iter()
            .map(|b| (self.value(b) - other.value(b)).norm())
            .fold(0.0, f64::max)
    }

    /// True when `φ(X*X) > 0` for every nonzero `X` in the algebra.
    pub fn is_faithful(&self, tol: &Tolerances) -> Result<bool> {
        Ok(self.faithfulness_margin(tol)? > tol.eps_psd)
    }

    /// Smallest eigenvalue of the Gram matrix `G_ij = φ(b_i* b_j)`.
    pub fn faithfulness_margin(&self, tol: &Tolerances) -> Result<f64> {
        let basis = self.algebra.basis();
        let d = basis.len();
        let mut gram = ComplexMatrix::zeros(d, d);
        for i in 0..d {
            let bi = basis[i].adjoint();
            for j in i..d {
                let g = self.value(&(&bi * &basis[j]));
                gram[(i, j)] = g;
                gram[(j, i)] = g.conj();
            }
        }
        Ok(eig_hermitian(&gram, tol)?.min())
    }
}

/// The canonical tracial state `tr(X)/n` on `A`.
pub fn canonical_trace_state(a: &MatrixStarAlgebra) -> AlgebraState {
    AlgebraState::tracial(a.clone())
}

/// Restriction of `φ` to a subalgebra of its algebra.
pub fn restrict(
    phi: &AlgebraState,
    b: &MatrixStarAlgebra,
    tol: &Tolerances,
) -> Result<AlgebraState> {
    if b.ambient_dim() != phi.algebra.ambient_dim() {
        return Err(Error::AmbientMismatch(
            phi.algebra.ambient_dim(),
            b.ambient_dim(),
        ));
    }
    let residual = phi.algebra.containment_residual(b);
    if residual > tol.eps_algebra {
        return Err(Error::NotSubalgebra(format!(
            "restriction target leaves the state's algebra (residual {residual:.3e})"
        )));
    }
    Ok(AlgebraState {
        algebra: b.clone(),
        density: phi.density.clone(),
    })
}

/// `max |φ(XY) − φ(X)φ(Y)|` over basis elements, scaled by operator norms.
pub fn product_defect(
    phi: &AlgebraState,
    a1: &MatrixStarAlgebra,
    a2: &MatrixStarAlgebra,
    tol: &Tolerances,
) -> Result<f64> {
    if !mutually_commute(a1, a2, tol)? {
        return Err(Error::NotCommuting(max_commutator(a1, a2)?));
    }
    let right: Vec<(Complex64, f64)> = a2
        .basis()
        .iter()
        .map(|y| (phi.value(y), operator_norm(y)))
        .collect();
    let mut worst: f64 = 0.0;
    for x in a1.basis() {
        let vx = phi.value(x);
        let nx = operator_norm(x);
        for (y, (vy, ny)) in a2.basis().iter().zip(&right) {
            let d = (phi.value(&(x * y)) - vx * vy).norm();
            worst = worst.max(d / (nx * ny).max(f64::MIN_POSITIVE));
        }
    }
    Ok(worst)
}

/// Whether `φ(XY) = φ(X)φ(Y)` for all `X ∈ A1`, `Y ∈ A2`.
pub fn is_product_across(
    phi: &AlgebraState,
    a1: &MatrixStarAlgebra,
    a2: &MatrixStarAlgebra,
    tol: &Tolerances,
) -> Result<bool> {
    Ok(product_defect(phi, a1, a2, tol)? <= tol.eps_verify)
}

/// The product state `(φ₁ ⊗ φ₂) ∘ η` on the join of a commuting pair.
pub fn product_state(
    phi1: &AlgebraState,
    phi2: &AlgebraState,
    eta: &ProductIsomorphism,
    tol: &Tolerances,
) -> Result<AlgebraState> {
    for (phi, side, name) in [(phi1, eta.left(), "first"), (phi2, eta.right(), "second")] {
        if !phi.algebra.same_span(side, tol) {
            return Err(Error::InvalidState(format!(
                "{name} state is not defined on the isomorphism's {name} algebra"
            )));
        }
    }
    let v1: Vec<Complex64> = eta.left().basis().iter().map(|a| phi1.value(a)).collect();
    let v2: Vec<Complex64> = eta.right().basis().iter().map(|c| phi2.value(c)).collect();
    // join basis vectors have unit coordinates, so φ(z_k) = Σ η[(i d2 + j), k] φ₁(a_i) φ₂(c_j)
    let product = DVector::from_iterator(
        v1.len() * v2.len(),
        v1.iter().flat_map(|x| v2.iter().map(move |y| x * y)),
    );
    let values: Vec<Complex64> = (eta.matrix().transpose() * product)
        .iter()
        .copied()
        .collect();
    AlgebraState::from_basis_values(eta.join().clone(), &values, tol)
}

#[cfg(test)]
mod tests;
