use nalgebra::DVector;
use num_complex::Complex64;

use crate::algebra::{join, max_commutator, mutually_commute, MatrixStarAlgebra};
use crate::error::{Error, Result};
use crate::numerics::{
    frobenius_norm, identity, null_space, random_pure_density, seeded_rng, vectorize,
    ComplexMatrix, Tolerances, ZERO,
};
use crate::states::AlgebraState;

/// Certified residuals of a product isomorphism.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct IsomorphismResiduals {
    /// `‖η η⁻¹ − I‖_F`.
    pub inverse: f64,
    /// `‖η(I) − I ⊗ I‖`.
    pub unital: f64,
    /// `max ‖η(Z*) − η(Z)*‖` over the join basis.
    pub adjoint: f64,
    /// `max ‖η⁻¹(p) η⁻¹(q) − η⁻¹(pq)‖` over product-basis pairs.
    pub multiplicative: f64,
}

/// The isomorphism `η : A1 ∨ A2 → A1 ⊗ A2`, `η(XY) = X ⊗ Y`, of a commuting
/// pair.
///
/// Product coordinates are indexed `i * d2 + j` for `a_i ⊗ c_j`, with `a_i`,
/// `c_j` the orthonormal bases of the two algebras.
#[derive(Debug, Clone)]
pub struct ProductIsomorphism {
    left: MatrixStarAlgebra,
    right: MatrixStarAlgebra,
    join: MatrixStarAlgebra,
    /// Join coordinates → product coordinates.
    eta: ComplexMatrix,
    /// Product coordinates → join coordinates.
    eta_inv: ComplexMatrix,
    residuals: IsomorphismResiduals,
}

/// Evidence that no product isomorphism exists: a nonzero relation
/// `Σ T_ij a_i c_j = 0` and a pair of states with `Σ T_ij φ₁(a_i) φ₂(c_j) ≠ 0`,
/// so `φ₁ ⊗ φ₂` is not well defined on the join.
#[derive(Debug, Clone)]
pub struct DimensionWitness {
    pub join_dim: usize,
    pub product_dim: usize,
    /// `d1 × d2` coefficients.
    pub relation: ComplexMatrix,
    pub relation_residual: f64,
    pub state1: AlgebraState,
    pub state2: AlgebraState,
    /// `Σ T_ij φ₁(a_i) φ₂(c_j)`.
    pub value: Complex64,
}

#[derive(Debug, Clone)]
pub enum ProductSense {
    Holds(Box<ProductIsomorphism>),
    Fails(Box<DimensionWitness>),
}

impl ProductSense {
    pub fn holds(&self) -> bool {
        matches!(self, ProductSense::Holds(_))
    }
}

/// Matrix with columns `vec(a_i c_j)`.
fn multiplication_map(a1: &MatrixStarAlgebra, a2: &MatrixStarAlgebra) -> ComplexMatrix {
    let n = a1.ambient_dim();
    let (d1, d2) = (a1.dim(), a2.dim());
    let mut m = ComplexMatrix::zeros(n * n, d1 * d2);
    for (i, a) in a1.basis().iter().enumerate() {
        for (j, c) in a2.basis().iter().enumerate() {
            m.set_column(i * d2 + j, &vectorize(&(a * c)));
        }
    }
    m
}

impl ProductIsomorphism {
    /// Builds and certifies `η`. Errors with `NoProductIsomorphism` when the
    /// dimension count fails.
    pub fn build(a1: &MatrixStarAlgebra, a2: &MatrixStarAlgebra, tol: &Tolerances) -> Result<Self> {
        if !mutually_commute(a1, a2, tol)? {
            return Err(Error::NotCommuting(max_commutator(a1, a2)?));
        }
        let joined = join(a1, a2, tol)?;
        let (d1, d2) = (a1.dim(), a2.dim());
        if joined.dim() != d1 * d2 {
            return Err(Error::NoProductIsomorphism {
                join: joined.dim(),
                product: d1 * d2,
            });
        }
        let m = multiplication_map(a1, a2);
        let eta_inv = joined.basis_columns().adjoint() * m;
        let eta = eta_inv.clone().try_inverse().ok_or_else(|| {
            Error::IllConditioned(
                "multiplication map is singular despite the dimension count".into(),
            )
        })?;
        let mut iso = ProductIsomorphism {
            left: a1.clone(),
            right: a2.clone(),
            join: joined,
            eta,
            eta_inv,
            residuals: IsomorphismResiduals {
                inverse: 0.0,
                unital: 0.0,
                adjoint: 0.0,
                multiplicative: 0.0,
            },
        };
        iso.residuals = iso.compute_residuals();
        let r = iso.residuals;
        if r.inverse > 1e-10 * (d1 * d2) as f64 {
            return Err(Error::IllConditioned(format!(
                "η and η⁻¹ are inverse only to {:.3e}",
                r.inverse
            )));
        }
        let worst = r.unital.max(r.adjoint).max(r.multiplicative);
        if worst > tol.eps_verify {
            return Err(Error::InvalidIsomorphism(format!(
                "η certification residuals: unital {:.3e}, adjoint {:.3e}, multiplicative {:.3e}",
                r.unital, r.adjoint, r.multiplicative
            )));
        }
        Ok(iso)
    }

    /// Rebuilds an isomorphism from a stored `η` matrix and re-certifies it.
    pub fn from_matrix(
        a1: &MatrixStarAlgebra,
        a2: &MatrixStarAlgebra,
        eta: ComplexMatrix,
        tol: &Tolerances,
    ) -> Result<Self> {
        let fresh = Self::build(a1, a2, tol)?;
        if eta.shape() != fresh.eta.shape() {
            return Err(Error::InvalidIsomorphism(format!(
                "stored η is {}x{}, expected {}x{}",
                eta.nrows(),
                eta.ncols(),
                fresh.eta.nrows(),
                fresh.eta.ncols()
            )));
        }
        let mut iso = ProductIsomorphism { eta, ..fresh };
        iso.residuals = iso.compute_residuals();
        if iso.residuals.inverse > tol.eps_verify {
            return Err(Error::InvalidIsomorphism(format!(
                "stored η does not invert the multiplication map (residual {:.3e})",
                iso.residuals.inverse
            )));
        }
        Ok(iso)
    }

    fn compute_residuals(&self) -> IsomorphismResiduals {
        let (d1, d2) = (self.left.dim(), self.right.dim());
        let big_d = d1 * d2;
        let inverse =
            frobenius_norm(&(&self.eta * &self.eta_inv - ComplexMatrix::identity(big_d, big_d)));

        let n = self.left.ambient_dim();
        let u1 = self.left.coordinates(&identity(n));
        let u2 = self.right.coordinates(&identity(n));
        let unit = ComplexMatrix::from_fn(d1, d2, |i, j| u1[i] * u2[j]);
        let unital = frobenius_norm(&(self.product_coordinates(&identity(n)) - unit));

        // a_i* = Σ_p α[p, i] a_p and likewise for the c_j
        let star_coordinates = |a: &MatrixStarAlgebra| {
            let mut m = ComplexMatrix::zeros(a.dim(), a.dim());
            for (i, b) in a.basis().iter().enumerate() {
                m.set_column(i, &a.coordinates(&b.adjoint()));
            }
            m
        };
        let alpha = star_coordinates(&self.left);
        let beta = star_coordinates(&self.right);
        let adjoint = self
            .join
            .basis()
            .iter()
            .map(|z| {
                let t = self.product_coordinates(z);
                let star = &alpha * t.map(|x| x.conj()) * beta.transpose();
                frobenius_norm(&(self.product_coordinates(&z.adjoint()) - star))
            })
            .fold(0.0, f64::max);

        let multiplicative = if big_d <= 36 {
            let (l, r) = (self.left.basis(), self.right.basis());
            let ac: Vec<ComplexMatrix> = l
                .iter()
                .flat_map(|a| r.iter().map(move |c| a * c))
                .collect();
            let aa: Vec<ComplexMatrix> = l
                .iter()
                .flat_map(|a| l.iter().map(move |b| a * b))
                .collect();
            let cc: Vec<ComplexMatrix> = r
                .iter()
                .flat_map(|c| r.iter().map(move |e| c * e))
                .collect();
            let mut worst: f64 = 0.0;
            for i in 0..d1 {
                for j in 0..d2 {
                    for k in 0..d1 {
                        for m in 0..d2 {
                            let lhs = &ac[i * d2 + j] * &ac[k * d2 + m];
                            let rhs = &aa[i * d1 + k] * &cc[j * d2 + m];
                            worst = worst.max(frobenius_norm(&(lhs - rhs)));
                        }
                    }
                }
            }
            worst
        } else {
            // ‖a (c a' − a' c) c'‖ ≤ ‖a‖ ‖[c, a']‖ ‖c'‖ and basis elements have unit norm
            max_commutator(&self.left, &self.right).unwrap_or(f64::INFINITY)
        };
        IsomorphismResiduals {
            inverse,
            unital,
            adjoint,
            multiplicative,
        }
    }

    pub fn left(&self) -> &MatrixStarAlgebra {
        &self.left
    }

    pub fn right(&self) -> &MatrixStarAlgebra {
        &self.right
    }

    pub fn join(&self) -> &MatrixStarAlgebra {
        &self.join
    }

    /// `η` as a `D × D` matrix from join to product coordinates.
    pub fn matrix(&self) -> &ComplexMatrix {
        &self.eta
    }

    pub fn inverse_matrix(&self) -> &ComplexMatrix {
        &self.eta_inv
    }

    pub fn residuals(&self) -> IsomorphismResiduals {
        self.residuals
    }

    /// `η(Z)` as a `d1 × d2` coefficient matrix `T` with `η(Z) = Σ T_ij a_i ⊗ c_j`.
    pub fn product_coordinates(&self, z: &ComplexMatrix) -> ComplexMatrix {
        let t = &self.eta * self.join.coordinates(z);
        let d2 = self.right.dim();
        ComplexMatrix::from_fn(self.left.dim(), d2, |i, j| t[i * d2 + j])
    }

    /// `η⁻¹(Σ T_ij a_i ⊗ c_j) = Σ T_ij a_i c_j`.
    pub fn pull_back(&self, t: &ComplexMatrix) -> ComplexMatrix {
        let d2 = self.right.dim();
        let flat = DVector::from_fn(self.left.dim() * d2, |k, _| t[(k / d2, k % d2)]);
        let coords = &self.eta_inv * flat;
        self.join.from_coordinates(coords.as_slice())
    }

    /// `η(Z)` realized in `M_n ⊗ M_n`.
    pub fn tensor_image(&self, z: &ComplexMatrix) -> ComplexMatrix {
        let t = self.product_coordinates(z);
        let n = self.left.ambient_dim();
        let mut out = ComplexMatrix::zeros(n * n, n * n);
        for (i, a) in self.left.basis().iter().enumerate() {
            for (j, c) in self.right.basis().iter().enumerate() {
                if t[(i, j)] != ZERO {
                    out += crate::numerics::kron(a, c) * t[(i, j)];
                }
            }
        }
        out
    }
}

/// Decides whether `XY ↦ X ⊗ Y` extends to an isomorphism of the join with
/// the tensor product. In finite dimension this is exactly the dimension
/// count `dim(A1 ∨ A2) = dim A1 · dim A2`.
pub fn check_product_sense(
    a1: &MatrixStarAlgebra,
    a2: &MatrixStarAlgebra,
    tol: &Tolerances,
    seed: u64,
) -> Result<ProductSense> {
    match ProductIsomorphism::build(a1, a2, tol) {
        Ok(iso) => Ok(ProductSense::Holds(Box::new(iso))),
        Err(Error::NoProductIsomorphism { join, product }) => {
            dimension_witness(a1, a2, join, product, tol, seed)
                .map(|w| ProductSense::Fails(Box::new(w)))
        }
        Err(e) => Err(e),
    }
}

/// W*-independence in the product sense: a normal product state extending
/// any pair of normal states exists iff the product isomorphism does.
pub fn check_wstar_product_sense(
    a1: &MatrixStarAlgebra,
    a2: &MatrixStarAlgebra,
    tol: &Tolerances,
    seed: u64,
) -> Result<ProductSense> {
    check_product_sense(a1, a2, tol, seed)
}

fn dimension_witness(
    a1: &MatrixStarAlgebra,
    a2: &MatrixStarAlgebra,
    join_dim: usize,
    product_dim: usize,
    tol: &Tolerances,
    seed: u64,
) -> Result<DimensionWitness> {
    let m = multiplication_map(a1, a2);
    let kernel = null_space(&m)?;
    if kernel.ncols() == 0 {
        return Err(Error::IllConditioned(
            "dimension count fails but the multiplication map has no kernel".into(),
        ));
    }
    let (d1, d2) = (a1.dim(), a2.dim());
    let t = ComplexMatrix::from_fn(d1, d2, |i, j| kernel[(i * d2 + j, 0)]);
    let relation_residual = (&m * kernel.column(0)).norm();

    let n = a1.ambient_dim();
    let mut rng = seeded_rng(seed);
    let evaluate = |phi1: &AlgebraState, phi2: &AlgebraState| -> Complex64 {
        let v1: Vec<Complex64> = a1.basis().iter().map(|a| phi1.value(a)).collect();
        let v2: Vec<Complex64> = a2.basis().iter().map(|c| phi2.value(c)).collect();
        let mut s = ZERO;
        for i in 0..d1 {
            for j in 0..d2 {
                s += t[(i, j)] * v1[i] * v2[j];
            }
        }
        s
    };
    let mut best: Option<(AlgebraState, AlgebraState, Complex64)> = None;
    for attempt in 0..32 {
        let (r1, r2) = if attempt == 0 {
            (identity(n).unscale(n as f64), identity(n).unscale(n as f64))
        } else {
            (
                random_pure_density(n, &mut rng),
                random_pure_density(n, &mut rng),
            )
        };
        let phi1 = AlgebraState::new(a1.clone(), r1, tol)?;
        let phi2 = AlgebraState::new(a2.clone(), r2, tol)?;
        let value = evaluate(&phi1, &phi2);
        if best.as_ref().is_none_or(|b| value.norm() > b.2.norm()) {
            best = Some((phi1, phi2, value));
        }
        if best.as_ref().is_some_and(|b| b.2.norm() > 1e-3) {
            break;
        }
    }
    let (state1, state2, value) = best.expect("at least one attempt");
    Ok(DimensionWitness {
        join_dim,
        product_dim,
        relation: t,
        relation_residual,
        state1,
        state2,
        value,
    })
}
