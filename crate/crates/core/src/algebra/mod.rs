//! Unital *-subalgebras of `M_n`, stored as Hilbert–Schmidt orthonormal
//! bases of their linear span.
//!
//! Membership is a projection-residual test, so lattice operations, commutants
//! and conditional expectations all reduce to linear algebra on `vec(X)`.

mod structure;

pub use structure::{
    center, center_and_factor, structure_decomposition, Block, CenterInfo, StructureDecomposition,
};

use nalgebra::DVector;
use num_complex::Complex64;

use crate::channels::ChannelMap;
use crate::error::{Error, Result};
use crate::numerics::{
    commutator, frobenius_norm, identity, kron, matrix_unit, null_space, real, unvectorize,
    vectorize, ComplexMatrix, ComplexVector, OrthonormalSet, Tolerances,
};

#[derive(Debug, Clone)]
pub struct MatrixStarAlgebra {
    n: usize,
    basis: Vec<ComplexMatrix>,
    /// `n² × dim`, column k is `vec(basis[k])`.
    columns: ComplexMatrix,
}

impl PartialEq for MatrixStarAlgebra {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.basis == other.basis
    }
}

impl MatrixStarAlgebra {
    fn from_vectors(n: usize, vectors: Vec<ComplexVector>) -> Self {
        let dim = vectors.len();
        let mut columns = ComplexMatrix::zeros(n * n, dim);
        for (k, v) in vectors.iter().enumerate() {
            columns.set_column(k, v);
        }
        let basis = vectors
            .iter()
            .map(|v| unvectorize(v.as_slice(), n, n))
            .collect();
        MatrixStarAlgebra { n, basis, columns }
    }

    /// Orthonormalizes `spanning` and checks that the span is a unital
    /// *-algebra.
    pub fn from_spanning_set(
        n: usize,
        spanning: &[ComplexMatrix],
        tol: &Tolerances,
    ) -> Result<Self> {
        check_shapes(n, spanning)?;
        let mut set = OrthonormalSet::new(n * n);
        for m in spanning {
            set.try_push(&vectorize(m), tol.eps_algebra);
        }
        let alg = Self::from_vectors(n, set.into_vectors());
        alg.verify(tol)?;
        Ok(alg)
    }

    /// The full matrix algebra `M_n` with the matrix-unit basis.
    pub fn full(n: usize) -> Self {
        let mut vectors = Vec::with_capacity(n * n);
        for j in 0..n {
            for i in 0..n {
                vectors.push(vectorize(&matrix_unit(n, i, j)));
            }
        }
        Self::from_vectors(n, vectors)
    }

    /// Scalars `ℂ I` in `M_n`.
    pub fn scalars(n: usize) -> Self {
        let v = vectorize(&identity(n)).unscale((n as f64).sqrt());
        Self::from_vectors(n, vec![v])
    }

    /// `⊕_k M_{n_k} ⊗ 1_{m_k}` embedded block-diagonally, blocks in order.
    pub fn block_diagonal(blocks: &[(usize, usize)]) -> Self {
        let n: usize = blocks.iter().map(|&(s, m)| s * m).sum();
        let mut vectors = Vec::new();
        let mut offset = 0;
        for &(size, mult) in blocks {
            let norm = (mult as f64).sqrt();
            for i in 0..size {
                for j in 0..size {
                    let mut e = ComplexMatrix::zeros(n, n);
                    let unit = kron(&matrix_unit(size, i, j), &identity(mult));
                    e.view_mut((offset, offset), (size * mult, size * mult))
                        .copy_from(&unit);
                    vectors.push(vectorize(&e).unscale(norm));
                }
            }
            offset += size * mult;
        }
        Self::from_vectors(n, vectors)
    }

    /// `M_{d1} ⊗ 1_{d2}` inside `M_{d1 d2}`.
    pub fn tensor_left(d1: usize, d2: usize) -> Self {
        Self::full(d1).tensor(&Self::scalars(d2))
    }

    /// `1_{d1} ⊗ M_{d2}` inside `M_{d1 d2}`.
    pub fn tensor_right(d1: usize, d2: usize) -> Self {
        Self::scalars(d1).tensor(&Self::full(d2))
    }

    /// Spatial tensor product `A ⊗ B` inside `M_{n_A n_B}`.
    pub fn tensor(&self, other: &Self) -> Self {
        let n = self.n * other.n;
        let mut vectors = Vec::with_capacity(self.dim() * other.dim());
        for a in &self.basis {
            for b in &other.basis {
                vectors.push(vectorize(&kron(a, b)));
            }
        }
        Self::from_vectors(n, vectors)
    }

    /// `U A U*`.
    pub fn conjugated(&self, u: &ComplexMatrix) -> Self {
        let vectors = self
            .basis
            .iter()
            .map(|b| vectorize(&(u * b * u.adjoint())))
            .collect();
        Self::from_vectors(self.n, vectors)
    }

    pub fn ambient_dim(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[ComplexMatrix] {
        &self.basis
    }

    /// Basis as the columns of an `n² × dim` matrix.
    pub fn basis_columns(&self) -> &ComplexMatrix {
        &self.columns
    }

    pub fn is_full(&self) -> bool {
        self.dim() == self.n * self.n
    }

    /// Coordinates `⟨b_k, X⟩` of the orthogonal projection of `X`.
    pub fn coordinates(&self, x: &ComplexMatrix) -> ComplexVector {
        self.columns.ad_mul(&vectorize(x))
    }

    pub fn from_coordinates(&self, coords: &[Complex64]) -> ComplexMatrix {
        let v = &self.columns * DVector::from_column_slice(coords);
        unvectorize(v.as_slice(), self.n, self.n)
    }

    /// Hilbert–Schmidt orthogonal projection of `X` onto the span.
    pub fn project(&self, x: &ComplexMatrix) -> ComplexMatrix {
        let c = self.coordinates(x);
        self.from_coordinates(c.as_slice())
    }

    /// `‖X − P(X)‖_F / max(1, ‖X‖_F)`.
    pub fn membership_residual(&self, x: &ComplexMatrix) -> f64 {
        frobenius_norm(&(x - self.project(x))) / frobenius_norm(x).max(1.0)
    }

    pub fn contains(&self, x: &ComplexMatrix, tol: &Tolerances) -> bool {
        x.shape() == (self.n, self.n) && self.membership_residual(x) <= tol.eps_algebra
    }

    /// Largest membership residual of `other`'s basis in `self`.
    pub fn containment_residual(&self, other: &Self) -> f64 {
        other
            .basis
            .iter()
            .map(|b| self.membership_residual(b))
            .fold(0.0, f64::max)
    }

    /// Same span, compared by mutual projection residuals.
    pub fn same_span(&self, other: &Self, tol: &Tolerances) -> bool {
        self.n == other.n
            && self.dim() == other.dim()
            && self.containment_residual(other) <= tol.eps_algebra
            && other.containment_residual(self) <= tol.eps_algebra
    }

    /// An orthonormal basis of the span consisting of Hermitian matrices.
    pub fn hermitian_basis(&self) -> Vec<ComplexMatrix> {
        let mut set = OrthonormalSet::new(self.n * self.n);
        let half_i = Complex64::new(0.0, -0.5);
        for b in &self.basis {
            let re = (b + b.adjoint()).scale(0.5);
            let im = (b - b.adjoint()) * half_i;
            set.try_push(&vectorize(&re), 1e-10);
            set.try_push(&vectorize(&im), 1e-10);
            if set.len() == self.dim() {
                break;
            }
        }
        set.into_vectors()
            .into_iter()
            .map(|v| {
                let m = unvectorize(v.as_slice(), self.n, self.n);
                // Gram–Schmidt of Hermitian inputs keeps the residuals Hermitian
                // up to round-off; restore exact Hermiticity.
                (&m + m.adjoint()).scale(0.5)
            })
            .collect()
    }

    /// Checks the type invariants: orthonormal basis, unit in the span, span
    /// closed under adjoint and products.
    pub fn verify(&self, tol: &Tolerances) -> Result<()> {
        let dim = self.dim();
        let gram = self.columns.ad_mul(&self.columns);
        let ortho = frobenius_norm(&(gram - ComplexMatrix::identity(dim, dim)));
        if ortho > 1e-10 * (dim.max(1) as f64) {
            return Err(Error::NotSubalgebra(format!(
                "basis not orthonormal (residual {ortho:.3e})"
            )));
        }
        let unit = self.membership_residual(&identity(self.n));
        if unit > tol.eps_algebra {
            return Err(Error::NotSubalgebra(format!(
                "identity not in span (residual {unit:.3e})"
            )));
        }
        if self.is_full() {
            return Ok(());
        }
        for (i, bi) in self.basis.iter().enumerate() {
            let r = self.membership_residual(&bi.adjoint());
            if r > tol.eps_algebra {
                return Err(Error::NotSubalgebra(format!(
                    "span not closed under adjoint (basis {i}, residual {r:.3e})"
                )));
            }
            for (j, bj) in self.basis.iter().enumerate() {
                let r = self.membership_residual(&(bi * bj));
                if r > tol.eps_algebra {
                    return Err(Error::NotSubalgebra(format!(
                        "span not closed under products (basis {i},{j}, residual {r:.3e})"
                    )));
                }
            }
        }
        Ok(())
    }
}

fn check_shapes(n: usize, mats: &[ComplexMatrix]) -> Result<()> {
    for m in mats {
        if m.shape() != (n, n) {
            return Err(Error::shape(
                format!("{n}x{n}"),
                format!("{}x{}", m.nrows(), m.ncols()),
            ));
        }
    }
    Ok(())
}

pub(crate) fn check_ambient(a1: &MatrixStarAlgebra, a2: &MatrixStarAlgebra) -> Result<()> {
    if a1.n != a2.n {
        return Err(Error::AmbientMismatch(a1.n, a2.n));
    }
    Ok(())
}

/// Smallest unital *-subalgebra of `M_n` containing `generators`.
///
/// Grows the span of words in the generators and their adjoints one letter at
/// a time, orthonormalizing as it goes, until a round adds nothing.
pub fn generate_algebra(
    generators: &[ComplexMatrix],
    n: usize,
    tol: &Tolerances,
) -> Result<MatrixStarAlgebra> {
    check_shapes(n, generators)?;
    let mut letters = OrthonormalSet::new(n * n);
    for g in generators {
        letters.try_push(&vectorize(g), tol.eps_algebra);
        letters.try_push(&vectorize(&g.adjoint()), tol.eps_algebra);
    }
    let letters: Vec<ComplexMatrix> = letters
        .into_vectors()
        .iter()
        .map(|v| unvectorize(v.as_slice(), n, n))
        .collect();

    let mut span = OrthonormalSet::new(n * n);
    span.try_push(&vectorize(&identity(n)), tol.eps_algebra);
    let mut fresh: Vec<ComplexMatrix> = vec![identity(n).unscale((n as f64).sqrt())];
    for g in &letters {
        if span.try_push(&vectorize(g), tol.eps_algebra) {
            fresh.push(g.clone());
        }
    }
    while !fresh.is_empty() && !span.is_full() {
        let mut next = Vec::new();
        for w in &fresh {
            for g in &letters {
                let p = w * g;
                let v = vectorize(&p);
                let before = span.len();
                if span.try_push(&v, tol.eps_algebra) {
                    debug_assert_eq!(span.len(), before + 1);
                    next.push(p);
                }
            }
        }
        fresh = next;
    }
    if span.is_full() {
        return Ok(MatrixStarAlgebra::full(n));
    }
    Ok(MatrixStarAlgebra::from_vectors(n, span.into_vectors()))
}

/// `A1 ∨ A2`: the algebra generated by both.
pub fn join(
    a1: &MatrixStarAlgebra,
    a2: &MatrixStarAlgebra,
    tol: &Tolerances,
) -> Result<MatrixStarAlgebra> {
    check_ambient(a1, a2)?;
    let gens: Vec<ComplexMatrix> = a1.basis.iter().chain(a2.basis.iter()).cloned().collect();
    generate_algebra(&gens, a1.n, tol)
}

/// Orthonormal span of the pairwise products `{XY : X ∈ A1, Y ∈ A2}`.
///
/// For commuting algebras this is already the join.
pub fn product_span(
    a1: &MatrixStarAlgebra,
    a2: &MatrixStarAlgebra,
    tol: &Tolerances,
) -> Result<Vec<ComplexMatrix>> {
    check_ambient(a1, a2)?;
    let n = a1.n;
    let mut set = OrthonormalSet::new(n * n);
    for x in &a1.basis {
        for y in &a2.basis {
            set.try_push(&vectorize(&(x * y)), tol.eps_algebra);
        }
    }
    Ok(set
        .into_vectors()
        .iter()
        .map(|v| unvectorize(v.as_slice(), n, n))
        .collect())
}

/// Superoperator `X ↦ [b, X]` in the column-major vec convention.
fn commutator_superoperator(b: &ComplexMatrix) -> ComplexMatrix {
    let n = b.nrows();
    kron(&identity(n), b) - kron(&b.transpose(), &identity(n))
}

/// `A′ = {X : Xb = bX for every basis element b}`.
pub fn commutant(a: &MatrixStarAlgebra) -> Result<MatrixStarAlgebra> {
    let n = a.n;
    // scalar multiples of the unit impose no constraint
    let generators: Vec<&ComplexMatrix> = a
        .basis
        .iter()
        .filter(|b| frobenius_norm(&(*b - identity(n) * normalized_trace(b))) > 1e-12)
        .collect();
    let rows = generators.len() * n * n;
    let mut stacked = ComplexMatrix::zeros(rows, n * n);
    for (k, b) in generators.iter().enumerate() {
        stacked
            .view_mut((k * n * n, 0), (n * n, n * n))
            .copy_from(&commutator_superoperator(b));
    }
    let kernel = null_space(&stacked)?;
    let vectors = (0..kernel.ncols())
        .map(|k| kernel.column(k).into_owned())
        .collect();
    Ok(MatrixStarAlgebra::from_vectors(n, vectors))
}

/// True iff every pair of basis elements commutes to within `eps_algebra`.
pub fn mutually_commute(
    a1: &MatrixStarAlgebra,
    a2: &MatrixStarAlgebra,
    tol: &Tolerances,
) -> Result<bool> {
    Ok(max_commutator(a1, a2)? <= tol.eps_algebra)
}

/// Largest Frobenius norm of `[x, y]` over basis pairs.
pub fn max_commutator(a1: &MatrixStarAlgebra, a2: &MatrixStarAlgebra) -> Result<f64> {
    check_ambient(a1, a2)?;
    let mut worst: f64 = 0.0;
    for x in &a1.basis {
        for y in &a2.basis {
            worst = worst.max(frobenius_norm(&commutator(x, y)));
        }
    }
    Ok(worst)
}

/// The trace-preserving conditional expectation `E : M_n → A`, i.e. the
/// Hilbert–Schmidt orthogonal projection onto the span of `A`.
pub fn conditional_expectation(a: &MatrixStarAlgebra, tol: &Tolerances) -> ChannelMap {
    let b = a.basis_columns();
    let action = b * b.adjoint();
    ChannelMap::from_action(MatrixStarAlgebra::full(a.n), a.n, action).certify(tol)
}

/// Normalized trace as a coefficient: `tr(X)/n`.
pub fn normalized_trace(x: &ComplexMatrix) -> Complex64 {
    crate::numerics::trace(x) / real(x.nrows() as f64)
}
