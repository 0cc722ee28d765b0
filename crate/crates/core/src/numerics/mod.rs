//! Dense complex linear algebra used by every other module.
//!
//! Matrices are `nalgebra` dynamic matrices over `Complex64`. Vectorization is
//! column-major throughout: `vec(X)[i + rows * j] = X[(i, j)]`, so that
//! `vec(A X B) = (Bᵀ ⊗ A) vec(X)`.

mod random;

pub use random::{
    ginibre, haar_unitary, haar_unitary_with, random_density, random_hermitian,
    random_pure_density, random_unit_vector, seeded_rng, SeededRng,
};

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type ComplexMatrix = DMatrix<Complex64>;
pub type ComplexVector = DVector<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

/// Numerical contract shared by all checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Allowed Hermiticity residual, relative to `max(1, ‖H‖_F)`.
    pub eps_herm: f64,
    /// Eigenvalue floor for positivity.
    pub eps_psd: f64,
    /// Closure / membership residual for algebra spans.
    pub eps_algebra: f64,
    /// Residual accepted when re-checking a certificate.
    pub eps_verify: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            eps_herm: 1e-9,
            eps_psd: 1e-9,
            eps_algebra: 1e-9,
            eps_verify: 1e-8,
        }
    }
}

impl Tolerances {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("eps_herm", self.eps_herm),
            ("eps_psd", self.eps_psd),
            ("eps_algebra", self.eps_algebra),
            ("eps_verify", self.eps_verify),
        ];
        for (name, value) in fields {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::Validation {
                    path: format!("tolerances.{name}"),
                    message: format!("must be a finite positive number, got {value}"),
                });
            }
        }
        Ok(())
    }

    /// Same tolerances with every field scaled by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Tolerances {
            eps_herm: self.eps_herm * factor,
            eps_psd: self.eps_psd * factor,
            eps_algebra: self.eps_algebra * factor,
            eps_verify: self.eps_verify * factor,
        }
    }
}

/// Eigen-decomposition of a Hermitian matrix with ascending eigenvalues.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors as columns, in the order of `values`.
    pub vectors: ComplexMatrix,
}

impl HermitianEigen {
    pub fn min(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    pub fn max(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    /// `Q diag(f(λ)) Q*`.
    pub fn map_spectrum(&self, f: impl Fn(f64) -> f64) -> ComplexMatrix {
        let n = self.vectors.nrows();
        let mut scaled = self.vectors.clone();
        for (k, &lambda) in self.values.iter().enumerate() {
            let w = f(lambda);
            scaled.column_mut(k).scale_mut(w);
        }
        let out = &scaled * self.vectors.adjoint();
        debug_assert_eq!(out.nrows(), n);
        out
    }
}

pub fn identity(n: usize) -> ComplexMatrix {
    ComplexMatrix::identity(n, n)
}

pub fn zeros(rows: usize, cols: usize) -> ComplexMatrix {
    ComplexMatrix::zeros(rows, cols)
}

/// Matrix unit `E_ij` in `M_n`.
pub fn matrix_unit(n: usize, i: usize, j: usize) -> ComplexMatrix {
    let mut e = zeros(n, n);
    e[(i, j)] = ONE;
    e
}

pub fn real(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

pub fn frobenius_norm(a: &ComplexMatrix) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Largest singular value.
pub fn operator_norm(a: &ComplexMatrix) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.clone()
        .singular_values()
        .iter()
        .copied()
        .fold(0.0, f64::max)
}

pub fn trace(a: &ComplexMatrix) -> Complex64 {
    a.diagonal().iter().sum()
}

pub fn hermiticity_residual(h: &ComplexMatrix) -> f64 {
    frobenius_norm(&(h - h.adjoint()))
}

/// `(H + H*) / 2`.
pub fn hermitian_part(h: &ComplexMatrix) -> ComplexMatrix {
    (h + h.adjoint()).scale(0.5)
}

fn check_hermitian(h: &ComplexMatrix, tol: &Tolerances) -> Result<()> {
    if !h.is_square() {
        return Err(Error::shape(
            "square matrix",
            format!("{}x{}", h.nrows(), h.ncols()),
        ));
    }
    let residual = hermiticity_residual(h);
    if residual > tol.eps_herm * frobenius_norm(h).max(1.0) {
        return Err(Error::NonHermitian { residual });
    }
    Ok(())
}

/// Spectral decomposition `H = Q Λ Q*` with eigenvalues in ascending order.
pub fn eig_hermitian(h: &ComplexMatrix, tol: &Tolerances) -> Result<HermitianEigen> {
    check_hermitian(h, tol)?;
    Ok(eig_hermitian_unchecked(&hermitian_part(h)))
}

pub(crate) fn eig_hermitian_unchecked(h: &ComplexMatrix) -> HermitianEigen {
    let n = h.nrows();
    if n == 0 {
        return HermitianEigen {
            values: Vec::new(),
            vectors: zeros(0, 0),
        };
    }
    let eig = SymmetricEigen::new(h.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    HermitianEigen { values, vectors }
}

pub fn min_eigenvalue(h: &ComplexMatrix, tol: &Tolerances) -> Result<f64> {
    Ok(eig_hermitian(h, tol)?.min())
}

/// True iff the smallest eigenvalue is at least `-eps_psd`.
pub fn is_psd(h: &ComplexMatrix, tol: &Tolerances) -> Result<bool> {
    Ok(min_eigenvalue(h, tol)? >= -tol.eps_psd)
}

pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kronecker(b)
}

/// Hilbert–Schmidt inner product `tr(A* B)`.
pub fn hs_inner(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<Complex64> {
    if a.shape() != b.shape() {
        return Err(Error::shape(
            format!("{}x{}", a.nrows(), a.ncols()),
            format!("{}x{}", b.nrows(), b.ncols()),
        ));
    }
    Ok(a.dotc(b))
}

/// Column-major vectorization.
pub fn vectorize(x: &ComplexMatrix) -> ComplexVector {
    ComplexVector::from_column_slice(x.as_slice())
}

pub fn unvectorize(v: &[Complex64], rows: usize, cols: usize) -> ComplexMatrix {
    ComplexMatrix::from_column_slice(rows, cols, v)
}

pub fn commutator(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a * b - b * a
}

/// Orthonormal basis of the kernel of `l`, returned as columns.
///
/// Singular values at or below `1e-9 * σ_max` count as zero, as does anything
/// below an absolute floor of `1e-11`: operators here are built from
/// orthonormal bases, so a map that is zero up to rounding must not have its
/// noise read as a range. When both a
/// kernel and a range are present the gap between them must be at least
/// three decades, otherwise the kernel dimension is ambiguous.
pub fn null_space(l: &ComplexMatrix) -> Result<ComplexMatrix> {
    const RELATIVE_THRESHOLD: f64 = 1e-9;
    const MIN_GAP: f64 = 1e3;
    const ABSOLUTE_FLOOR: f64 = 1e-11;
    let cols = l.ncols();
    if cols == 0 {
        return Ok(zeros(0, 0));
    }
    let square = compress_rows(l);
    let svd = SVD::new(square, false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let sigma = &svd.singular_values;
    let sigma_max = sigma.iter().copied().fold(0.0, f64::max);
    if sigma_max <= ABSOLUTE_FLOOR {
        return Ok(identity(cols));
    }
    let threshold = (RELATIVE_THRESHOLD * sigma_max).max(ABSOLUTE_FLOOR);
    let mut kernel_idx = Vec::new();
    let mut largest_kernel: f64 = 0.0;
    let mut smallest_range = f64::INFINITY;
    for (k, &s) in sigma.iter().enumerate() {
        if s <= threshold {
            kernel_idx.push(k);
            largest_kernel = largest_kernel.max(s);
        } else {
            smallest_range = smallest_range.min(s);
        }
    }
    if !kernel_idx.is_empty() && smallest_range.is_finite() && largest_kernel > 0.0 {
        let gap = smallest_range / largest_kernel;
        if gap < MIN_GAP {
            return Err(Error::IllConditioned(format!(
                "kernel spectral gap {gap:.3e} below {MIN_GAP:.0e}"
            )));
        }
    }
    let mut basis = zeros(cols, kernel_idx.len());
    for (dst, &k) in kernel_idx.iter().enumerate() {
        let row = v_t.row(k);
        for i in 0..cols {
            basis[(i, dst)] = row[i].conj();
        }
    }
    Ok(basis)
}

/// Square matrix `R` with `R* R = L* L`, obtained by blockwise QR so that tall
/// operators never have to be decomposed in one piece.
fn compress_rows(l: &ComplexMatrix) -> ComplexMatrix {
    let (rows, cols) = l.shape();
    if rows <= cols {
        let mut padded = zeros(cols, cols);
        padded.view_mut((0, 0), (rows, cols)).copy_from(l);
        return padded;
    }
    let mut acc: Option<ComplexMatrix> = None;
    let mut start = 0;
    while start < rows {
        let take = cols.min(rows - start);
        let chunk = l.rows(start, take);
        let stacked = match &acc {
            None => chunk.into_owned(),
            Some(r) => {
                let mut s = zeros(r.nrows() + take, cols);
                s.view_mut((0, 0), (r.nrows(), cols)).copy_from(r);
                s.view_mut((r.nrows(), 0), (take, cols)).copy_from(&chunk);
                s
            }
        };
        acc = Some(if stacked.nrows() > cols {
            stacked.qr().r()
        } else {
            stacked
        });
        start += take;
    }
    let r = acc.expect("at least one row block");
    let mut padded = zeros(cols, cols);
    padded.view_mut((0, 0), (r.nrows(), cols)).copy_from(&r);
    padded
}

/// A matrix in the interchange format: rows of `[re, im]` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct JsonMatrix(pub ComplexMatrix);

impl JsonMatrix {
    pub fn into_inner(self) -> ComplexMatrix {
        self.0
    }
}

impl From<ComplexMatrix> for JsonMatrix {
    fn from(m: ComplexMatrix) -> Self {
        JsonMatrix(m)
    }
}

impl From<&ComplexMatrix> for JsonMatrix {
    fn from(m: &ComplexMatrix) -> Self {
        JsonMatrix(m.clone())
    }
}

impl Serialize for JsonMatrix {
    fn serialize<S: serde::Serializer>(
        &self,
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<Vec<[f64; 2]>> = (0..self.0.nrows())
            .map(|i| self.0.row(i).iter().map(|z| [z.re, z.im]).collect())
            .collect();
        rows.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for JsonMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<[f64; 2]>>::deserialize(deserializer)?;
        matrix_from_rows(&rows)
            .map(JsonMatrix)
            .map_err(serde::de::Error::custom)
    }
}

/// Builds a matrix from rows of `[re, im]` pairs; rows must have equal length.
pub fn matrix_from_rows(rows: &[Vec<[f64; 2]>]) -> std::result::Result<ComplexMatrix, String> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if let Some((i, row)) = rows.iter().enumerate().find(|(_, row)| row.len() != c) {
        return Err(format!("row {i} has {} entries, expected {c}", row.len()));
    }
    for (i, row) in rows.iter().enumerate() {
        for (j, z) in row.iter().enumerate() {
            if !z[0].is_finite() || !z[1].is_finite() {
                return Err(format!("entry ({i}, {j}) is not finite"));
            }
        }
    }
    Ok(ComplexMatrix::from_fn(r, c, |i, j| {
        Complex64::new(rows[i][j][0], rows[i][j][1])
    }))
}

/// Incrementally maintained orthonormal family in a complex inner-product
/// space of column vectors (classical Gram–Schmidt with one
/// re-orthogonalization pass).
#[derive(Debug, Clone)]
pub(crate) struct OrthonormalSet {
    vectors: Vec<ComplexVector>,
    dim: usize,
}

impl OrthonormalSet {
    pub(crate) fn new(dim: usize) -> Self {
        OrthonormalSet {
            vectors: Vec::new(),
            dim,
        }
    }

    pub(crate) fn len(&self) -> usize {
        self.vectors.len()
    }

    pub(crate) fn is_full(&self) -> bool {
        self.vectors.len() >= self.dim
    }

    pub(crate) fn residual(&self, v: &ComplexVector) -> ComplexVector {
        let mut r = v.clone();
        for _ in 0..2 {
            for q in &self.vectors {
                let c = q.dotc(&r);
                r.axpy(-c, q, ONE);
            }
        }
        r
    }

    /// Adds the normalized residual of `v` if its norm exceeds
    /// `rel_tol * max(‖v‖, 1)`. Returns whether the span grew.
    pub(crate) fn try_push(&mut self, v: &ComplexVector, rel_tol: f64) -> bool {
        if self.is_full() {
            return false;
        }
        let scale = v.norm().max(1.0);
        let r = self.residual(v);
        let norm = r.norm();
        if norm <= rel_tol * scale {
            return false;
        }
        self.vectors.push(r.unscale(norm));
        true
    }

    pub(crate) fn into_vectors(self) -> Vec<ComplexVector> {
        self.vectors
    }
}
