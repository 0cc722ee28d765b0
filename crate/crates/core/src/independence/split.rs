use serde::{Deserialize, Serialize};

use crate::algebra::{
    commutant, max_commutator, mutually_commute, structure_decomposition, MatrixStarAlgebra,
    StructureDecomposition,
};
use crate::error::{Error, Result};
use crate::numerics::{
    eig_hermitian_unchecked, frobenius_norm, hermitian_part, identity, kron, trace, ComplexMatrix,
    Tolerances,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FactorRoute {
    /// `N1` is itself a factor.
    FirstIsFactor,
    /// The commutant of `N2` is a factor.
    CommutantIsFactor,
    /// Built from a rank-one multiplicity table.
    Multiplicity,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FactorResiduals {
    /// `‖U U* − I‖_F`.
    pub unitary: f64,
    /// Distance of `U X U*` from `M_{d1} ⊗ 1`, worst over the basis of `N1`.
    pub left: f64,
    /// Distance of `U Y U*` from `1 ⊗ M_{d2}`, worst over the basis of `N2`.
    pub right: f64,
    /// `max ‖U XY U* − x ⊗ y‖` over basis pairs.
    pub product: f64,
    /// Residual of `N1 ⊆ M`.
    pub containment: f64,
    /// Largest commutator between `M` and `N2`.
    pub commutation: f64,
}

/// A type I factor `M` with `N1 ⊆ M ⊆ N2′`, and a unitary
/// `U : ℂⁿ → ℂ^{d1} ⊗ ℂ^{d2}` with `U M U* = M_{d1} ⊗ 1`.
#[derive(Debug, Clone)]
pub struct InterpolatingFactor {
    pub factor: MatrixStarAlgebra,
    pub unitary: ComplexMatrix,
    pub d1: usize,
    pub d2: usize,
    pub route: FactorRoute,
    pub residuals: FactorResiduals,
}

#[derive(Debug, Clone)]
pub enum FactorSearch {
    Found(Box<InterpolatingFactor>),
    /// No interpolating factor exists. `multiplicities[k][j]` is the rank of
    /// `e^k f^j` for minimal projections of the `k`-th block of `N1` and the
    /// `j`-th block of `N2`; a factor exists iff this table is `p tᵀ` for
    /// positive integer vectors.
    NotFound {
        reason: String,
        multiplicities: Vec<Vec<usize>>,
    },
    Undecided(String),
}

impl FactorSearch {
    pub fn is_found(&self) -> bool {
        matches!(self, FactorSearch::Found(_))
    }
}

/// `(1/d2) Tr₂ Y` for `Y` on `ℂ^{d1} ⊗ ℂ^{d2}`.
pub fn left_part(y: &ComplexMatrix, d1: usize, d2: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(d1, d1, |a, b| {
        (0..d2)
            .map(|l| y[(a * d2 + l, b * d2 + l)])
            .sum::<num_complex::Complex64>()
            / d2 as f64
    })
}

/// `(1/d1) Tr₁ Y` for `Y` on `ℂ^{d1} ⊗ ℂ^{d2}`.
pub fn right_part(y: &ComplexMatrix, d1: usize, d2: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(d2, d2, |a, b| {
        (0..d1)
            .map(|l| y[(l * d2 + a, l * d2 + b)])
            .sum::<num_complex::Complex64>()
            / d1 as f64
    })
}

/// Residuals of a candidate `(M, U)` for the pair `(N1, N2)`.
pub fn factor_residuals(
    n1: &MatrixStarAlgebra,
    n2: &MatrixStarAlgebra,
    factor: &MatrixStarAlgebra,
    u: &ComplexMatrix,
    d1: usize,
    d2: usize,
) -> Result<FactorResiduals> {
    let n = n1.ambient_dim();
    if u.shape() != (n, n) || d1 * d2 != n {
        return Err(Error::shape(
            format!("{n}x{n} unitary with d1·d2 = {n}"),
            format!("{}x{} with {d1}·{d2}", u.nrows(), u.ncols()),
        ));
    }
    let conj = |x: &ComplexMatrix| u * x * u.adjoint();
    let mut r = FactorResiduals {
        unitary: frobenius_norm(&(u * u.adjoint() - identity(n))),
        ..Default::default()
    };
    let lefts: Vec<ComplexMatrix> = n1
        .basis()
        .iter()
        .map(|x| {
            let y = conj(x);
            let part = left_part(&y, d1, d2);
            r.left = r
                .left
                .max(frobenius_norm(&(y - kron(&part, &identity(d2)))));
            part
        })
        .collect();
    let rights: Vec<ComplexMatrix> = n2
        .basis()
        .iter()
        .map(|x| {
            let y = conj(x);
            let part = right_part(&y, d1, d2);
            r.right = r
                .right
                .max(frobenius_norm(&(y - kron(&identity(d1), &part))));
            part
        })
        .collect();
    for (x, xl) in n1.basis().iter().zip(&lefts) {
        for (y, yr) in n2.basis().iter().zip(&rights) {
            let d = frobenius_norm(&(conj(&(x * y)) - kron(xl, yr)));
            r.product = r.product.max(d);
        }
    }
    r.containment = factor.containment_residual(n1);
    r.commutation = max_commutator(factor, n2)?;
    Ok(r)
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// `μ = p tᵀ` with positive integers, if possible.
pub(crate) fn factor_table(mu: &[Vec<usize>]) -> Option<(Vec<usize>, Vec<usize>)> {
    if mu.iter().flatten().any(|&x| x == 0) {
        return None;
    }
    let p: Vec<usize> = mu
        .iter()
        .map(|row| row.iter().fold(0, |g, &x| gcd(g, x)))
        .collect();
    let t: Vec<usize> = mu[0].iter().map(|&x| x / p[0]).collect();
    let ok = mu
        .iter()
        .zip(&p)
        .all(|(row, &pk)| row.iter().zip(&t).all(|(&x, &tj)| x == pk * tj));
    ok.then_some((p, t))
}

fn multiplicity_table(
    dec1: &StructureDecomposition,
    dec2: &StructureDecomposition,
) -> Result<Vec<Vec<usize>>> {
    let mut mu = Vec::with_capacity(dec1.blocks.len());
    for k in 0..dec1.blocks.len() {
        let e = dec1.matrix_unit(k, 0, 0);
        let mut row = Vec::with_capacity(dec2.blocks.len());
        for j in 0..dec2.blocks.len() {
            let f = dec2.matrix_unit(j, 0, 0);
            let rank = trace(&(&e * &f)).re;
            if (rank - rank.round()).abs() > 1e-6 {
                return Err(Error::IllConditioned(format!(
                    "block overlap has non-integral rank {rank}"
                )));
            }
            row.push(rank.round() as usize);
        }
        mu.push(row);
    }
    Ok(mu)
}

/// Unitary from a single-block decomposition: `U = W*`.
fn from_single_block(dec: &StructureDecomposition) -> (ComplexMatrix, usize, usize) {
    let b = dec.blocks[0];
    (dec.intertwiner.adjoint(), b.size, b.multiplicity)
}

fn build_from_table(
    dec1: &StructureDecomposition,
    dec2: &StructureDecomposition,
    p: &[usize],
    t: &[usize],
    n: usize,
) -> (ComplexMatrix, usize, usize) {
    let off1: Vec<usize> = dec1
        .blocks
        .iter()
        .zip(p)
        .scan(0, |acc, (b, &pk)| {
            let o = *acc;
            *acc += b.size * pk;
            Some(o)
        })
        .collect();
    let off2: Vec<usize> = dec2
        .blocks
        .iter()
        .zip(t)
        .scan(0, |acc, (b, &tj)| {
            let o = *acc;
            *acc += b.size * tj;
            Some(o)
        })
        .collect();
    let d1: usize = dec1.blocks.iter().zip(p).map(|(b, pk)| b.size * pk).sum();
    let d2: usize = dec2.blocks.iter().zip(t).map(|(b, tj)| b.size * tj).sum();
    let mut u_adj = ComplexMatrix::zeros(n, d1 * d2);
    for (k, bk) in dec1.blocks.iter().enumerate() {
        let e00 = dec1.matrix_unit(k, 0, 0);
        for (j, bj) in dec2.blocks.iter().enumerate() {
            let f00 = dec2.matrix_unit(j, 0, 0);
            let range = eig_hermitian_unchecked(&hermitian_part(&(&e00 * &f00)));
            let support: Vec<usize> = (0..n).filter(|&c| range.values[c] > 0.5).collect();
            for (c, &col) in support.iter().enumerate() {
                let w = range.vectors.column(col);
                let (c1, c2) = (c / t[j], c % t[j]);
                for i in 0..bk.size {
                    let ei = dec1.matrix_unit(k, i, 0);
                    for alpha in 0..bj.size {
                        let fa = dec2.matrix_unit(j, alpha, 0);
                        let v = &ei * (&fa * w);
                        let idx1 = off1[k] + i * p[k] + c1;
                        let idx2 = off2[j] + alpha * t[j] + c2;
                        u_adj.set_column(idx1 * d2 + idx2, &v);
                    }
                }
            }
        }
    }
    (u_adj.adjoint(), d1, d2)
}

/// Searches for a type I factor `M` with `N1 ⊆ M ⊆ N2′`.
///
/// Tries `M = N1` and `M = N2′` first. Otherwise such an `M` exists exactly
/// when the multiplicity table of the pair has rank one over the positive
/// integers, and the tensor splitting is then assembled from matrix units of
/// both algebras.
pub fn find_interpolating_factor(
    n1: &MatrixStarAlgebra,
    n2: &MatrixStarAlgebra,
    tol: &Tolerances,
) -> Result<FactorSearch> {
    if !mutually_commute(n1, n2, tol)? {
        return Err(Error::NotCommuting(max_commutator(n1, n2)?));
    }
    let n = n1.ambient_dim();
    let dec1 = structure_decomposition(n1, tol)?;
    let (factor, (u, d1, d2), route) = if dec1.blocks.len() == 1 {
        (
            n1.clone(),
            from_single_block(&dec1),
            FactorRoute::FirstIsFactor,
        )
    } else {
        let c2 = commutant(n2)?;
        let dec_c2 = structure_decomposition(&c2, tol)?;
        if dec_c2.blocks.len() == 1 {
            (
                c2,
                from_single_block(&dec_c2),
                FactorRoute::CommutantIsFactor,
            )
        } else {
            let dec2 = structure_decomposition(n2, tol)?;
            let mu = multiplicity_table(&dec1, &dec2)?;
            let Some((p, t)) = factor_table(&mu) else {
                return Ok(FactorSearch::NotFound {
                    reason: "multiplicity table is not a product of positive integer vectors"
                        .into(),
                    multiplicities: mu,
                });
            };
            let (u, d1, d2) = build_from_table(&dec1, &dec2, &p, &t, n);
            let units: Vec<ComplexMatrix> = (0..d1)
                .flat_map(|a| (0..d1).map(move |b| (a, b)))
                .map(|(a, b)| {
                    let e = kron(&crate::numerics::matrix_unit(d1, a, b), &identity(d2));
                    u.adjoint() * e * &u
                })
                .collect();
            let factor = MatrixStarAlgebra::from_spanning_set(n, &units, tol)?;
            (factor, (u, d1, d2), FactorRoute::Multiplicity)
        }
    };
    let residuals = factor_residuals(n1, n2, &factor, &u, d1, d2)?;
    let verified = residuals.unitary <= 1e-10 * n as f64
        && residuals.left.max(residuals.right).max(residuals.product) <= tol.eps_verify
        && residuals.containment <= tol.eps_algebra.max(tol.eps_verify)
        && residuals.commutation <= tol.eps_verify;
    if !verified {
        return Ok(FactorSearch::Undecided(format!(
            "candidate factor failed verification: {residuals:?}"
        )));
    }
    Ok(FactorSearch::Found(Box::new(InterpolatingFactor {
        factor,
        unitary: u,
        d1,
        d2,
        route,
        residuals,
    })))
}

/// Spatial product sense: the canonical map extends to a unitary
/// `ℂⁿ → ℂ^{d1} ⊗ ℂ^{d2}` sending `XY` to `x ⊗ y`. Equivalent to the
/// existence of an interpolating type I factor, whose unitary is the
/// certificate.
pub fn check_spatial_product_sense(
    n1: &MatrixStarAlgebra,
    n2: &MatrixStarAlgebra,
    tol: &Tolerances,
) -> Result<FactorSearch> {
    find_interpolating_factor(n1, n2, tol)
}
