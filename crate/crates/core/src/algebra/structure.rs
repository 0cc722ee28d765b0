//! Center, minimal central projections and the Wedderburn block form
//! `W* A W = ⊕_k M_{n_k} ⊗ 1_{m_k}`.

use std::ops::Range;

use num_complex::Complex64;
use rand::Rng;

use super::MatrixStarAlgebra;
use crate::error::{Error, Result};
use crate::numerics::{
    eig_hermitian_unchecked, frobenius_norm, identity, kron, null_space, real, seeded_rng,
    vectorize, ComplexMatrix, Tolerances,
};

const ATTEMPTS: u64 = 6;
const SEED_BASE: u64 = 0x0c3e_7a11;

/// `A ∩ A′`, computed in the coordinates of `A`'s basis.
pub fn center(a: &MatrixStarAlgebra) -> Result<MatrixStarAlgebra> {
    let n = a.ambient_dim();
    let dim = a.dim();
    let mut stacked = ComplexMatrix::zeros(dim * n * n, dim);
    for (j, bj) in a.basis().iter().enumerate() {
        for (i, bi) in a.basis().iter().enumerate() {
            let c = vectorize(&(bj * bi - bi * bj));
            stacked.view_mut((j * n * n, i), (n * n, 1)).copy_from(&c);
        }
    }
    let kernel = null_space(&stacked)?;
    let vectors = (0..kernel.ncols())
        .map(|k| a.basis_columns() * kernel.column(k))
        .collect();
    Ok(MatrixStarAlgebra::from_vectors(n, vectors))
}

#[derive(Debug, Clone)]
pub struct CenterInfo {
    pub center: MatrixStarAlgebra,
    pub is_factor: bool,
    /// Orthogonal minimal projections of the center, summing to `I`.
    pub minimal_central_projections: Vec<ComplexMatrix>,
}

/// Consecutive runs of ascending eigenvalues separated by more than `gap`.
fn clusters(values: &[f64], gap: f64) -> Vec<Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    for k in 1..=values.len() {
        if k == values.len() || values[k] - values[k - 1] > gap {
            out.push(start..k);
            start = k;
        }
    }
    out
}

fn spectral_projection(vectors: &ComplexMatrix, range: Range<usize>) -> ComplexMatrix {
    let v = vectors.columns(range.start, range.len());
    v * v.adjoint()
}

/// Random real combination of a Hermitian basis, coefficients in `[-1, 1]`.
fn generic_hermitian<R: Rng>(basis: &[ComplexMatrix], n: usize, rng: &mut R) -> ComplexMatrix {
    let mut h = ComplexMatrix::zeros(n, n);
    for b in basis {
        let c: f64 = rng.random_range(-1.0..1.0);
        h += b * real(c);
    }
    h
}

pub fn center_and_factor(a: &MatrixStarAlgebra, tol: &Tolerances) -> Result<CenterInfo> {
    let n = a.ambient_dim();
    let z = center(a)?;
    if z.dim() == 1 {
        return Ok(CenterInfo {
            center: z,
            is_factor: true,
            minimal_central_projections: vec![identity(n)],
        });
    }
    let herm = z.hermitian_basis();
    for attempt in 0..ATTEMPTS {
        let mut rng = seeded_rng(SEED_BASE + attempt);
        let h = generic_hermitian(&herm, n, &mut rng);
        let eig = eig_hermitian_unchecked(&h);
        let groups = clusters(&eig.values, 1e-7);
        if groups.len() != z.dim() {
            continue;
        }
        let projections: Vec<ComplexMatrix> = groups
            .into_iter()
            .map(|r| spectral_projection(&eig.vectors, r))
            .collect();
        if projections.iter().all(|p| z.contains(p, &tol.scaled(10.0))) {
            let projections = projections.iter().map(|p| z.project(p)).collect();
            return Ok(CenterInfo {
                center: z,
                is_factor: false,
                minimal_central_projections: projections,
            });
        }
    }
    Err(Error::IllConditioned(
        "could not separate the minimal central projections".into(),
    ))
}

/// One Wedderburn block: `M_size ⊗ 1_multiplicity`, occupying rows
/// `offset .. offset + size * multiplicity` after conjugation by the
/// intertwiner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Block {
    pub size: usize,
    pub multiplicity: usize,
    pub offset: usize,
}

impl Block {
    pub fn width(&self) -> usize {
        self.size * self.multiplicity
    }
}

#[derive(Debug, Clone)]
pub struct StructureDecomposition {
    pub blocks: Vec<Block>,
    /// Unitary `W` with `W* A W = ⊕_k M_{n_k} ⊗ 1_{m_k}`.
    pub intertwiner: ComplexMatrix,
}

impl StructureDecomposition {
    /// Block components `X_k` of `W* x W = ⊕ X_k ⊗ 1_{m_k}` together with the
    /// residual of `x` from that form.
    pub fn components(&self, x: &ComplexMatrix) -> (Vec<ComplexMatrix>, f64) {
        let w = &self.intertwiner;
        let y = w.adjoint() * x * w;
        let mut rebuilt = ComplexMatrix::zeros(y.nrows(), y.ncols());
        let mut parts = Vec::with_capacity(self.blocks.len());
        for b in &self.blocks {
            let m = b.multiplicity;
            let mut xk = ComplexMatrix::zeros(b.size, b.size);
            for i in 0..b.size {
                for j in 0..b.size {
                    let mut s = Complex64::new(0.0, 0.0);
                    for l in 0..m {
                        s += y[(b.offset + i * m + l, b.offset + j * m + l)];
                    }
                    xk[(i, j)] = s / real(m as f64);
                }
            }
            rebuilt
                .view_mut((b.offset, b.offset), (b.width(), b.width()))
                .copy_from(&kron(&xk, &identity(m)));
            parts.push(xk);
        }
        let residual = frobenius_norm(&(y - rebuilt));
        (parts, residual)
    }

    /// Matrix unit `e^k_{ij}` of block `k` as an ambient matrix.
    pub fn matrix_unit(&self, k: usize, i: usize, j: usize) -> ComplexMatrix {
        let b = &self.blocks[k];
        let w = &self.intertwiner;
        let m = b.multiplicity;
        let mut out = ComplexMatrix::zeros(w.nrows(), w.nrows());
        for l in 0..m {
            let wi = w.column(b.offset + i * m + l);
            let wj = w.column(b.offset + j * m + l);
            out += wi * wj.adjoint();
        }
        out
    }

    /// Columns of the intertwiner spanning block `k`, copy `l` of row `i`.
    pub fn block_vector(&self, k: usize, i: usize, l: usize) -> nalgebra::DVector<Complex64> {
        let b = &self.blocks[k];
        self.intertwiner
            .column(b.offset + i * b.multiplicity + l)
            .into_owned()
    }

    /// Largest conjugation residual over the basis of `a`.
    pub fn residual(&self, a: &MatrixStarAlgebra) -> f64 {
        a.basis()
            .iter()
            .map(|b| self.components(b).1)
            .fold(0.0, f64::max)
    }
}

/// Artin–Wedderburn form of `A`: blocks `(n_k, m_k)` and a unitary `W` with
/// `W* A W = ⊕_k M_{n_k} ⊗ 1_{m_k}`.
pub fn structure_decomposition(
    a: &MatrixStarAlgebra,
    tol: &Tolerances,
) -> Result<StructureDecomposition> {
    let n = a.ambient_dim();
    if a.is_full() {
        return Ok(StructureDecomposition {
            blocks: vec![Block {
                size: n,
                multiplicity: 1,
                offset: 0,
            }],
            intertwiner: identity(n),
        });
    }
    if a.dim() == 1 {
        return Ok(StructureDecomposition {
            blocks: vec![Block {
                size: 1,
                multiplicity: n,
                offset: 0,
            }],
            intertwiner: identity(n),
        });
    }
    let info = center_and_factor(a, tol)?;
    let herm = a.hermitian_basis();
    let mut blocks = Vec::new();
    let mut columns: Vec<nalgebra::DVector<Complex64>> = Vec::with_capacity(n);
    let mut offset = 0;
    for (k, z) in info.minimal_central_projections.iter().enumerate() {
        let (block, vectors) = decompose_block(a, &herm, z, k as u64, tol)?;
        blocks.push(Block { offset, ..block });
        offset += block.width();
        columns.extend(vectors);
    }
    if offset != n {
        return Err(Error::IllConditioned(format!(
            "block widths sum to {offset}, ambient is {n}"
        )));
    }
    let intertwiner = ComplexMatrix::from_columns(&columns);
    let sd = StructureDecomposition {
        blocks,
        intertwiner,
    };
    let unitarity = frobenius_norm(&(sd.intertwiner.adjoint() * &sd.intertwiner - identity(n)));
    let residual = sd.residual(a);
    if unitarity > 1e-9 || residual > tol.eps_verify * (n as f64).sqrt() {
        return Err(Error::IllConditioned(format!(
            "structure decomposition residual {residual:.3e}, unitarity {unitarity:.3e}"
        )));
    }
    Ok(sd)
}

/// Splits the central block `z A` into matrix units and returns an orthonormal
/// basis of `range(z)` ordered as `(row i, copy l) ↦ i * m + l`.
fn decompose_block(
    a: &MatrixStarAlgebra,
    herm: &[ComplexMatrix],
    z: &ComplexMatrix,
    salt: u64,
    tol: &Tolerances,
) -> Result<(Block, Vec<nalgebra::DVector<Complex64>>)> {
    let n = a.ambient_dim();
    // orthonormal basis of range(z)
    let zeig = eig_hermitian_unchecked(&crate::numerics::hermitian_part(z));
    let rank = zeig.values.iter().filter(|&&v| v > 0.5).count();
    let vz = zeig.vectors.columns(n - rank, rank).into_owned();

    let block_elems: Vec<ComplexMatrix> = a.basis().iter().map(|b| b * z).collect();
    let block_dim = {
        let mut set = crate::numerics::OrthonormalSet::new(n * n);
        for e in &block_elems {
            set.try_push(&vectorize(e), tol.eps_algebra * 10.0);
        }
        set.len()
    };
    let size = (block_dim as f64).sqrt().round() as usize;
    if size * size != block_dim || size == 0 || rank % size != 0 {
        return Err(Error::IllConditioned(format!(
            "central block of rank {rank} has non-square dimension {block_dim}"
        )));
    }
    let mult = rank / size;
    let block = Block {
        size,
        multiplicity: mult,
        offset: 0,
    };
    if size == 1 {
        let vectors = (0..rank).map(|c| vz.column(c).into_owned()).collect();
        return Ok((block, vectors));
    }

    for attempt in 0..ATTEMPTS {
        let mut rng = seeded_rng(SEED_BASE ^ (salt << 8) ^ (attempt + 1));
        let h = vz.adjoint() * generic_hermitian(herm, n, &mut rng) * &vz;
        let eig = eig_hermitian_unchecked(&crate::numerics::hermitian_part(&h));
        let groups = clusters(&eig.values, 1e-7);
        if groups.len() != size || groups.iter().any(|g| g.len() != mult) {
            continue;
        }
        let projections: Vec<ComplexMatrix> = groups
            .iter()
            .map(|g| spectral_projection(&eig.vectors, g.clone()))
            .collect();
        // generic element of the block in range(z) coordinates
        let mut generic = ComplexMatrix::zeros(rank, rank);
        for b in a.basis() {
            let c = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            generic += (vz.adjoint() * b * &vz) * c;
        }
        let first: Vec<nalgebra::DVector<Complex64>> = (groups[0].start..groups[0].end)
            .map(|c| eig.vectors.column(c).into_owned())
            .collect();
        let mut local: Vec<nalgebra::DVector<Complex64>> = first.clone();
        let mut ok = true;
        for pj in projections.iter().skip(1) {
            let x = &projections[0] * &generic * pj;
            let c = (&x * x.adjoint()).trace().re / mult as f64;
            if c < 1e-10 {
                ok = false;
                break;
            }
            let e_adj = x.adjoint().unscale(c.sqrt());
            for v in &first {
                local.push(&e_adj * v);
            }
        }
        if !ok {
            continue;
        }
        // reorder from (i, l) with i-major blocks of m into i * m + l: already
        // i-major since rows were appended one projection at a time
        let vectors = local.iter().map(|v| &vz * v).collect();
        return Ok((block, vectors));
    }
    Err(Error::IllConditioned(
        "could not split a central block into matrix units".into(),
    ))
}
