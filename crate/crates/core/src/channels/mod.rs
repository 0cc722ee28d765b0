//! Completely positive maps between matrix algebras.
//!
//! Maps act in the Heisenberg picture, `T(X) = Σ_i W_i* X W_i`, and are stored
//! as a superoperator matrix on `vec(X)` defined on the whole ambient `M_n`.
//! Only the restriction to the declared domain algebra carries meaning; every
//! property (complete positivity, faithfulness, Choi and Kraus forms) is
//! evaluated on `T ∘ E`, with `E` the trace-preserving conditional expectation
//! onto the domain. `E` fixes the domain, so this changes nothing there.

mod dilation;

pub use dilation::{stinespring_dilation, StinespringDilation};

use serde::{Deserialize, Serialize};

use crate::algebra::MatrixStarAlgebra;
use crate::error::{Error, Result};
use crate::numerics::{
    eig_hermitian, eig_hermitian_unchecked, frobenius_norm, hermitian_part, identity, kron,
    unvectorize, vectorize, ComplexMatrix, Tolerances,
};
use crate::states::AlgebraState;

/// Properties established for a map. A flag is only ever set after the
/// corresponding check has passed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MapFlags {
    pub cp_certified: bool,
    pub unital: bool,
    /// CP with `T(I) ⪯ I`.
    pub operation: bool,
    pub faithful: bool,
    /// Always true: every linear map between matrix algebras is normal.
    pub normal: bool,
}

impl Default for MapFlags {
    fn default() -> Self {
        MapFlags {
            cp_certified: false,
            unital: false,
            operation: false,
            faithful: false,
            normal: true,
        }
    }
}

impl MapFlags {
    /// A nonselective operation: CP and unital.
    pub fn nonselective(&self) -> bool {
        self.cp_certified && self.unital
    }
}

#[derive(Debug, Clone)]
pub struct ChannelMap {
    domain: MatrixStarAlgebra,
    output_dim: usize,
    /// `m² × n²` superoperator in the column-major vec convention.
    action: ComplexMatrix,
    flags: MapFlags,
}

/// Kraus operators `W_i` (each `n × m`) of `T(X) = Σ_i W_i* X W_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct KrausSet {
    pub operators: Vec<ComplexMatrix>,
}

impl KrausSet {
    pub fn new(operators: Vec<ComplexMatrix>) -> Result<Self> {
        let first = operators
            .first()
            .ok_or_else(|| Error::shape("at least one Kraus operator", "none"))?;
        let shape = first.shape();
        for w in &operators {
            if w.shape() != shape {
                return Err(Error::shape(
                    format!("{}x{}", shape.0, shape.1),
                    format!("{}x{}", w.nrows(), w.ncols()),
                ));
            }
        }
        Ok(KrausSet { operators })
    }

    pub fn rank(&self) -> usize {
        self.operators.len()
    }

    pub fn input_dim(&self) -> usize {
        self.operators[0].nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.operators[0].ncols()
    }

    /// `Σ W_i* W_i`, which equals `T(I)`.
    pub fn completeness(&self) -> ComplexMatrix {
        let m = self.output_dim();
        self.operators
            .iter()
            .fold(ComplexMatrix::zeros(m, m), |acc, w| acc + w.adjoint() * w)
    }

    /// `Σ W_i W_i*`; nonsingular exactly when the map is faithful.
    pub fn range_sum(&self) -> ComplexMatrix {
        let n = self.input_dim();
        self.operators
            .iter()
            .fold(ComplexMatrix::zeros(n, n), |acc, w| acc + w * w.adjoint())
    }

    pub fn apply(&self, x: &ComplexMatrix) -> ComplexMatrix {
        let m = self.output_dim();
        self.operators
            .iter()
            .fold(ComplexMatrix::zeros(m, m), |acc, w| {
                acc + w.adjoint() * x * w
            })
    }
}

/// Complete orthogonal family of projections `P_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectiveMeasurement {
    projections: Vec<ComplexMatrix>,
}

impl ProjectiveMeasurement {
    pub fn new(projections: Vec<ComplexMatrix>, tol: &Tolerances) -> Result<Self> {
        let n = match projections.first() {
            Some(p) if p.is_square() => p.nrows(),
            Some(p) => {
                return Err(Error::InvalidMeasurement(format!(
                    "projection is {}x{}",
                    p.nrows(),
                    p.ncols()
                )))
            }
            None => return Err(Error::InvalidMeasurement("no projections".into())),
        };
        let mut sum = ComplexMatrix::zeros(n, n);
        for (i, p) in projections.iter().enumerate() {
            if p.shape() != (n, n) {
                return Err(Error::InvalidMeasurement(format!(
                    "projection {i} has wrong shape"
                )));
            }
            let idem = frobenius_norm(&(p * p - p));
            let herm = frobenius_norm(&(p - p.adjoint()));
            if idem > tol.eps_verify || herm > tol.eps_verify {
                return Err(Error::InvalidMeasurement(format!(
                    "P_{i} is not an orthogonal projection (idempotence {idem:.3e}, hermiticity {herm:.3e})"
                )));
            }
            for (j, q) in projections.iter().enumerate().skip(i + 1) {
                let overlap = frobenius_norm(&(p * q));
                if overlap > tol.eps_verify {
                    return Err(Error::InvalidMeasurement(format!(
                        "P_{i} P_{j} = {overlap:.3e} ≠ 0"
                    )));
                }
            }
            sum += p;
        }
        let completeness = frobenius_norm(&(sum - identity(n)));
        if completeness > tol.eps_verify {
            return Err(Error::InvalidMeasurement(format!(
                "projections sum to I only up to {completeness:.3e}"
            )));
        }
        Ok(ProjectiveMeasurement { projections })
    }

    /// Spectral projections of a Hermitian observable, eigenvalues grouped
    /// when closer than `gap`.
    pub fn from_observable(h: &ComplexMatrix, gap: f64, tol: &Tolerances) -> Result<Self> {
        let eig = eig_hermitian(h, tol)?;
        let mut projections = Vec::new();
        let mut start = 0;
        for k in 1..=eig.values.len() {
            if k == eig.values.len() || eig.values[k] - eig.values[k - 1] > gap {
                let v = eig.vectors.columns(start, k - start);
                projections.push(v * v.adjoint());
                start = k;
            }
        }
        Self::new(projections, tol)
    }

    pub fn projections(&self) -> &[ComplexMatrix] {
        &self.projections
    }
}

impl ChannelMap {
    /// Wraps a superoperator; no property is certified.
    pub fn from_action(
        domain: MatrixStarAlgebra,
        output_dim: usize,
        action: ComplexMatrix,
    ) -> Self {
        let n = domain.ambient_dim();
        assert_eq!(
            action.shape(),
            (output_dim * output_dim, n * n),
            "superoperator shape does not match the declared dimensions"
        );
        ChannelMap {
            domain,
            output_dim,
            action,
            flags: MapFlags::default(),
        }
    }

    pub fn identity(domain: MatrixStarAlgebra, tol: &Tolerances) -> Self {
        let n = domain.ambient_dim();
        Self::from_action(domain, n, identity(n * n)).certify(tol)
    }

    /// `X ↦ Σ_i W_i* X W_i` on `domain`.
    pub fn from_kraus(
        domain: MatrixStarAlgebra,
        kraus: &KrausSet,
        tol: &Tolerances,
    ) -> Result<Self> {
        let n = domain.ambient_dim();
        if kraus.input_dim() != n {
            return Err(Error::shape(
                format!("Kraus operators with {n} rows"),
                format!("{} rows", kraus.input_dim()),
            ));
        }
        let m = kraus.output_dim();
        let mut action = ComplexMatrix::zeros(m * m, n * n);
        for w in &kraus.operators {
            // vec(W* X W) = (Wᵀ ⊗ W*) vec(X)
            action += kron(&w.transpose(), &w.adjoint());
        }
        Ok(Self::from_action(domain, m, action).certify(tol))
    }

    pub fn domain(&self) -> &MatrixStarAlgebra {
        &self.domain
    }

    pub fn input_dim(&self) -> usize {
        self.domain.ambient_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn action(&self) -> &ComplexMatrix {
        &self.action
    }

    pub fn flags(&self) -> MapFlags {
        self.flags
    }

    pub fn apply(&self, x: &ComplexMatrix) -> ComplexMatrix {
        let n = self.input_dim();
        assert_eq!(
            x.shape(),
            (n, n),
            "argument outside the map's ambient algebra"
        );
        let v = &self.action * vectorize(x);
        unvectorize(v.as_slice(), self.output_dim, self.output_dim)
    }

    /// Superoperator of `T ∘ E_domain`.
    pub fn extended_action(&self) -> ComplexMatrix {
        if self.domain.is_full() {
            return self.action.clone();
        }
        let b = self.domain.basis_columns();
        (&self.action * b) * b.adjoint()
    }

    /// `T ∘ E` with the full matrix algebra as domain.
    pub fn extend_to_ambient(&self, tol: &Tolerances) -> Result<ChannelMap> {
        let min = self.choi_min_eigenvalue(tol)?;
        if min < -tol.eps_psd {
            return Err(Error::NotCp(min));
        }
        if self.domain.is_full() {
            return Ok(self.clone().certify(tol));
        }
        let n = self.input_dim();
        Ok(Self::from_action(
            MatrixStarAlgebra::full(n),
            self.output_dim,
            self.extended_action(),
        )
        .certify(tol))
    }

    /// Choi matrix `Σ_ij E_ij ⊗ T(E_ij)`; requires a full-algebra domain.
    pub fn choi(&self) -> Result<ComplexMatrix> {
        if !self.domain.is_full() {
            return Err(Error::DomainNotFull {
                dim: self.domain.dim(),
                ambient: self.input_dim(),
            });
        }
        Ok(choi_of_action(
            &self.action,
            self.input_dim(),
            self.output_dim,
        ))
    }

    /// Choi matrix of `T ∘ E`.
    pub fn extended_choi(&self) -> ComplexMatrix {
        choi_of_action(&self.extended_action(), self.input_dim(), self.output_dim)
    }

    pub fn choi_min_eigenvalue(&self, tol: &Tolerances) -> Result<f64> {
        Ok(eig_hermitian(&hermitian_part(&self.extended_choi()), tol)?.min())
    }

    /// Decided by positivity of the Choi matrix of `T ∘ E`.
    pub fn is_completely_positive(&self, tol: &Tolerances) -> bool {
        let c = self.extended_choi();
        if frobenius_norm(&(&c - c.adjoint())) > tol.eps_herm * frobenius_norm(&c).max(1.0) {
            return false;
        }
        eig_hermitian_unchecked(&hermitian_part(&c)).min() >= -tol.eps_psd
    }

    /// `Σ_k W_k W_k*` for the Kraus operators of `T ∘ E`, read off the Choi
    /// matrix as the conjugate of its partial trace over the output.
    pub fn range_sum(&self) -> ComplexMatrix {
        let (n, m) = (self.input_dim(), self.output_dim);
        let c = self.extended_choi();
        ComplexMatrix::from_fn(n, n, |i, j| {
            (0..m).map(|a| c[(i * m + a, j * m + a)].conj()).sum()
        })
    }

    fn range_sum_min(&self) -> f64 {
        eig_hermitian_unchecked(&hermitian_part(&self.range_sum())).min()
    }

    /// Kraus operators of `T ∘ E`.
    pub fn kraus(&self, tol: &Tolerances) -> Result<KrausSet> {
        kraus_from_choi(
            &self.extended_choi(),
            self.input_dim(),
            self.output_dim,
            tol,
        )
    }

    /// `‖T(I) − I‖_F`.
    pub fn unitality_residual(&self) -> f64 {
        if self.input_dim() != self.output_dim {
            let t = self.apply(&identity(self.input_dim()));
            return frobenius_norm(&(t - identity(self.output_dim)));
        }
        frobenius_norm(&(self.apply(&identity(self.input_dim())) - identity(self.output_dim)))
    }

    /// Largest residual of `T(b)` from the span of `target`, over the domain basis.
    pub fn range_residual(&self, target: &MatrixStarAlgebra) -> f64 {
        self.domain
            .basis()
            .iter()
            .map(|b| target.membership_residual(&self.apply(b)))
            .fold(0.0, f64::max)
    }

    /// Runs every check and sets the flags that pass.
    pub fn certify(mut self, tol: &Tolerances) -> Self {
        let mut flags = MapFlags {
            cp_certified: self.is_completely_positive(tol),
            unital: self.unitality_residual() <= tol.eps_verify,
            ..MapFlags::default()
        };
        if flags.cp_certified {
            let t_i = self.apply(&identity(self.input_dim()));
            let slack = identity(self.output_dim) - hermitian_part(&t_i);
            flags.operation = eig_hermitian_unchecked(&slack).min() >= -tol.eps_psd;
            flags.faithful = self.range_sum_min() > tol.eps_psd;
        }
        self.flags = flags;
        self
    }

    fn require_cp(&self, tol: &Tolerances) -> Result<()> {
        if self.flags.cp_certified {
            return Ok(());
        }
        Err(Error::NotCp(
            self.choi_min_eigenvalue(tol).unwrap_or(f64::NAN),
        ))
    }
}

fn choi_of_action(action: &ComplexMatrix, n: usize, m: usize) -> ComplexMatrix {
    let mut c = ComplexMatrix::zeros(n * m, n * m);
    for j in 0..n {
        for i in 0..n {
            let col = action.column(i + n * j);
            for b in 0..m {
                for a in 0..m {
                    c[(i * m + a, j * m + b)] = col[a + m * b];
                }
            }
        }
    }
    c
}

/// Inverse of [`ChannelMap::choi`]: the map on `M_n` with output in `M_m`.
pub fn map_from_choi(
    choi: &ComplexMatrix,
    n: usize,
    m: usize,
    tol: &Tolerances,
) -> Result<ChannelMap> {
    if choi.shape() != (n * m, n * m) {
        return Err(Error::shape(
            format!("{0}x{0}", n * m),
            format!("{}x{}", choi.nrows(), choi.ncols()),
        ));
    }
    let mut action = ComplexMatrix::zeros(m * m, n * n);
    for j in 0..n {
        for i in 0..n {
            for b in 0..m {
                for a in 0..m {
                    action[(a + m * b, i + n * j)] = choi[(i * m + a, j * m + b)];
                }
            }
        }
    }
    Ok(ChannelMap::from_action(MatrixStarAlgebra::full(n), m, action).certify(tol))
}

/// Kraus operators from the eigen-decomposition of a PSD Choi matrix: each
/// eigenpair `(λ, v)` with `λ > eps_psd` gives `W[i, a] = √λ · conj(v[i m + a])`.
///
/// Degenerate eigenvalues make the family non-unique; compare Kraus sets only
/// through the maps they induce.
pub fn kraus_from_choi(
    choi: &ComplexMatrix,
    n: usize,
    m: usize,
    tol: &Tolerances,
) -> Result<KrausSet> {
    let eig = eig_hermitian(choi, tol)?;
    let min = eig.min();
    if min < -tol.eps_psd {
        return Err(Error::NotPsd(min));
    }
    let mut operators = Vec::new();
    for (k, &lambda) in eig.values.iter().enumerate().rev() {
        if lambda <= tol.eps_psd {
            continue;
        }
        let s = lambda.sqrt();
        let v = eig.vectors.column(k);
        let w = ComplexMatrix::from_fn(n, m, |i, a| v[i * m + a].conj() * s);
        operators.push(w);
    }
    if operators.is_empty() {
        operators.push(ComplexMatrix::zeros(n, m));
    }
    KrausSet::new(operators)
}

/// Faithfulness of a CP map: `T(X) ≠ 0` for every nonzero positive `X` in the
/// domain, equivalently `Σ_i W_i W_i*` is nonsingular for the Kraus operators
/// of `T ∘ E`.
pub fn is_faithful_map(t: &ChannelMap, tol: &Tolerances) -> Result<bool> {
    Ok(faithfulness_margin(t, tol)? > tol.eps_psd)
}

/// Smallest eigenvalue of `Σ_i W_i W_i*` for the Kraus operators of `T ∘ E`.
pub fn faithfulness_margin(t: &ChannelMap, tol: &Tolerances) -> Result<f64> {
    t.require_cp(tol)?;
    Ok(t.range_sum_min())
}

/// `T(X) = φ(X) I`: prepares the state `φ` regardless of the input.
pub fn state_prep_operation(phi: &AlgebraState, tol: &Tolerances) -> ChannelMap {
    let n = phi.algebra().ambient_dim();
    let row = vectorize(&phi.density().transpose()).transpose();
    let action = vectorize(&identity(n)) * row;
    ChannelMap::from_action(phi.algebra().clone(), n, action).certify(tol)
}

/// Lüders map `T(X) = Σ_i P_i X P_i` on the full matrix algebra.
pub fn luders_operation(measurement: &ProjectiveMeasurement, tol: &Tolerances) -> ChannelMap {
    let n = measurement.projections[0].nrows();
    let kraus = KrausSet {
        operators: measurement.projections.clone(),
    };
    ChannelMap::from_kraus(MatrixStarAlgebra::full(n), &kraus, tol)
        .expect("projections are square of the ambient size")
}

/// `X ↦ U* X U` on `domain`.
pub fn unitary_conjugation(
    domain: MatrixStarAlgebra,
    u: &ComplexMatrix,
    tol: &Tolerances,
) -> Result<ChannelMap> {
    ChannelMap::from_kraus(domain, &KrausSet::new(vec![u.clone()])?, tol)
}

/// `T ⊗ S` on the spatial tensor product of the domains.
pub fn tensor_channel(t: &ChannelMap, s: &ChannelMap, tol: &Tolerances) -> Result<ChannelMap> {
    t.require_cp(tol)?;
    s.require_cp(tol)?;
    let (n1, n2) = (t.input_dim(), s.input_dim());
    let (m1, m2) = (t.output_dim, s.output_dim);
    let (big_n, big_m) = (n1 * n2, m1 * m2);
    let t_ext = t.extended_action();
    let s_ext = s.extended_action();
    let t_images: Vec<ComplexMatrix> = (0..n1 * n1)
        .map(|c| unvectorize(t_ext.column(c).as_slice(), m1, m1))
        .collect();
    let s_images: Vec<ComplexMatrix> = (0..n2 * n2)
        .map(|c| unvectorize(s_ext.column(c).as_slice(), m2, m2))
        .collect();
    let mut action = ComplexMatrix::zeros(big_m * big_m, big_n * big_n);
    for j in 0..n1 {
        for i in 0..n1 {
            for l in 0..n2 {
                for k in 0..n2 {
                    let out = kron(&t_images[i + n1 * j], &s_images[k + n2 * l]);
                    let (r, c) = (i * n2 + k, j * n2 + l);
                    action.set_column(r + big_n * c, &vectorize(&out));
                }
            }
        }
    }
    let domain = t.domain.tensor(&s.domain);
    Ok(ChannelMap::from_action(domain, big_m, action).certify(tol))
}

/// Left slice map `L(X ⊗ Y) = φ₂(Y) X` from `A1 ⊗ A2` onto `A1`.
pub fn slice_map(a1: &MatrixStarAlgebra, phi2: &AlgebraState, tol: &Tolerances) -> ChannelMap {
    let n1 = a1.ambient_dim();
    let n2 = phi2.algebra().ambient_dim();
    let big_n = n1 * n2;
    let rho = phi2.density();
    let mut action = ComplexMatrix::zeros(n1 * n1, big_n * big_n);
    for j in 0..n1 {
        for i in 0..n1 {
            for l in 0..n2 {
                for k in 0..n2 {
                    let (r, c) = (i * n2 + k, j * n2 + l);
                    action[(i + n1 * j, r + big_n * c)] = rho[(l, k)];
                }
            }
        }
    }
    let domain = a1.tensor(phi2.algebra());
    ChannelMap::from_action(domain, n1, action).certify(tol)
}

/// `outer ∘ inner`.
pub fn compose(outer: &ChannelMap, inner: &ChannelMap, tol: &Tolerances) -> Result<ChannelMap> {
    if inner.output_dim != outer.input_dim() {
        return Err(Error::shape(
            format!("inner output dimension {}", outer.input_dim()),
            format!("{}", inner.output_dim),
        ));
    }
    let action = outer.extended_action() * &inner.action;
    Ok(ChannelMap::from_action(inner.domain.clone(), outer.output_dim, action).certify(tol))
}

/// `T* φ = φ ∘ T` for a nonselective `T`, as a state on the domain of `T`.
pub fn dual_on_states(
    t: &ChannelMap,
    phi: &AlgebraState,
    tol: &Tolerances,
) -> Result<AlgebraState> {
    if !t.flags.unital {
        return Err(Error::NotUnital(t.unitality_residual()));
    }
    if phi.algebra().ambient_dim() != t.output_dim {
        return Err(Error::AmbientMismatch(
            phi.algebra().ambient_dim(),
            t.output_dim,
        ));
    }
    let n = t.input_dim();
    let v = t.extended_action().ad_mul(&vectorize(phi.density()));
    let sigma = hermitian_part(&unvectorize(v.as_slice(), n, n));
    AlgebraState::new(t.domain.clone(), sigma, tol)
}

/// Superoperator distance `max_b ‖T(b) − S(b)‖_F` over the domain basis of `T`.
pub fn distance_on_domain(t: &ChannelMap, s: &ChannelMap) -> f64 {
    t.domain
        .basis()
        .iter()
        .map(|b| frobenius_norm(&(t.apply(b) - s.apply(b))))
        .fold(0.0, f64::max)
}
