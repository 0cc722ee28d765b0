//! Joint extension of two states to a density on the ambient algebra.
//!
//! The extensions of `φ₁` on `A1` and `φ₂` on `A2` are the densities in the
//! affine set `L = {ρ Hermitian : tr(hρ) = φᵢ(h) for Hermitian h ∈ Aᵢ}` that
//! also lie in the spectraplex. Dykstra's alternating projections search for
//! a common point; two exact certificates can end the search early: a low-rank
//! Gauss–Newton refinement that lands on a density with the right marginals,
//! and a separating hyperplane `h = h1 + h2` whose value `φ₁(h1) + φ₂(h2)`
//! exceeds `λ_max(h)`, which no state can achieve.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::AlgebraState;
use crate::error::{Error, Result};
use crate::numerics::{
    eig_hermitian_unchecked, frobenius_norm, hermitian_part, identity, unvectorize, vectorize,
    ComplexMatrix, OrthonormalSet, Tolerances,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtensionOptions {
    pub tol: Tolerances,
    pub max_iter: usize,
    /// Iterations between certificate attempts and convergence checks.
    pub window: usize,
    /// Convergence is declared when the set distance changes by less than
    /// this over one window.
    pub stall_change: f64,
}

impl Default for ExtensionOptions {
    fn default() -> Self {
        ExtensionOptions {
            tol: Tolerances::default(),
            max_iter: 20_000,
            window: 100,
            stall_change: 1e-12,
        }
    }
}

impl ExtensionOptions {
    pub fn with_tolerances(tol: Tolerances) -> Self {
        ExtensionOptions {
            tol,
            ..Self::default()
        }
    }
}

/// Why no common extension exists.
#[derive(Debug, Clone, PartialEq)]
pub enum Separation {
    /// `y1 ∈ A1`, `y2 ∈ A2` with `y1 + y2 = 0` but `φ₁(y1) + φ₂(y2) = value > 0`:
    /// the states disagree on `A1 ∩ A2`.
    LinearConflict {
        y1: ComplexMatrix,
        y2: ComplexMatrix,
        value: f64,
    },
    /// Hermitian `h1 ∈ A1`, `h2 ∈ A2` with `φ₁(h1) + φ₂(h2) = level` and
    /// `λ_max(h1 + h2) = support < level`.
    Hyperplane {
        h1: ComplexMatrix,
        h2: ComplexMatrix,
        level: f64,
        support: f64,
    },
}

impl Separation {
    /// Recomputes the certificate's margin from the states alone. Positive
    /// means the certificate is valid.
    pub fn margin(&self, phi1: &AlgebraState, phi2: &AlgebraState) -> f64 {
        match self {
            Separation::LinearConflict { y1, y2, .. } => {
                let value = phi1.value(y1).re + phi2.value(y2).re;
                value - frobenius_norm(&(y1 + y2))
            }
            Separation::Hyperplane { h1, h2, .. } => {
                let level = phi1.value(h1).re + phi2.value(h2).re;
                let support = eig_hermitian_unchecked(&hermitian_part(&(h1 + h2))).max();
                let scale = frobenius_norm(&(h1 + h2)).max(f64::MIN_POSITIVE);
                (level - support) / scale
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExtensionOutcome {
    Feasible {
        density: ComplexMatrix,
        residual: f64,
        iterations: usize,
    },
    InfeasibleCertified {
        gap: f64,
        witness: Separation,
        iterations: usize,
    },
    Undecided {
        residual: f64,
        iterations: usize,
    },
}

impl ExtensionOutcome {
    pub fn status(&self) -> &'static str {
        match self {
            ExtensionOutcome::Feasible { .. } => "feasible",
            ExtensionOutcome::InfeasibleCertified { .. } => "infeasible_certified",
            ExtensionOutcome::Undecided { .. } => "undecided",
        }
    }

    pub fn iterations(&self) -> usize {
        match self {
            ExtensionOutcome::Feasible { iterations, .. }
            | ExtensionOutcome::InfeasibleCertified { iterations, .. }
            | ExtensionOutcome::Undecided { iterations, .. } => *iterations,
        }
    }

    pub fn is_feasible(&self) -> bool {
        matches!(self, ExtensionOutcome::Feasible { .. })
    }

    pub fn is_infeasible(&self) -> bool {
        matches!(self, ExtensionOutcome::InfeasibleCertified { .. })
    }
}

struct Constraint {
    h: ComplexMatrix,
    target: f64,
    first: bool,
}

struct Problem {
    n: usize,
    constraints: Vec<Constraint>,
    /// Orthonormal Hermitian basis of `span(A1 ∪ A2)`.
    span: Vec<ComplexMatrix>,
    /// `G[r, k] = tr(h_r s_k)`.
    gram: DMatrix<f64>,
    /// The point of `L` inside the span.
    anchor: ComplexMatrix,
    tol: Tolerances,
}

/// Real part of `tr(A B)` for Hermitian `A`, `B`.
fn pair(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x * y.conj()).re).sum()
}

fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    if a.ncols() == 0 {
        return DVector::zeros(0);
    }
    let svd = a.clone().svd(true, true);
    let cutoff = svd.singular_values.max() * 1e-12;
    svd.solve(b, cutoff)
        .unwrap_or_else(|_| DVector::zeros(a.ncols()))
}

impl Problem {
    fn new(phi1: &AlgebraState, phi2: &AlgebraState, tol: Tolerances) -> Self {
        let n = phi1.algebra().ambient_dim();
        let mut constraints = Vec::new();
        for (phi, first) in [(phi1, true), (phi2, false)] {
            for h in phi.algebra().hermitian_basis() {
                let target = phi.value(&h).re;
                constraints.push(Constraint { h, target, first });
            }
        }
        let mut set = OrthonormalSet::new(n * n);
        for c in &constraints {
            set.try_push(&vectorize(&c.h), 1e-10);
        }
        let span: Vec<ComplexMatrix> = set
            .into_vectors()
            .into_iter()
            .map(|v| hermitian_part(&unvectorize(v.as_slice(), n, n)))
            .collect();
        let gram = DMatrix::from_fn(constraints.len(), span.len(), |r, k| {
            pair(&constraints[r].h, &span[k])
        });
        Problem {
            n,
            constraints,
            span,
            gram,
            anchor: ComplexMatrix::zeros(n, n),
            tol,
        }
    }

    fn targets(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.constraints.len(),
            self.constraints.iter().map(|c| c.target),
        )
    }

    fn combine(&self, coeffs: &[f64]) -> ComplexMatrix {
        self.span
            .iter()
            .zip(coeffs)
            .fold(ComplexMatrix::zeros(self.n, self.n), |acc, (s, &c)| {
                acc + s.scale(c)
            })
    }

    fn span_coords(&self, x: &ComplexMatrix) -> Vec<f64> {
        self.span.iter().map(|s| pair(s, x)).collect()
    }

    fn project_affine(&self, x: &ComplexMatrix) -> ComplexMatrix {
        let coords = self.span_coords(x);
        x - self.combine(&coords) + &self.anchor
    }

    /// Euclidean norm of the marginal violations, per side, then the max.
    fn marginal_residual(&self, x: &ComplexMatrix) -> f64 {
        let (mut r1, mut r2) = (0.0, 0.0);
        for c in &self.constraints {
            let d = pair(&c.h, x) - c.target;
            if c.first {
                r1 += d * d;
            } else {
                r2 += d * d;
            }
        }
        f64::max(r1, r2).sqrt()
    }

    fn feasible_threshold(&self) -> f64 {
        0.5 * self.tol.eps_verify
    }

    /// Splits `h ∈ span` as `Σ a_r h_r` and returns `(h1, h2, level)`.
    fn split(&self, h: &ComplexMatrix) -> (ComplexMatrix, ComplexMatrix, f64) {
        let coords = DVector::from_vec(self.span_coords(h));
        let a = lstsq(&self.gram.transpose(), &coords);
        let mut h1 = ComplexMatrix::zeros(self.n, self.n);
        let mut h2 = ComplexMatrix::zeros(self.n, self.n);
        let mut level = 0.0;
        for (c, &w) in self.constraints.iter().zip(a.iter()) {
            level += w * c.target;
            if c.first {
                h1 += c.h.scale(w);
            } else {
                h2 += c.h.scale(w);
            }
        }
        (h1, h2, level)
    }

    fn hyperplane(&self, direction: &ComplexMatrix) -> Option<(f64, Separation)> {
        let coords = self.span_coords(direction);
        let h = self.combine(&coords);
        if frobenius_norm(&h) < 1e-14 {
            return None;
        }
        let (h1, h2, level) = self.split(&h);
        let normal = hermitian_part(&(&h1 + &h2));
        let scale = frobenius_norm(&normal);
        if scale < 1e-14 {
            return None;
        }
        let support = eig_hermitian_unchecked(&normal).max();
        let gap = (level - support) / scale;
        (gap > 10.0 * self.tol.eps_verify).then_some((
            gap,
            Separation::Hyperplane {
                h1,
                h2,
                level,
                support,
            },
        ))
    }

    /// Accepts `x` when it is a density with the right marginals.
    fn accept(&self, x: ComplexMatrix) -> Option<(ComplexMatrix, f64)> {
        let x = hermitian_part(&x);
        let eig = eig_hermitian_unchecked(&x);
        if eig.min() < -self.tol.eps_psd {
            return None;
        }
        let clipped = eig.map_spectrum(|l| l.max(0.0));
        let residual = self.marginal_residual(&clipped);
        (residual <= self.feasible_threshold()).then_some((clipped, residual))
    }

    /// Gauss–Newton on `ρ = V V*` with `V` of rank `r`, started from the
    /// leading eigenpairs of `x`.
    fn polish(&self, x: &ComplexMatrix, rank: usize) -> Option<(ComplexMatrix, f64)> {
        let eig = eig_hermitian_unchecked(&hermitian_part(x));
        let n = self.n;
        let mut v = ComplexMatrix::zeros(n, rank);
        for k in 0..rank {
            let col = n - 1 - k;
            let s = eig.values[col].max(0.0).sqrt();
            v.set_column(k, &eig.vectors.column(col).scale(s));
        }
        let rows = self.constraints.len();
        let mut last = f64::INFINITY;
        for _ in 0..12 {
            let rho = &v * v.adjoint();
            let f = DVector::from_iterator(
                rows,
                self.constraints.iter().map(|c| pair(&c.h, &rho) - c.target),
            );
            let norm = f.norm();
            if self.marginal_residual(&rho) <= 0.1 * self.feasible_threshold() {
                return self.accept(rho);
            }
            if norm > 0.5 * last {
                return None;
            }
            last = norm;
            let mut jac = DMatrix::<f64>::zeros(rows, 2 * n * rank);
            for (r, c) in self.constraints.iter().enumerate() {
                let m = &c.h * &v;
                for (idx, z) in m.iter().enumerate() {
                    jac[(r, idx)] = 2.0 * z.re;
                    jac[(r, n * rank + idx)] = 2.0 * z.im;
                }
            }
            let step = lstsq(&jac, &(-f));
            for idx in 0..n * rank {
                let d = Complex64::new(step[idx], step[n * rank + idx]);
                v[(idx % n, idx / n)] += d;
            }
        }
        self.accept(&v * v.adjoint())
    }

    fn try_polish(&self, x: &ComplexMatrix) -> Option<(ComplexMatrix, f64)> {
        if let Some(found) = self.accept(self.project_affine(x)) {
            return Some(found);
        }
        let eig = eig_hermitian_unchecked(&hermitian_part(x));
        let top = eig.max().max(f64::MIN_POSITIVE);
        let mut tried = Vec::new();
        for thr in [1e-2, 1e-4, 1e-6] {
            let rank = eig.values.iter().filter(|&&l| l > thr * top).count().max(1);
            if tried.contains(&rank) {
                continue;
            }
            tried.push(rank);
            if let Some(found) = self.polish(x, rank) {
                return Some(found);
            }
        }
        None
    }
}

/// Euclidean projection onto `{ρ ⪰ 0, tr ρ = 1}` via the eigenvalues.
pub(crate) fn project_spectraplex(y: &ComplexMatrix) -> ComplexMatrix {
    let eig = eig_hermitian_unchecked(&hermitian_part(y));
    let mut sorted: Vec<f64> = eig.values.clone();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (j, &u) in sorted.iter().enumerate() {
        cumulative += u;
        let t = (cumulative - 1.0) / (j + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        }
    }
    eig.map_spectrum(|l| (l - theta).max(0.0))
}

/// Searches for a density on the ambient space restricting to `φ₁` on `A1`
/// and `φ₂` on `A2`.
pub fn extend_state(
    phi1: &AlgebraState,
    phi2: &AlgebraState,
    opts: &ExtensionOptions,
) -> Result<ExtensionOutcome> {
    opts.tol.validate()?;
    let (n1, n2) = (phi1.algebra().ambient_dim(), phi2.algebra().ambient_dim());
    if n1 != n2 {
        return Err(Error::AmbientMismatch(n1, n2));
    }
    let mut problem = Problem::new(phi1, phi2, opts.tol);

    let t = problem.targets();
    let coeffs = lstsq(&problem.gram, &t);
    let misfit = &t - &problem.gram * &coeffs;
    let conflict = misfit.norm();
    if conflict > 10.0 * opts.tol.eps_verify {
        let (mut y1, mut y2) = (ComplexMatrix::zeros(n1, n1), ComplexMatrix::zeros(n1, n1));
        let mut value = 0.0;
        for (c, &w) in problem.constraints.iter().zip(misfit.iter()) {
            value += w * c.target;
            if c.first {
                y1 += c.h.scale(w);
            } else {
                y2 += c.h.scale(w);
            }
        }
        return Ok(ExtensionOutcome::InfeasibleCertified {
            gap: conflict,
            witness: Separation::LinearConflict { y1, y2, value },
            iterations: 0,
        });
    }
    problem.anchor = problem.combine(coeffs.as_slice());

    let n = problem.n;
    let mut x = identity(n).unscale(n as f64);
    let mut q = ComplexMatrix::zeros(n, n);
    let mut history: Vec<f64> = Vec::with_capacity(opts.max_iter);
    let window = opts.window.max(1);
    for iteration in 1..=opts.max_iter {
        let y = problem.project_affine(&x);
        let shifted = &y + &q;
        x = project_spectraplex(&shifted);
        q = shifted - &x;
        let gap_vector = &y - &x;
        let distance = frobenius_norm(&gap_vector);
        history.push(distance);

        if distance <= problem.feasible_threshold() {
            if let Some((density, residual)) = problem.accept(x.clone()) {
                return Ok(ExtensionOutcome::Feasible {
                    density,
                    residual,
                    iterations: iteration,
                });
            }
        }
        let checkpoint = iteration % (window / 2).max(1) == 0;
        if !checkpoint {
            continue;
        }
        if let Some((density, residual)) = problem.try_polish(&x) {
            return Ok(ExtensionOutcome::Feasible {
                density,
                residual,
                iterations: iteration,
            });
        }
        if let Some((gap, witness)) = problem.hyperplane(&gap_vector) {
            return Ok(ExtensionOutcome::InfeasibleCertified {
                gap,
                witness,
                iterations: iteration,
            });
        }
        if iteration >= window {
            let before = history[iteration - window];
            if (before - distance).abs() < opts.stall_change {
                return Ok(ExtensionOutcome::Undecided {
                    residual: problem.marginal_residual(&x),
                    iterations: iteration,
                });
            }
        }
    }
    Ok(ExtensionOutcome::Undecided {
        residual: problem.marginal_residual(&x),
        iterations: opts.max_iter,
    })
}
