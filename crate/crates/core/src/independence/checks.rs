use serde::{Deserialize, Serialize};

use super::check_product_sense;
use super::product::{ProductIsomorphism, ProductSense};
use super::sampler::{block_state, Sampler};
use crate::algebra::{center_and_factor, check_ambient, mutually_commute, MatrixStarAlgebra};
use crate::error::Result;
use crate::numerics::{frobenius_norm, ComplexMatrix, Tolerances};
use crate::states::{
    extend_state, product_state, AlgebraState, ExtensionOptions, ExtensionOutcome, Separation,
};

/// Minimal central projections with `z1 z2 = 0`. Any extension `φ` of the
/// block states would have `φ(z1) = φ(z2) = 1`, hence `φ(z1 z2) = 1`.
#[derive(Debug, Clone)]
pub struct CentralWitness {
    pub z1: ComplexMatrix,
    pub z2: ComplexMatrix,
    pub overlap: f64,
    pub state1: AlgebraState,
    pub state2: AlgebraState,
}

#[derive(Debug, Clone)]
pub struct SeparationWitness {
    pub state1: AlgebraState,
    pub state2: AlgebraState,
    pub separation: Separation,
    pub gap: f64,
}

#[derive(Debug, Clone)]
pub enum IndependenceWitness {
    Central(Box<CentralWitness>),
    Separation(Box<SeparationWitness>),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SamplingSummary {
    pub seed: u64,
    pub pairs: usize,
    pub feasible: usize,
    pub infeasible: usize,
    pub undecided: usize,
    /// Largest marginal residual among the extensions found.
    pub max_residual: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone)]
pub enum IndependenceVerdict {
    /// Every pair of states extends, through the product state on the join.
    Holds {
        isomorphism: Box<ProductIsomorphism>,
        summary: SamplingSummary,
    },
    Fails(IndependenceWitness),
    Undecided {
        reason: String,
        summary: SamplingSummary,
    },
}

impl IndependenceVerdict {
    pub fn holds(&self) -> bool {
        matches!(self, IndependenceVerdict::Holds { .. })
    }

    pub fn fails(&self) -> bool {
        matches!(self, IndependenceVerdict::Fails(_))
    }
}

/// Minimal central projections `z1 ∈ Z(A1)`, `z2 ∈ Z(A2)` with `z1 z2 = 0`.
pub fn central_witness(
    a1: &MatrixStarAlgebra,
    a2: &MatrixStarAlgebra,
    tol: &Tolerances,
) -> Result<Option<CentralWitness>> {
    check_ambient(a1, a2)?;
    let z1 = center_and_factor(a1, tol)?.minimal_central_projections;
    let z2 = center_and_factor(a2, tol)?.minimal_central_projections;
    for p in &z1 {
        for q in &z2 {
            let overlap = frobenius_norm(&(p * q));
            if overlap <= tol.eps_algebra {
                return Ok(Some(CentralWitness {
                    z1: p.clone(),
                    z2: q.clone(),
                    overlap,
                    state1: AlgebraState::new(a1.clone(), block_state(p), tol)?,
                    state2: AlgebraState::new(a2.clone(), block_state(q), tol)?,
                }));
            }
        }
    }
    Ok(None)
}

/// Decides C*-independence: every pair of states on `A1`, `A2` has a joint
/// extension.
///
/// Disjoint central supports refute it outright. For commuting pairs with a
/// product isomorphism the product state is an extension of every pair. The
/// remaining cases (non-commuting pairs) are only semi-decided by running the
/// extension solver on sampled pairs.
pub fn check_cstar_independence(
    a1: &MatrixStarAlgebra,
    a2: &MatrixStarAlgebra,
    sampler: &Sampler,
    tol: &Tolerances,
) -> Result<IndependenceVerdict> {
    if let Some(w) = central_witness(a1, a2, tol)? {
        return Ok(IndependenceVerdict::Fails(IndependenceWitness::Central(
            Box::new(w),
        )));
    }
    let pairs = sampler.state_pairs(a1, a2, tol)?;
    let mut summary = SamplingSummary {
        seed: sampler.seed,
        pairs: pairs.len(),
        ..Default::default()
    };
    if mutually_commute(a1, a2, tol)? {
        if let ProductSense::Holds(iso) = check_product_sense(a1, a2, tol, sampler.seed)? {
            for pair in &pairs {
                let joint = product_state(&pair.phi1, &pair.phi2, &iso, tol)?;
                let residual = joint.distance(&pair.phi1).max(
                    AlgebraState::new(a2.clone(), joint.density().clone(), tol)?
                        .distance(&pair.phi2),
                );
                summary.max_residual = summary.max_residual.max(residual);
                summary.feasible += 1;
            }
            return Ok(IndependenceVerdict::Holds {
                isomorphism: iso,
                summary,
            });
        }
    }
    let opts = ExtensionOptions::with_tolerances(*tol);
    for pair in pairs {
        let outcome = extend_state(&pair.phi1, &pair.phi2, &opts)?;
        summary.iterations += outcome.iterations();
        match outcome {
            ExtensionOutcome::Feasible { residual, .. } => {
                summary.feasible += 1;
                summary.max_residual = summary.max_residual.max(residual);
            }
            ExtensionOutcome::Undecided { .. } => summary.undecided += 1,
            ExtensionOutcome::InfeasibleCertified { gap, witness, .. } => {
                return Ok(IndependenceVerdict::Fails(IndependenceWitness::Separation(
                    Box::new(SeparationWitness {
                        state1: pair.phi1,
                        state2: pair.phi2,
                        separation: witness,
                        gap,
                    }),
                )));
            }
        }
    }
    Ok(IndependenceVerdict::Undecided {
        reason: format!(
            "sampled-only evidence: {} of {} pairs extended, {} undecided",
            summary.feasible, summary.pairs, summary.undecided
        ),
        summary,
    })
}

/// W*-independence. Every state on a finite-dimensional algebra is normal, so
/// this is the C*-independence procedure.
pub fn check_wstar_independence(
    n1: &MatrixStarAlgebra,
    n2: &MatrixStarAlgebra,
    sampler: &Sampler,
    tol: &Tolerances,
) -> Result<IndependenceVerdict> {
    check_cstar_independence(n1, n2, sampler, tol)
}
