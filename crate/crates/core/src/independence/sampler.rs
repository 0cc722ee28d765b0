use serde::{Deserialize, Serialize};

use crate::algebra::{center_and_factor, MatrixStarAlgebra};
use crate::error::Result;
use crate::numerics::{
    frobenius_norm, random_density, random_pure_density, random_unit_vector, seeded_rng, trace,
    ComplexMatrix, SeededRng, Tolerances,
};
use crate::states::AlgebraState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleKind {
    Tracial,
    /// Pure states supported under a pair of minimal central projections.
    CentralBlock,
    Haar,
    Pure,
    LowRank,
}

#[derive(Debug, Clone)]
pub struct StatePair {
    pub kind: SampleKind,
    pub phi1: AlgebraState,
    pub phi2: AlgebraState,
}

/// Deterministic source of state pairs for the sampling-based checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sampler {
    pub seed: u64,
    pub samples: usize,
}

impl Default for Sampler {
    fn default() -> Self {
        Sampler {
            seed: 0,
            samples: 50,
        }
    }
}

/// Pure state `|w⟩⟨w|` with `w = z v / ‖z v‖` for a random `v`.
fn supported_pure(z: &ComplexMatrix, rng: &mut SeededRng) -> ComplexMatrix {
    let n = z.nrows();
    loop {
        let w = z * random_unit_vector(n, rng);
        let norm = w.norm();
        if norm > 1e-6 {
            let w = w.unscale(norm);
            return &w * w.adjoint();
        }
    }
}

impl Sampler {
    pub fn new(seed: u64, samples: usize) -> Self {
        Sampler { seed, samples }
    }

    /// `samples` pairs: central-block pairs first (at most half of the
    /// budget, least-overlapping blocks first), then the tracial pair, then
    /// Haar-random, pure and rank-two densities in rotation.
    pub fn state_pairs(
        &self,
        a1: &MatrixStarAlgebra,
        a2: &MatrixStarAlgebra,
        tol: &Tolerances,
    ) -> Result<Vec<StatePair>> {
        let n = a1.ambient_dim();
        let mut rng = seeded_rng(self.seed);
        let mut pairs = Vec::with_capacity(self.samples);
        let z1 = center_and_factor(a1, tol)?.minimal_central_projections;
        let z2 = center_and_factor(a2, tol)?.minimal_central_projections;
        let mut blocks: Vec<(f64, usize, usize)> = Vec::new();
        for (i, p) in z1.iter().enumerate() {
            for (j, q) in z2.iter().enumerate() {
                blocks.push((frobenius_norm(&(p * q)), i, j));
            }
        }
        blocks.sort_by(|a, b| a.0.total_cmp(&b.0).then((a.1, a.2).cmp(&(b.1, b.2))));
        let central_budget = if blocks.len() > 1 {
            self.samples / 2
        } else {
            0
        };
        for &(_, i, j) in blocks.iter().take(central_budget) {
            pairs.push(StatePair {
                kind: SampleKind::CentralBlock,
                phi1: AlgebraState::new(a1.clone(), supported_pure(&z1[i], &mut rng), tol)?,
                phi2: AlgebraState::new(a2.clone(), supported_pure(&z2[j], &mut rng), tol)?,
            });
        }
        if pairs.len() < self.samples {
            pairs.push(StatePair {
                kind: SampleKind::Tracial,
                phi1: AlgebraState::tracial(a1.clone()),
                phi2: AlgebraState::tracial(a2.clone()),
            });
        }
        let rotation = [SampleKind::Haar, SampleKind::Pure, SampleKind::LowRank];
        let mut k = 0;
        while pairs.len() < self.samples {
            let kind = rotation[k % rotation.len()];
            k += 1;
            let draw = |rng: &mut SeededRng| match kind {
                SampleKind::Pure => random_pure_density(n, rng),
                SampleKind::LowRank => random_density(n, 2.min(n), rng),
                _ => random_density(n, n, rng),
            };
            let r1 = draw(&mut rng);
            let r2 = draw(&mut rng);
            pairs.push(StatePair {
                kind,
                phi1: AlgebraState::new(a1.clone(), r1, tol)?,
                phi2: AlgebraState::new(a2.clone(), r2, tol)?,
            });
        }
        Ok(pairs)
    }
}

/// `z / tr z`: the tracial state of the block under a projection.
pub(crate) fn block_state(z: &ComplexMatrix) -> ComplexMatrix {
    z.unscale(trace(z).re)
}
