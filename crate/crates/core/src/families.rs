//! Randomized instance families for sweeps and fuzzing.
//!
//! Every instance is a deterministic function of `(family, seed, index)`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::algebra::MatrixStarAlgebra;
use crate::error::{Error, Result};
use crate::numerics::{haar_unitary_with, seeded_rng, ComplexMatrix, SeededRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// Subalgebras of the two factors of `M_{d1} ⊗ M_{d2}`, jointly rotated.
    TensorSplit,
    /// Commuting pairs sharing a central projection with disjoint support,
    /// or a repeated abelian algebra.
    SharedBlock,
    /// Independently rotated random subalgebras.
    HaarOverlap,
    /// `M_{d1} ⊗ 1` and `1 ⊗ M_{d2}` in `M_6` or `M_8`, jointly rotated.
    FactorSplit,
}

impl Family {
    pub const ALL: [Family; 4] = [
        Family::TensorSplit,
        Family::SharedBlock,
        Family::HaarOverlap,
        Family::FactorSplit,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::TensorSplit => "tensor_split",
            Family::SharedBlock => "shared_block",
            Family::HaarOverlap => "haar_overlap",
            Family::FactorSplit => "factor_split",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::UnknownFamily(s.to_string()))
    }
}

#[derive(Debug, Clone)]
pub struct FamilyInstance {
    pub family: Family,
    pub index: usize,
    pub a1: MatrixStarAlgebra,
    pub a2: MatrixStarAlgebra,
    /// Tensor shape `(d1, d2)` for the split families.
    pub split: Option<(usize, usize)>,
    /// The rotation applied to the whole instance, when there is a single one.
    pub rotation: Option<ComplexMatrix>,
}

/// Per-instance seed derived from the sweep seed.
pub fn instance_seed(seed: u64, index: usize) -> u64 {
    let mut z = seed ^ (index as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A random block structure `[(size, multiplicity)]` filling dimension `d`.
pub fn random_blocks(d: usize, rng: &mut SeededRng) -> Vec<(usize, usize)> {
    let mut remaining = d;
    let mut blocks = Vec::new();
    while remaining > 0 {
        let size = rng.random_range(1..=remaining);
        let mult = rng.random_range(1..=remaining / size);
        blocks.push((size, mult));
        remaining -= size * mult;
    }
    blocks
}

/// A Haar-rotated block-diagonal subalgebra of `M_d`.
pub fn random_subalgebra(d: usize, rng: &mut SeededRng) -> MatrixStarAlgebra {
    let blocks = random_blocks(d, rng);
    MatrixStarAlgebra::block_diagonal(&blocks).conjugated(&haar_unitary_with(d, rng))
}

const SPLIT_SHAPES: [(usize, usize); 5] = [(2, 2), (2, 3), (3, 2), (2, 4), (4, 2)];

pub fn generate(family: Family, seed: u64, index: usize) -> FamilyInstance {
    let mut rng = seeded_rng(instance_seed(seed, index));
    let mut instance = FamilyInstance {
        family,
        index,
        a1: MatrixStarAlgebra::scalars(1),
        a2: MatrixStarAlgebra::scalars(1),
        split: None,
        rotation: None,
    };
    match family {
        Family::TensorSplit => {
            let (d1, d2) = SPLIT_SHAPES[rng.random_range(0..SPLIT_SHAPES.len())];
            let b1 = random_subalgebra(d1, &mut rng);
            let b2 = random_subalgebra(d2, &mut rng);
            let u = haar_unitary_with(d1 * d2, &mut rng);
            instance.a1 = b1.tensor(&MatrixStarAlgebra::scalars(d2)).conjugated(&u);
            instance.a2 = MatrixStarAlgebra::scalars(d1).tensor(&b2).conjugated(&u);
            instance.split = Some((d1, d2));
            instance.rotation = Some(u);
        }
        Family::SharedBlock => {
            let n = rng.random_range(3..=8);
            let u = haar_unitary_with(n, &mut rng);
            if rng.random_bool(0.5) {
                let k = rng.random_range(1..n);
                instance.a1 =
                    MatrixStarAlgebra::block_diagonal(&[(k, 1), (1, n - k)]).conjugated(&u);
                instance.a2 =
                    MatrixStarAlgebra::block_diagonal(&[(1, k), (n - k, 1)]).conjugated(&u);
            } else {
                let mut blocks = random_blocks(n, &mut rng);
                if blocks.len() < 2 {
                    blocks = vec![(1, 1), (1, n - 1)];
                }
                let abelian: Vec<(usize, usize)> = blocks
                    .iter()
                    .flat_map(|&(s, m)| std::iter::repeat_n((1, m), s))
                    .collect();
                let a = MatrixStarAlgebra::block_diagonal(&abelian).conjugated(&u);
                instance.a1 = a.clone();
                instance.a2 = a;
            }
            instance.rotation = Some(u);
        }
        Family::HaarOverlap => {
            let n = rng.random_range(2..=6);
            instance.a1 = random_subalgebra(n, &mut rng);
            instance.a2 = random_subalgebra(n, &mut rng);
        }
        Family::FactorSplit => {
            let (d1, d2) = [(2, 3), (3, 2), (2, 4), (4, 2)][rng.random_range(0..4)];
            let u = haar_unitary_with(d1 * d2, &mut rng);
            instance.a1 = MatrixStarAlgebra::tensor_left(d1, d2).conjugated(&u);
            instance.a2 = MatrixStarAlgebra::tensor_right(d1, d2).conjugated(&u);
            instance.split = Some((d1, d2));
            instance.rotation = Some(u);
        }
    }
    instance
}

pub fn instances(family: Family, count: usize, seed: u64) -> Vec<FamilyInstance> {
    (0..count).map(|k| generate(family, seed, k)).collect()
}
