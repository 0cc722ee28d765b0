//! Deciding and certifying the independence notions for a pair of
//! subalgebras `A1, A2 ⊆ M_n`.
//!
//! For commuting pairs every notion is decided exactly: the product
//! isomorphism exists iff no two minimal central projections are orthogonal,
//! and the operational and product-state notions follow from it. The split
//! property is decided through interpolating type I factors. Non-commuting
//! pairs are only semi-decided by sampling.

mod checks;
mod operations;
mod product;
mod report;
mod sampler;
mod split;

pub use checks::{
    central_witness, check_cstar_independence, check_wstar_independence, CentralWitness,
    IndependenceVerdict, IndependenceWitness, SamplingSummary, SeparationWitness,
};
pub use operations::{
    extracted_product_state, joint_operation, random_nonselective_operation, random_unitary_in,
    state_prep_pair, verify_product_transition, JointOperation, JointResiduals, TransitionCheck,
};
pub use product::{
    check_product_sense, check_wstar_product_sense, DimensionWitness, IsomorphismResiduals,
    ProductIsomorphism, ProductSense,
};
pub use report::{
    implication_violations, run_hierarchy_checks, verify_finding, Certificate, CertificateCheck,
    Finding, HierarchyConfig, IndependenceReport, Notion, SeparationData, Verdict, IMPLICATIONS,
};
pub use sampler::{SampleKind, Sampler, StatePair};
pub use split::{
    check_spatial_product_sense, factor_residuals, find_interpolating_factor, left_part,
    right_part, FactorResiduals, FactorRoute, FactorSearch, InterpolatingFactor,
};
