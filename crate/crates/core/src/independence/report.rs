use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::checks::{
    check_cstar_independence, IndependenceVerdict, IndependenceWitness, SamplingSummary,
};
use super::operations::{
    extracted_product_state, joint_operation, random_nonselective_operation, state_prep_pair,
    verify_product_transition, JointResiduals,
};
use super::product::{check_product_sense, IsomorphismResiduals, ProductIsomorphism, ProductSense};
use super::sampler::Sampler;
use super::split::{
    factor_residuals, factor_table, find_interpolating_factor, FactorResiduals, FactorRoute,
    FactorSearch,
};
use crate::algebra::{
    center, check_ambient, join, max_commutator, mutually_commute, MatrixStarAlgebra,
};
use crate::error::{Error, Result};
use crate::numerics::{
    commutator, frobenius_norm, seeded_rng, ComplexMatrix, JsonMatrix, Tolerances,
};
use crate::states::{product_defect, product_state, AlgebraState, Separation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Holds,
    Fails,
    Undecided,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Notion {
    CstarIndependent,
    CstarProductSense,
    WstarIndependent,
    WstarProductSense,
    OpCstar,
    OpWstar,
    OpCstarProduct,
    OpWstarProduct,
    Split,
}

impl Notion {
    pub const ALL: [Notion; 9] = [
        Notion::CstarIndependent,
        Notion::CstarProductSense,
        Notion::WstarIndependent,
        Notion::WstarProductSense,
        Notion::OpCstar,
        Notion::OpWstar,
        Notion::OpCstarProduct,
        Notion::OpWstarProduct,
        Notion::Split,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Notion::CstarIndependent => "cstar_independent",
            Notion::CstarProductSense => "cstar_product_sense",
            Notion::WstarIndependent => "wstar_independent",
            Notion::WstarProductSense => "wstar_product_sense",
            Notion::OpCstar => "op_cstar",
            Notion::OpWstar => "op_wstar",
            Notion::OpCstarProduct => "op_cstar_product",
            Notion::OpWstarProduct => "op_wstar_product",
            Notion::Split => "split",
        }
    }
}

/// `(p, q)`: `p` Holds forces `q` not to Fail.
pub const IMPLICATIONS: [(Notion, Notion); 11] = [
    (Notion::CstarProductSense, Notion::CstarIndependent),
    (Notion::WstarProductSense, Notion::WstarIndependent),
    (Notion::WstarProductSense, Notion::CstarProductSense),
    (Notion::OpCstarProduct, Notion::OpCstar),
    (Notion::OpWstarProduct, Notion::OpWstar),
    (Notion::OpCstar, Notion::CstarIndependent),
    (Notion::OpWstar, Notion::WstarIndependent),
    (Notion::Split, Notion::WstarProductSense),
    (Notion::WstarIndependent, Notion::CstarIndependent),
    (Notion::CstarIndependent, Notion::WstarIndependent),
    (Notion::WstarProductSense, Notion::OpWstarProduct),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SeparationData {
    LinearConflict {
        y1: JsonMatrix,
        y2: JsonMatrix,
        value: f64,
    },
    Hyperplane {
        h1: JsonMatrix,
        h2: JsonMatrix,
        level: f64,
        support: f64,
    },
}

impl From<&Separation> for SeparationData {
    fn from(s: &Separation) -> Self {
        match s {
            Separation::LinearConflict { y1, y2, value } => SeparationData::LinearConflict {
                y1: y1.into(),
                y2: y2.into(),
                value: *value,
            },
            Separation::Hyperplane {
                h1,
                h2,
                level,
                support,
            } => SeparationData::Hyperplane {
                h1: h1.into(),
                h2: h2.into(),
                level: *level,
                support: *support,
            },
        }
    }
}

impl From<&SeparationData> for Separation {
    fn from(s: &SeparationData) -> Self {
        match s {
            SeparationData::LinearConflict { y1, y2, value } => Separation::LinearConflict {
                y1: y1.0.clone(),
                y2: y2.0.clone(),
                value: *value,
            },
            SeparationData::Hyperplane {
                h1,
                h2,
                level,
                support,
            } => Separation::Hyperplane {
                h1: h1.0.clone(),
                h2: h2.0.clone(),
                level: *level,
                support: *support,
            },
        }
    }
}

/// Evidence attached to a verdict. Densities are ambient representatives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Certificate {
    None,
    /// Verdict forced by another notion through a proven implication.
    Implied {
        from: Notion,
        verdict: Verdict,
    },
    ProductIsomorphism {
        join_dim: usize,
        eta: JsonMatrix,
        residuals: IsomorphismResiduals,
    },
    /// Every sampled pair extended by the product state on the join.
    ProductExtensions {
        summary: SamplingSummary,
    },
    SampledExtensions {
        summary: SamplingSummary,
    },
    CentralProjections {
        z1: JsonMatrix,
        z2: JsonMatrix,
        overlap: f64,
        state1: JsonMatrix,
        state2: JsonMatrix,
    },
    Separation {
        state1: JsonMatrix,
        state2: JsonMatrix,
        separation: SeparationData,
        gap: f64,
    },
    /// `Σ T_ij a_i c_j = 0` while `Σ T_ij φ₁(a_i) φ₂(c_j) = value ≠ 0`.
    Relation {
        relation: JsonMatrix,
        relation_residual: f64,
        state1: JsonMatrix,
        state2: JsonMatrix,
        value: [f64; 2],
    },
    Commutator {
        x: JsonMatrix,
        y: JsonMatrix,
        norm: f64,
    },
    ProductState {
        density: JsonMatrix,
        faithfulness_margin: f64,
        product_defect: f64,
        sampled_pairs: usize,
    },
    JointOperations {
        pairs: usize,
        residuals: JointResiduals,
        min_faithfulness_margin: f64,
        transition_residual: f64,
        extracted_state_margin: f64,
    },
    /// The state-preparing operations for a pair of states without a joint
    /// extension cannot have a joint extension either.
    StatePrepObstruction {
        state1: JsonMatrix,
        state2: JsonMatrix,
    },
    InterpolatingFactor {
        route: FactorRoute,
        d1: usize,
        d2: usize,
        unitary: JsonMatrix,
        factor_basis: Vec<JsonMatrix>,
        residuals: FactorResiduals,
    },
    Multiplicities {
        table: Vec<Vec<usize>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Finding {
    pub verdict: Verdict,
    pub reason: String,
    pub certificate: Certificate,
}

impl Finding {
    fn new(verdict: Verdict, reason: impl Into<String>, certificate: Certificate) -> Self {
        Finding {
            verdict,
            reason: reason.into(),
            certificate,
        }
    }

    fn implied(verdict: Verdict, from: Notion, reason: impl Into<String>) -> Self {
        Finding::new(verdict, reason, Certificate::Implied { from, verdict })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HierarchyConfig {
    pub seed: u64,
    /// State pairs per sampling check.
    pub samples: usize,
    /// Random operation pairs fed to the joint-operation construction.
    pub operation_pairs: usize,
    /// Random input states for the product-transition check.
    pub transition_sweep: usize,
    pub tol: Tolerances,
}

impl Default for HierarchyConfig {
    fn default() -> Self {
        HierarchyConfig {
            seed: 0,
            samples: 50,
            operation_pairs: 4,
            transition_sweep: 4,
            tol: Tolerances::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndependenceReport {
    pub ambient_dim: usize,
    pub dim1: usize,
    pub dim2: usize,
    pub join_dim: usize,
    pub commuting: bool,
    pub max_commutator: f64,
    pub seed: u64,
    pub samples: usize,
    pub operation_pairs: usize,
    pub cstar_independent: Finding,
    pub cstar_product_sense: Finding,
    pub wstar_independent: Finding,
    pub wstar_product_sense: Finding,
    pub op_cstar: Finding,
    pub op_wstar: Finding,
    pub op_cstar_product: Finding,
    pub op_wstar_product: Finding,
    pub split: Finding,
    pub violations: Vec<String>,
    pub notes: Vec<String>,
}

impl IndependenceReport {
    pub fn finding(&self, notion: Notion) -> &Finding {
        match notion {
            Notion::CstarIndependent => &self.cstar_independent,
            Notion::CstarProductSense => &self.cstar_product_sense,
            Notion::WstarIndependent => &self.wstar_independent,
            Notion::WstarProductSense => &self.wstar_product_sense,
            Notion::OpCstar => &self.op_cstar,
            Notion::OpWstar => &self.op_wstar,
            Notion::OpCstarProduct => &self.op_cstar_product,
            Notion::OpWstarProduct => &self.op_wstar_product,
            Notion::Split => &self.split,
        }
    }

    pub fn verdict(&self, notion: Notion) -> Verdict {
        self.finding(notion).verdict
    }

    pub fn verdicts(&self) -> Vec<(Notion, Verdict)> {
        Notion::ALL.iter().map(|&n| (n, self.verdict(n))).collect()
    }
}

/// Implications violated by the verdicts of `report`.
pub fn implication_violations(report: &IndependenceReport) -> Vec<String> {
    let mut out = Vec::new();
    for &(p, q) in IMPLICATIONS.iter() {
        if report.verdict(p) == Verdict::Holds && report.verdict(q) == Verdict::Fails {
            out.push(format!("{} holds but {} fails", p.name(), q.name()));
        }
    }
    if report.commuting {
        let a = report.verdict(Notion::CstarProductSense);
        for q in [
            Notion::OpCstarProduct,
            Notion::OpCstar,
            Notion::CstarIndependent,
        ] {
            let b = report.verdict(q);
            if (a == Verdict::Holds && b == Verdict::Fails)
                || (a == Verdict::Fails && b == Verdict::Holds)
            {
                out.push(format!(
                    "commuting pair: {} is {a:?} but {} is {b:?}",
                    Notion::CstarProductSense.name(),
                    q.name()
                ));
            }
        }
    }
    out
}

fn state_json(phi: &AlgebraState) -> JsonMatrix {
    phi.density().into()
}

fn independence_finding(v: &IndependenceVerdict) -> Finding {
    match v {
        IndependenceVerdict::Holds { summary, .. } => Finding::new(
            Verdict::Holds,
            "product isomorphism exists; every pair extends by the product state on the join",
            Certificate::ProductExtensions { summary: *summary },
        ),
        IndependenceVerdict::Fails(IndependenceWitness::Central(w)) => Finding::new(
            Verdict::Fails,
            "orthogonal minimal central projections: states concentrated on them have no joint extension",
            Certificate::CentralProjections {
                z1: (&w.z1).into(),
                z2: (&w.z2).into(),
                overlap: w.overlap,
                state1: state_json(&w.state1),
                state2: state_json(&w.state2),
            },
        ),
        IndependenceVerdict::Fails(IndependenceWitness::Separation(w)) => Finding::new(
            Verdict::Fails,
            "extension problem certified infeasible for a sampled state pair",
            Certificate::Separation {
                state1: state_json(&w.state1),
                state2: state_json(&w.state2),
                separation: (&w.separation).into(),
                gap: w.gap,
            },
        ),
        IndependenceVerdict::Undecided { reason, summary } => Finding::new(
            Verdict::Undecided,
            reason.clone(),
            Certificate::SampledExtensions { summary: *summary },
        ),
    }
}

fn obstruction_states(v: &IndependenceVerdict) -> Option<(JsonMatrix, JsonMatrix)> {
    match v {
        IndependenceVerdict::Fails(IndependenceWitness::Central(w)) => {
            Some((state_json(&w.state1), state_json(&w.state2)))
        }
        IndependenceVerdict::Fails(IndependenceWitness::Separation(w)) => {
            Some((state_json(&w.state1), state_json(&w.state2)))
        }
        _ => None,
    }
}

fn commutator_witness(a1: &MatrixStarAlgebra, a2: &MatrixStarAlgebra) -> Certificate {
    let mut best = (0.0, 0, 0);
    for (i, x) in a1.basis().iter().enumerate() {
        for (j, y) in a2.basis().iter().enumerate() {
            let c = frobenius_norm(&commutator(x, y));
            if c > best.0 {
                best = (c, i, j);
            }
        }
    }
    Certificate::Commutator {
        x: (&a1.basis()[best.1]).into(),
        y: (&a2.basis()[best.2]).into(),
        norm: best.0,
    }
}

fn product_state_finding(
    iso: &ProductIsomorphism,
    a1: &MatrixStarAlgebra,
    a2: &MatrixStarAlgebra,
    cfg: &HierarchyConfig,
) -> Result<Finding> {
    let tol = &cfg.tol;
    let faithful = product_state(
        &AlgebraState::tracial(a1.clone()),
        &AlgebraState::tracial(a2.clone()),
        iso,
        tol,
    )?;
    let margin = faithful.faithfulness_margin(tol)?;
    let mut defect = product_defect(&faithful, a1, a2, tol)?;
    let pairs = Sampler::new(cfg.seed ^ 0x5eed, cfg.samples.min(10)).state_pairs(a1, a2, tol)?;
    for pair in &pairs {
        let phi = product_state(&pair.phi1, &pair.phi2, iso, tol)?;
        defect = defect.max(product_defect(&phi, a1, a2, tol)?);
    }
    let ok = margin > tol.eps_psd && defect <= tol.eps_verify;
    Ok(Finding::new(
        if ok {
            Verdict::Holds
        } else {
            Verdict::Undecided
        },
        if ok {
            "faithful normal product state on the join from tracial marginals; sampled marginals extend to product states"
        } else {
            "product state construction did not verify"
        },
        Certificate::ProductState {
            density: faithful.density().into(),
            faithfulness_margin: margin,
            product_defect: defect,
            sampled_pairs: pairs.len(),
        },
    ))
}

fn operational_finding(
    iso: &ProductIsomorphism,
    a1: &MatrixStarAlgebra,
    a2: &MatrixStarAlgebra,
    cfg: &HierarchyConfig,
) -> Result<Finding> {
    let tol = &cfg.tol;
    let mut rng = seeded_rng(cfg.seed.wrapping_add(0x0fe7));
    let mut worst = JointResiduals::default();
    let mut min_margin = f64::INFINITY;
    let mut all_faithful = true;
    for _ in 0..cfg.operation_pairs {
        let t1 = random_nonselective_operation(a1, &mut rng, tol)?;
        let t2 = random_nonselective_operation(a2, &mut rng, tol)?;
        let joint = joint_operation(&t1, &t2, iso, tol)?;
        let r = joint.residuals;
        worst.restriction1 = worst.restriction1.max(r.restriction1);
        worst.restriction2 = worst.restriction2.max(r.restriction2);
        worst.product = worst.product.max(r.product);
        worst.unital = worst.unital.max(r.unital);
        min_margin = min_margin.min(joint.faithfulness_margin);
        all_faithful &= !joint.inputs_faithful || joint.is_faithful(tol);
    }
    let phi1 = AlgebraState::tracial(a1.clone());
    let phi2 = AlgebraState::tracial(a2.clone());
    let (p1, p2) = state_prep_pair(&phi1, &phi2, tol);
    let prep = joint_operation(&p1, &p2, iso, tol)?;
    let n = a1.ambient_dim();
    let input = AlgebraState::tracial(MatrixStarAlgebra::full(n));
    let transition = verify_product_transition(
        &prep.map,
        &input,
        &phi1,
        &phi2,
        cfg.transition_sweep,
        cfg.seed,
        tol,
    )?;
    let extracted = extracted_product_state(&prep.map, &input, iso.join(), tol)?;
    let extracted_margin = extracted.faithfulness_margin(tol)?;
    let ok = worst.max().max(prep.residuals.max()) <= tol.eps_verify
        && transition.holds
        && all_faithful
        && extracted_margin > tol.eps_psd;
    if cfg.operation_pairs == 0 {
        min_margin = prep.faithfulness_margin;
    }
    Ok(Finding::new(
        if ok {
            Verdict::Holds
        } else {
            Verdict::Undecided
        },
        if ok {
            "joint extensions built through the product isomorphism; restrictions, product rule and faithfulness verified"
        } else {
            "joint extension construction did not verify on every sampled pair"
        },
        Certificate::JointOperations {
            pairs: cfg.operation_pairs + 1,
            residuals: JointResiduals {
                restriction1: worst.restriction1.max(prep.residuals.restriction1),
                restriction2: worst.restriction2.max(prep.residuals.restriction2),
                product: worst.product.max(prep.residuals.product),
                unital: worst.unital.max(prep.residuals.unital),
            },
            min_faithfulness_margin: min_margin,
            transition_residual: transition.max_residual,
            extracted_state_margin: extracted_margin,
        },
    ))
}

fn split_finding(search: &FactorSearch) -> Finding {
    match search {
        FactorSearch::Found(f) => Finding::new(
            Verdict::Holds,
            format!("interpolating type I factor M_{} ⊗ 1 found", f.d1),
            Certificate::InterpolatingFactor {
                route: f.route,
                d1: f.d1,
                d2: f.d2,
                unitary: (&f.unitary).into(),
                factor_basis: f.factor.basis().iter().map(JsonMatrix::from).collect(),
                residuals: f.residuals,
            },
        ),
        FactorSearch::NotFound {
            reason,
            multiplicities,
        } => Finding::new(
            Verdict::Fails,
            reason.clone(),
            Certificate::Multiplicities {
                table: multiplicities.clone(),
            },
        ),
        FactorSearch::Undecided(reason) => {
            Finding::new(Verdict::Undecided, reason.clone(), Certificate::None)
        }
    }
}

/// Fills every verdict for the pair and records any implication violation.
pub fn run_hierarchy_checks(
    a1: &MatrixStarAlgebra,
    a2: &MatrixStarAlgebra,
    cfg: &HierarchyConfig,
) -> Result<IndependenceReport> {
    check_ambient(a1, a2)?;
    let tol = &cfg.tol;
    let commuting = mutually_commute(a1, a2, tol)?;
    let joined = join(a1, a2, tol)?;
    let sampler = Sampler::new(cfg.seed, cfg.samples);
    let independence = check_cstar_independence(a1, a2, &sampler, tol)?;
    let cstar_independent = independence_finding(&independence);
    let mut wstar_independent = cstar_independent.clone();
    wstar_independent.reason = format!(
        "every state is normal in finite dimension: {}",
        cstar_independent.reason
    );

    let mut notes = vec![
        "converse implications fail only in infinite dimension (type III examples) and are not tested".to_string(),
    ];
    let (cstar_product_sense, wstar_product_sense, op, op_product, split);
    if commuting {
        let sense = match &independence {
            IndependenceVerdict::Holds { isomorphism, .. } => {
                ProductSense::Holds(isomorphism.clone())
            }
            _ => check_product_sense(a1, a2, tol, cfg.seed)?,
        };
        match sense {
            ProductSense::Holds(iso) => {
                cstar_product_sense = Finding::new(
                    Verdict::Holds,
                    format!(
                        "dim(join) = {} = {}·{}",
                        iso.join().dim(),
                        a1.dim(),
                        a2.dim()
                    ),
                    Certificate::ProductIsomorphism {
                        join_dim: iso.join().dim(),
                        eta: iso.matrix().into(),
                        residuals: iso.residuals(),
                    },
                );
                wstar_product_sense = product_state_finding(&iso, a1, a2, cfg)?;
                let f = operational_finding(&iso, a1, a2, cfg)?;
                op = f.clone();
                op_product = f;
            }
            ProductSense::Fails(w) => {
                cstar_product_sense = Finding::new(
                    Verdict::Fails,
                    format!("dim(join) = {} < {}", w.join_dim, w.product_dim),
                    Certificate::Relation {
                        relation: (&w.relation).into(),
                        relation_residual: w.relation_residual,
                        state1: state_json(&w.state1),
                        state2: state_json(&w.state2),
                        value: [w.value.re, w.value.im],
                    },
                );
                let mut f = cstar_product_sense.clone();
                f.reason = format!(
                    "product functional is ill-defined on the join: {}",
                    f.reason
                );
                wstar_product_sense = f;
                (op, op_product) = match obstruction_states(&independence) {
                    Some((state1, state2)) => {
                        let f = Finding::new(
                            Verdict::Fails,
                            "state-preparing operations for a non-extendable state pair have no joint extension",
                            Certificate::StatePrepObstruction { state1, state2 },
                        );
                        (f.clone(), f)
                    }
                    None => {
                        let f = Finding::implied(
                            Verdict::Undecided,
                            Notion::CstarIndependent,
                            "no product isomorphism and independence undecided",
                        );
                        (f.clone(), f)
                    }
                };
            }
        }
        split = split_finding(&find_interpolating_factor(a1, a2, tol)?);
    } else {
        let witness = commutator_witness(a1, a2);
        cstar_product_sense = Finding::new(
            Verdict::Fails,
            "the algebras do not commute",
            witness.clone(),
        );
        wstar_product_sense = Finding::implied(
            Verdict::Fails,
            Notion::CstarProductSense,
            "product sense in the W* form implies the C* form, which fails",
        );
        op = match obstruction_states(&independence) {
            Some((state1, state2)) => Finding::new(
                Verdict::Fails,
                "state-preparing operations for a non-extendable state pair have no joint extension",
                Certificate::StatePrepObstruction { state1, state2 },
            ),
            None => Finding::implied(
                Verdict::Undecided,
                Notion::CstarIndependent,
                "non-commuting pair: operational independence not decided",
            ),
        };
        op_product = match op.verdict {
            Verdict::Fails => Finding::implied(
                Verdict::Fails,
                Notion::OpCstar,
                "operational independence fails",
            ),
            _ => Finding::implied(
                Verdict::Undecided,
                Notion::OpCstar,
                "non-commuting pair: product-sense operational independence not decided",
            ),
        };
        split = Finding::new(
            Verdict::Fails,
            "an interpolating factor forces the algebras to commute",
            witness,
        );
        notes.push("non-commuting pair: independence is only semi-decided by sampling".to_string());
    }

    let mut report = IndependenceReport {
        ambient_dim: a1.ambient_dim(),
        dim1: a1.dim(),
        dim2: a2.dim(),
        join_dim: joined.dim(),
        commuting,
        max_commutator: max_commutator(a1, a2)?,
        seed: cfg.seed,
        samples: cfg.samples,
        operation_pairs: cfg.operation_pairs,
        cstar_independent,
        cstar_product_sense,
        wstar_independent,
        wstar_product_sense,
        op_cstar: op.clone(),
        op_wstar: op,
        op_cstar_product: op_product.clone(),
        op_wstar_product: op_product,
        split,
        violations: Vec::new(),
        notes,
    };
    report.violations = implication_violations(&report);
    Ok(report)
}

/// Outcome of re-validating a stored certificate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateCheck {
    pub notion: Notion,
    /// `None` when the certificate is informational and carries nothing to
    /// re-check.
    pub valid: Option<bool>,
    pub detail: String,
}

fn state_on(a: &MatrixStarAlgebra, m: &JsonMatrix, tol: &Tolerances) -> Result<AlgebraState> {
    AlgebraState::new(a.clone(), m.0.clone(), tol)
}

fn is_central_projection(
    a: &MatrixStarAlgebra,
    z: &ComplexMatrix,
    tol: &Tolerances,
) -> Result<bool> {
    let idem = frobenius_norm(&(z * z - z)) + frobenius_norm(&(z - z.adjoint()));
    Ok(idem <= tol.eps_verify && center(a)?.contains(z, tol) && frobenius_norm(z) > 0.5)
}

/// Block order depends on the basis an algebra was read from, so tables are
/// compared through their sorted rows and sorted columns.
fn same_table_up_to_order(a: &[Vec<usize>], b: &[Vec<usize>]) -> bool {
    fn profile(t: &[Vec<usize>]) -> (Vec<Vec<usize>>, Vec<Vec<usize>>) {
        let cols = t.first().map_or(0, Vec::len);
        let mut rows: Vec<Vec<usize>> = t
            .iter()
            .map(|r| {
                let mut r = r.clone();
                r.sort();
                r
            })
            .collect();
        let mut columns: Vec<Vec<usize>> = (0..cols)
            .map(|j| {
                let mut c: Vec<usize> = t.iter().map(|r| r[j]).collect();
                c.sort();
                c
            })
            .collect();
        rows.sort();
        columns.sort();
        (rows, columns)
    }
    let rectangular = |t: &[Vec<usize>]| t.iter().all(|r| r.len() == t.first().map_or(0, Vec::len));
    rectangular(a) && rectangular(b) && profile(a) == profile(b)
}

/// Re-validates the certificate of `finding` against the algebras, using
/// only the stored data and fresh computation.
pub fn verify_finding(
    a1: &MatrixStarAlgebra,
    a2: &MatrixStarAlgebra,
    notion: Notion,
    finding: &Finding,
    tol: &Tolerances,
) -> Result<CertificateCheck> {
    let (valid, detail): (Option<bool>, String) = match &finding.certificate {
        Certificate::ProductIsomorphism { eta, .. } => {
            match ProductIsomorphism::from_matrix(a1, a2, eta.0.clone(), tol) {
                Ok(iso) => (Some(true), format!("η re-certified: {:?}", iso.residuals())),
                Err(e) => (Some(false), e.to_string()),
            }
        }
        Certificate::CentralProjections {
            z1,
            z2,
            state1,
            state2,
            ..
        } => {
            let phi1 = state_on(a1, state1, tol)?;
            let phi2 = state_on(a2, state2, tol)?;
            let overlap = frobenius_norm(&(&z1.0 * &z2.0));
            let ok = is_central_projection(a1, &z1.0, tol)?
                && is_central_projection(a2, &z2.0, tol)?
                && overlap <= tol.eps_verify
                && (phi1.value(&z1.0) - Complex64::new(1.0, 0.0)).norm() <= tol.eps_verify
                && (phi2.value(&z2.0) - Complex64::new(1.0, 0.0)).norm() <= tol.eps_verify;
            (Some(ok), format!("‖z1 z2‖ = {overlap:.3e}"))
        }
        Certificate::Separation {
            state1,
            state2,
            separation,
            ..
        } => {
            let phi1 = state_on(a1, state1, tol)?;
            let phi2 = state_on(a2, state2, tol)?;
            let sep: Separation = separation.into();
            let in_algebras = match &sep {
                Separation::LinearConflict { y1, y2, .. } => {
                    a1.contains(y1, tol) && a2.contains(y2, tol)
                }
                Separation::Hyperplane { h1, h2, .. } => {
                    a1.contains(h1, tol) && a2.contains(h2, tol)
                }
            };
            let margin = sep.margin(&phi1, &phi2);
            (
                Some(in_algebras && margin > 0.0),
                format!("separation margin {margin:.3e}"),
            )
        }
        Certificate::Relation {
            relation,
            state1,
            state2,
            ..
        } => {
            let t = &relation.0;
            if t.shape() != (a1.dim(), a2.dim()) {
                return Err(Error::Validation {
                    path: format!("{}.certificate.relation", notion.name()),
                    message: format!("expected {}x{} coefficients", a1.dim(), a2.dim()),
                });
            }
            let phi1 = state_on(a1, state1, tol)?;
            let phi2 = state_on(a2, state2, tol)?;
            let n = a1.ambient_dim();
            let mut sum = ComplexMatrix::zeros(n, n);
            let mut value = Complex64::new(0.0, 0.0);
            for (i, a) in a1.basis().iter().enumerate() {
                for (j, c) in a2.basis().iter().enumerate() {
                    sum += (a * c) * t[(i, j)];
                    value += t[(i, j)] * phi1.value(a) * phi2.value(c);
                }
            }
            let residual = frobenius_norm(&sum);
            (
                Some(residual <= tol.eps_verify && value.norm() > 10.0 * tol.eps_verify),
                format!(
                    "relation residual {residual:.3e}, value {:.3e}",
                    value.norm()
                ),
            )
        }
        Certificate::Commutator { x, y, .. } => {
            let norm = frobenius_norm(&commutator(&x.0, &y.0));
            (
                Some(a1.contains(&x.0, tol) && a2.contains(&y.0, tol) && norm > tol.eps_algebra),
                format!("‖[x, y]‖ = {norm:.3e}"),
            )
        }
        Certificate::ProductState { density, .. } => {
            let joined = join(a1, a2, tol)?;
            let phi = AlgebraState::new(joined, density.0.clone(), tol)?;
            let defect = product_defect(&phi, a1, a2, tol)?;
            let margin = phi.faithfulness_margin(tol)?;
            (
                Some(defect <= tol.eps_verify && margin > tol.eps_psd),
                format!("product defect {defect:.3e}, faithfulness margin {margin:.3e}"),
            )
        }
        Certificate::StatePrepObstruction { state1, state2 } => {
            let phi1 = state_on(a1, state1, tol)?;
            let phi2 = state_on(a2, state2, tol)?;
            let outcome = crate::states::extend_state(
                &phi1,
                &phi2,
                &crate::states::ExtensionOptions::with_tolerances(*tol),
            )?;
            (
                Some(outcome.is_infeasible()),
                format!("extension of the state pair: {}", outcome.status()),
            )
        }
        Certificate::InterpolatingFactor {
            d1,
            d2,
            unitary,
            factor_basis,
            ..
        } => {
            let n = a1.ambient_dim();
            let basis: Vec<ComplexMatrix> = factor_basis.iter().map(|m| m.0.clone()).collect();
            let factor = MatrixStarAlgebra::from_spanning_set(n, &basis, tol)?;
            let r = factor_residuals(a1, a2, &factor, &unitary.0, *d1, *d2)?;
            let is_factor = center(&factor)?.dim() == 1;
            let ok = is_factor
                && r.unitary <= 1e-10 * n as f64
                && r.left.max(r.right).max(r.product).max(r.commutation) <= tol.eps_verify
                && r.containment <= tol.eps_verify;
            (Some(ok), format!("{r:?}"))
        }
        Certificate::Multiplicities { table } => match find_interpolating_factor(a1, a2, tol)? {
            FactorSearch::NotFound { multiplicities, .. } => (
                Some(
                    same_table_up_to_order(&multiplicities, table) && factor_table(table).is_none(),
                ),
                "multiplicity table recomputed".to_string(),
            ),
            _ => (Some(false), "an interpolating factor exists".to_string()),
        },
        Certificate::None
        | Certificate::Implied { .. }
        | Certificate::ProductExtensions { .. }
        | Certificate::SampledExtensions { .. }
        | Certificate::JointOperations { .. } => (None, "informational".to_string()),
    };
    Ok(CertificateCheck {
        notion,
        valid,
        detail,
    })
}
