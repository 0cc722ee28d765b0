//! JSON instance and report files.
//!
//! Complex entries are `[re, im]` pairs and matrices are lists of rows. The
//! field-by-field description lives in `docs/formats.md`; golden files are
//! kept under the CLI crate's `tests/golden`.

use std::collections::BTreeMap;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::algebra::{generate_algebra, structure_decomposition, MatrixStarAlgebra};
use crate::channels::{
    is_faithful_map, map_from_choi, state_prep_operation, unitary_conjugation, ChannelMap,
    KrausSet, ProjectiveMeasurement,
};
use crate::error::{Error, Result};
use crate::families::Family;
use crate::independence::{
    implication_violations, verify_finding, Certificate, CertificateCheck, IndependenceReport,
    JointResiduals, Notion, SeparationData, Verdict,
};
use crate::numerics::{
    frobenius_norm, identity, matrix_from_rows, ComplexMatrix, JsonMatrix, Tolerances,
};
use crate::states::{AlgebraState, Separation};

pub const INSTANCE_VERSION: u32 = 1;
pub const REPORT_FORMAT: &str = "opindep-report";
pub const REPORT_VERSION: u32 = 1;
/// Largest ambient dimension accepted from files.
pub const MAX_AMBIENT_DIM: usize = 16;

pub type RawMatrix = Vec<Vec<[f64; 2]>>;

fn default_version() -> u32 {
    INSTANCE_VERSION
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    #[serde(default = "default_version")]
    pub version: u32,
    pub ambient_dim: usize,
    #[serde(default)]
    pub tolerances: Option<Tolerances>,
    #[serde(default)]
    pub seed: Option<u64>,
    pub algebras: BTreeMap<String, AlgebraSpec>,
    #[serde(default)]
    pub states: BTreeMap<String, StateSpec>,
    #[serde(default)]
    pub operations: BTreeMap<String, OperationSpec>,
    #[serde(default)]
    pub checks: Vec<CheckSpec>,
}

/// The algebra generated by `generators` (the scalars when empty).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgebraSpec {
    pub generators: Vec<RawMatrix>,
}

/// A state on a named algebra; the tracial state when `density` is absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateSpec {
    pub algebra: String,
    #[serde(default)]
    pub density: Option<RawMatrix>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OperationSpec {
    /// `X ↦ Σ W_i* X W_i`.
    Kraus {
        algebra: String,
        operators: Vec<RawMatrix>,
    },
    /// `X ↦ Σ P_i X P_i`.
    Luders {
        algebra: String,
        projections: Vec<RawMatrix>,
    },
    /// `X ↦ φ(X) I`.
    StatePrep {
        state: String,
    },
    Identity {
        algebra: String,
    },
    /// `X ↦ U* X U`.
    Unitary {
        algebra: String,
        unitary: RawMatrix,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CheckSpec {
    Hierarchy {
        pair: [String; 2],
        #[serde(default)]
        samples: Option<usize>,
        #[serde(default)]
        seed: Option<u64>,
        #[serde(default)]
        operation_pairs: Option<usize>,
    },
    ExtendState {
        states: [String; 2],
        #[serde(default)]
        max_iter: Option<usize>,
    },
    JointOperation {
        operations: [String; 2],
    },
}

/// A parsed and validated instance.
#[derive(Debug, Clone)]
pub struct Instance {
    pub ambient_dim: usize,
    pub tol: Tolerances,
    pub seed: u64,
    pub algebras: BTreeMap<String, MatrixStarAlgebra>,
    pub states: BTreeMap<String, AlgebraState>,
    pub state_algebras: BTreeMap<String, String>,
    pub operations: BTreeMap<String, ChannelMap>,
    pub operation_algebras: BTreeMap<String, String>,
    pub checks: Vec<CheckSpec>,
}

fn parse_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let value: T = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        Error::Parse {
            path: if path == "." {
                format!("line {}, column {}", inner.line(), inner.column())
            } else {
                format!("{path} (line {}, column {})", inner.line(), inner.column())
            },
            message: inner.to_string(),
        }
    })?;
    Ok(value)
}

fn invalid(path: impl Into<String>, message: impl ToString) -> Error {
    Error::Validation {
        path: path.into(),
        message: message.to_string(),
    }
}

fn at(path: &str) -> impl Fn(Error) -> Error + '_ {
    move |e| match e {
        Error::Validation { .. } | Error::Parse { .. } => e,
        other => invalid(path, other),
    }
}

/// Parses an instance without validating its contents.
pub fn parse_instance_file(text: &str) -> Result<InstanceFile> {
    parse_json(text)
}

/// Parses and validates an instance.
pub fn parse_instance(text: &str) -> Result<Instance> {
    parse_instance_file(text)?.resolve()
}

fn square_matrix(raw: &RawMatrix, n: usize, path: &str) -> Result<ComplexMatrix> {
    let m = matrix_from_rows(raw).map_err(|msg| invalid(path, msg))?;
    if m.shape() != (n, n) {
        return Err(invalid(
            path,
            format!(
                "expected a {n}x{n} matrix, found {}x{}",
                m.nrows(),
                m.ncols()
            ),
        ));
    }
    Ok(m)
}

fn lookup<'a, T>(
    map: &'a BTreeMap<String, T>,
    name: &str,
    path: &str,
    what: &str,
) -> Result<&'a T> {
    map.get(name)
        .ok_or_else(|| invalid(path, format!("unknown {what} `{name}`")))
}

impl InstanceFile {
    pub fn resolve(&self) -> Result<Instance> {
        if self.version != INSTANCE_VERSION {
            return Err(invalid(
                "version",
                format!("unsupported version {}", self.version),
            ));
        }
        let n = self.ambient_dim;
        if n == 0 || n > MAX_AMBIENT_DIM {
            return Err(invalid(
                "ambient_dim",
                format!("must be between 1 and {MAX_AMBIENT_DIM}"),
            ));
        }
        let tol = self.tolerances.unwrap_or_default();
        tol.validate().map_err(at("tolerances"))?;

        let mut algebras = BTreeMap::new();
        for (name, spec) in &self.algebras {
            let mut gens = Vec::with_capacity(spec.generators.len());
            for (k, g) in spec.generators.iter().enumerate() {
                gens.push(square_matrix(
                    g,
                    n,
                    &format!("algebras.{name}.generators[{k}]"),
                )?);
            }
            let a = generate_algebra(&gens, n, &tol).map_err(at(&format!("algebras.{name}")))?;
            algebras.insert(name.clone(), a);
        }

        let mut states = BTreeMap::new();
        let mut state_algebras = BTreeMap::new();
        for (name, spec) in &self.states {
            let path = format!("states.{name}");
            let a = lookup(
                &algebras,
                &spec.algebra,
                &format!("{path}.algebra"),
                "algebra",
            )?;
            let phi = match &spec.density {
                Some(raw) => {
                    let rho = square_matrix(raw, n, &format!("{path}.density"))?;
                    AlgebraState::new(a.clone(), rho, &tol)
                        .map_err(at(&format!("{path}.density")))?
                }
                None => AlgebraState::tracial(a.clone()),
            };
            states.insert(name.clone(), phi);
            state_algebras.insert(name.clone(), spec.algebra.clone());
        }

        let mut operations = BTreeMap::new();
        let mut operation_algebras = BTreeMap::new();
        for (name, spec) in &self.operations {
            let path = format!("operations.{name}");
            let (map, algebra) = match spec {
                OperationSpec::Kraus { algebra, operators } => {
                    let a = lookup(&algebras, algebra, &format!("{path}.algebra"), "algebra")?;
                    let mut ops = Vec::new();
                    for (k, w) in operators.iter().enumerate() {
                        ops.push(square_matrix(w, n, &format!("{path}.operators[{k}]"))?);
                    }
                    let kraus = KrausSet::new(ops).map_err(at(&format!("{path}.operators")))?;
                    (
                        ChannelMap::from_kraus(a.clone(), &kraus, &tol).map_err(at(&path))?,
                        algebra.clone(),
                    )
                }
                OperationSpec::Luders {
                    algebra,
                    projections,
                } => {
                    let a = lookup(&algebras, algebra, &format!("{path}.algebra"), "algebra")?;
                    let mut ps = Vec::new();
                    for (k, p) in projections.iter().enumerate() {
                        ps.push(square_matrix(p, n, &format!("{path}.projections[{k}]"))?);
                    }
                    let m = ProjectiveMeasurement::new(ps, &tol)
                        .map_err(at(&format!("{path}.projections")))?;
                    let kraus = KrausSet::new(m.projections().to_vec()).map_err(at(&path))?;
                    (
                        ChannelMap::from_kraus(a.clone(), &kraus, &tol).map_err(at(&path))?,
                        algebra.clone(),
                    )
                }
                OperationSpec::StatePrep { state } => {
                    let phi = lookup(&states, state, &format!("{path}.state"), "state")?;
                    (
                        state_prep_operation(phi, &tol),
                        state_algebras[state].clone(),
                    )
                }
                OperationSpec::Identity { algebra } => {
                    let a = lookup(&algebras, algebra, &format!("{path}.algebra"), "algebra")?;
                    (ChannelMap::identity(a.clone(), &tol), algebra.clone())
                }
                OperationSpec::Unitary { algebra, unitary } => {
                    let a = lookup(&algebras, algebra, &format!("{path}.algebra"), "algebra")?;
                    let u = square_matrix(unitary, n, &format!("{path}.unitary"))?;
                    let defect = frobenius_norm(&(u.adjoint() * &u - identity(n)));
                    if defect > tol.eps_verify {
                        return Err(invalid(
                            format!("{path}.unitary"),
                            format!("not unitary (residual {defect:.3e})"),
                        ));
                    }
                    (
                        unitary_conjugation(a.clone(), &u, &tol).map_err(at(&path))?,
                        algebra.clone(),
                    )
                }
            };
            operations.insert(name.clone(), map);
            operation_algebras.insert(name.clone(), algebra);
        }

        for (k, check) in self.checks.iter().enumerate() {
            let path = format!("checks[{k}]");
            match check {
                CheckSpec::Hierarchy { pair, .. } => {
                    for (i, name) in pair.iter().enumerate() {
                        lookup(&algebras, name, &format!("{path}.pair[{i}]"), "algebra")?;
                    }
                }
                CheckSpec::ExtendState { states: names, .. } => {
                    for (i, name) in names.iter().enumerate() {
                        lookup(&states, name, &format!("{path}.states[{i}]"), "state")?;
                    }
                }
                CheckSpec::JointOperation { operations: names } => {
                    for (i, name) in names.iter().enumerate() {
                        lookup(
                            &operations,
                            name,
                            &format!("{path}.operations[{i}]"),
                            "operation",
                        )?;
                    }
                }
            }
        }

        Ok(Instance {
            ambient_dim: n,
            tol,
            seed: self.seed.unwrap_or(0),
            algebras,
            states,
            state_algebras,
            operations,
            operation_algebras,
            checks: self.checks.clone(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgebraRecord {
    pub dim: usize,
    /// Wedderburn blocks `(size, multiplicity)`.
    pub blocks: Vec<(usize, usize)>,
    pub basis: Vec<JsonMatrix>,
}

impl AlgebraRecord {
    pub fn new(a: &MatrixStarAlgebra, tol: &Tolerances) -> Result<Self> {
        let dec = structure_decomposition(a, tol)?;
        Ok(AlgebraRecord {
            dim: a.dim(),
            blocks: dec
                .blocks
                .iter()
                .map(|b| (b.size, b.multiplicity))
                .collect(),
            basis: a.basis().iter().map(JsonMatrix::from).collect(),
        })
    }

    pub fn algebra(&self, n: usize, tol: &Tolerances) -> Result<MatrixStarAlgebra> {
        let basis: Vec<ComplexMatrix> = self.basis.iter().map(|m| m.0.clone()).collect();
        MatrixStarAlgebra::from_spanning_set(n, &basis, tol)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtensionRecord {
    pub status: String,
    pub iterations: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residual: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density: Option<JsonMatrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub separation: Option<SeparationData>,
}

/// One row of the product-transition table: `(T*φ)(a_i c_j)` against
/// `φ₁(a_i) φ₂(c_j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionRow {
    pub i: usize,
    pub j: usize,
    pub output: [f64; 2],
    pub product: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionRecord {
    pub inputs: usize,
    pub max_residual: f64,
    pub table: Vec<TransitionRow>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerdictCounts {
    pub holds: usize,
    pub fails: usize,
    pub undecided: usize,
}

impl VerdictCounts {
    pub fn add(&mut self, v: Verdict) {
        match v {
            Verdict::Holds => self.holds += 1,
            Verdict::Fails => self.fails += 1,
            Verdict::Undecided => self.undecided += 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzInstanceRecord {
    pub index: usize,
    pub ambient_dim: usize,
    pub dim1: usize,
    pub dim2: usize,
    pub join_dim: usize,
    pub commuting: bool,
    pub verdicts: BTreeMap<Notion, Verdict>,
    pub violations: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzSummary {
    pub family: Family,
    pub count: usize,
    pub seed: u64,
    pub samples: usize,
    pub totals: BTreeMap<Notion, VerdictCounts>,
    pub violations: usize,
    pub instances: Vec<FuzzInstanceRecord>,
}

impl FuzzSummary {
    pub fn new(family: Family, seed: u64, samples: usize) -> Self {
        FuzzSummary {
            family,
            count: 0,
            seed,
            samples,
            totals: Notion::ALL
                .iter()
                .map(|&n| (n, VerdictCounts::default()))
                .collect(),
            violations: 0,
            instances: Vec::new(),
        }
    }

    pub fn push(&mut self, index: usize, report: &IndependenceReport) {
        let verdicts: BTreeMap<Notion, Verdict> = report.verdicts().into_iter().collect();
        for (n, v) in &verdicts {
            self.totals.entry(*n).or_default().add(*v);
        }
        self.violations += report.violations.len();
        self.count += 1;
        self.instances.push(FuzzInstanceRecord {
            index,
            ambient_dim: report.ambient_dim,
            dim1: report.dim1,
            dim2: report.dim2,
            join_dim: report.join_dim,
            commuting: report.commuting,
            verdicts,
            violations: report.violations.clone(),
        });
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CheckRecord {
    Hierarchy {
        pair: [String; 2],
        report: Box<IndependenceReport>,
    },
    ExtendState {
        states: [String; 2],
        algebras: [String; 2],
        state1: JsonMatrix,
        state2: JsonMatrix,
        outcome: ExtensionRecord,
    },
    JointOperation {
        operations: [String; 2],
        algebras: [String; 2],
        /// Choi matrices of the inputs composed with the conditional
        /// expectations onto their algebras.
        first_choi: JsonMatrix,
        second_choi: JsonMatrix,
        choi: JsonMatrix,
        residuals: JointResiduals,
        faithful: bool,
        faithfulness_margin: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        transition: Option<TransitionRecord>,
    },
    Fuzz(FuzzSummary),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub format: String,
    pub version: u32,
    pub toolkit_version: String,
    pub ambient_dim: usize,
    pub tolerances: Tolerances,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_clock_ms: Option<f64>,
    pub algebras: BTreeMap<String, AlgebraRecord>,
    pub results: Vec<CheckRecord>,
}

impl ReportFile {
    pub fn new(ambient_dim: usize, tol: Tolerances, seed: u64) -> Self {
        ReportFile {
            format: REPORT_FORMAT.to_string(),
            version: REPORT_VERSION,
            toolkit_version: env!("CARGO_PKG_VERSION").to_string(),
            ambient_dim,
            tolerances: tol,
            seed,
            wall_clock_ms: None,
            algebras: BTreeMap::new(),
            results: Vec::new(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

pub fn parse_report(text: &str) -> Result<ReportFile> {
    let report: ReportFile = parse_json(text)?;
    if report.format != REPORT_FORMAT {
        return Err(invalid("format", format!("expected `{REPORT_FORMAT}`")));
    }
    if report.version != REPORT_VERSION {
        return Err(invalid(
            "version",
            format!("unsupported version {}", report.version),
        ));
    }
    if report.ambient_dim == 0 || report.ambient_dim > MAX_AMBIENT_DIM {
        return Err(invalid(
            "ambient_dim",
            format!("must be between 1 and {MAX_AMBIENT_DIM}"),
        ));
    }
    Ok(report)
}

/// Parses a single matrix in the interchange format.
pub fn parse_matrix(text: &str) -> Result<ComplexMatrix> {
    let raw: RawMatrix = parse_json(text)?;
    matrix_from_rows(&raw).map_err(|m| invalid("matrix", m))
}

/// One re-validation result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationLine {
    pub location: String,
    pub valid: Option<bool>,
    pub detail: String,
}

fn algebra_by_name(
    report: &ReportFile,
    cache: &mut BTreeMap<String, MatrixStarAlgebra>,
    name: &str,
    path: &str,
) -> Result<MatrixStarAlgebra> {
    if let Some(a) = cache.get(name) {
        return Ok(a.clone());
    }
    let record = lookup(&report.algebras, name, path, "algebra")?;
    let a = record
        .algebra(report.ambient_dim, &report.tolerances)
        .map_err(at(&format!("algebras.{name}")))?;
    cache.insert(name.to_string(), a.clone());
    Ok(a)
}

/// Re-validates every certificate in a report from the stored data alone.
pub fn verify_report(report: &ReportFile) -> Result<Vec<VerificationLine>> {
    let tol = report.tolerances;
    tol.validate().map_err(at("tolerances"))?;
    let n = report.ambient_dim;
    let mut cache = BTreeMap::new();
    let mut lines = Vec::new();
    for (k, result) in report.results.iter().enumerate() {
        let path = format!("results[{k}]");
        match result {
            CheckRecord::Hierarchy { pair, report: r } => {
                let a1 = algebra_by_name(report, &mut cache, &pair[0], &format!("{path}.pair[0]"))?;
                let a2 = algebra_by_name(report, &mut cache, &pair[1], &format!("{path}.pair[1]"))?;
                let mut checked = BTreeMap::new();
                for notion in Notion::ALL {
                    let check = verify_finding(&a1, &a2, notion, r.finding(notion), &tol)
                        .map_err(at(&format!("{path}.report.{}", notion.name())))?;
                    checked.insert(notion, check);
                }
                for notion in Notion::ALL {
                    let CertificateCheck { valid, detail, .. } = checked[&notion].clone();
                    // Derived certificates stand or fall with the one they
                    // lean on.
                    let (valid, detail) = match (&r.finding(notion).certificate, valid) {
                        (Certificate::Implied { from, verdict }, None) => (
                            Some(
                                r.verdict(*from) == *verdict && checked[from].valid != Some(false),
                            ),
                            format!("implied by {} = {verdict:?}", from.name()),
                        ),
                        (
                            Certificate::ProductExtensions { .. }
                            | Certificate::JointOperations { .. },
                            None,
                        ) => {
                            let base = &checked[&Notion::CstarProductSense];
                            (
                                Some(
                                    r.verdict(Notion::CstarProductSense) == Verdict::Holds
                                        && base.valid == Some(true),
                                ),
                                format!("built from the product isomorphism; {detail}"),
                            )
                        }
                        _ => (valid, detail),
                    };
                    lines.push(VerificationLine {
                        location: format!("{path}.report.{}", notion.name()),
                        valid,
                        detail,
                    });
                }
                let recomputed = implication_violations(r);
                lines.push(VerificationLine {
                    location: format!("{path}.report.violations"),
                    valid: Some(recomputed == r.violations && recomputed.is_empty()),
                    detail: format!("{} implication violations", recomputed.len()),
                });
            }
            CheckRecord::ExtendState {
                algebras,
                state1,
                state2,
                outcome,
                ..
            } => {
                let a1 = algebra_by_name(
                    report,
                    &mut cache,
                    &algebras[0],
                    &format!("{path}.algebras[0]"),
                )?;
                let a2 = algebra_by_name(
                    report,
                    &mut cache,
                    &algebras[1],
                    &format!("{path}.algebras[1]"),
                )?;
                let phi1 = AlgebraState::new(a1, state1.0.clone(), &tol)
                    .map_err(at(&format!("{path}.state1")))?;
                let phi2 = AlgebraState::new(a2, state2.0.clone(), &tol)
                    .map_err(at(&format!("{path}.state2")))?;
                let (valid, detail) = match (&outcome.density, &outcome.separation) {
                    (Some(rho), _) => {
                        let full = MatrixStarAlgebra::full(n);
                        match AlgebraState::new(full, rho.0.clone(), &tol) {
                            Ok(phi) => {
                                let r1 = AlgebraState::new(
                                    phi1.algebra().clone(),
                                    phi.density().clone(),
                                    &tol,
                                )?
                                .distance(&phi1);
                                let r2 = AlgebraState::new(
                                    phi2.algebra().clone(),
                                    phi.density().clone(),
                                    &tol,
                                )?
                                .distance(&phi2);
                                (
                                    Some(r1.max(r2) <= tol.eps_verify),
                                    format!("marginal residuals {r1:.3e}, {r2:.3e}"),
                                )
                            }
                            Err(e) => (Some(false), e.to_string()),
                        }
                    }
                    (None, Some(sep)) => {
                        let sep: Separation = sep.into();
                        let margin = sep.margin(&phi1, &phi2);
                        (
                            Some(margin > 0.0),
                            format!("separation margin {margin:.3e}"),
                        )
                    }
                    (None, None) => (None, format!("status {}", outcome.status)),
                };
                lines.push(VerificationLine {
                    location: path.clone(),
                    valid,
                    detail,
                });
            }
            CheckRecord::JointOperation {
                algebras,
                first_choi,
                second_choi,
                choi,
                ..
            } => {
                let a1 = algebra_by_name(
                    report,
                    &mut cache,
                    &algebras[0],
                    &format!("{path}.algebras[0]"),
                )?;
                let a2 = algebra_by_name(
                    report,
                    &mut cache,
                    &algebras[1],
                    &format!("{path}.algebras[1]"),
                )?;
                let t1 = map_from_choi(&first_choi.0, n, n, &tol)
                    .map_err(at(&format!("{path}.first_choi")))?;
                let t2 = map_from_choi(&second_choi.0, n, n, &tol)
                    .map_err(at(&format!("{path}.second_choi")))?;
                let t = map_from_choi(&choi.0, n, n, &tol).map_err(at(&format!("{path}.choi")))?;
                let mut r = JointResiduals {
                    unital: t.unitality_residual(),
                    ..Default::default()
                };
                for a in a1.basis() {
                    r.restriction1 = r
                        .restriction1
                        .max(frobenius_norm(&(t.apply(a) - t1.apply(a))));
                }
                for c in a2.basis() {
                    r.restriction2 = r
                        .restriction2
                        .max(frobenius_norm(&(t.apply(c) - t2.apply(c))));
                }
                for a in a1.basis() {
                    for c in a2.basis() {
                        let d = frobenius_norm(&(t.apply(&(a * c)) - t.apply(a) * t.apply(c)));
                        r.product = r.product.max(d);
                    }
                }
                let cp = t.flags().cp_certified;
                let faithful_ok = !(t1.flags().faithful && t2.flags().faithful)
                    || is_faithful_map(&t, &tol).unwrap_or(false);
                lines.push(VerificationLine {
                    location: path.clone(),
                    valid: Some(cp && r.max() <= tol.eps_verify && faithful_ok),
                    detail: format!("CP {cp}, residuals {r:?}"),
                });
            }
            CheckRecord::Fuzz(summary) => {
                let recount: usize = summary.instances.iter().map(|i| i.violations.len()).sum();
                lines.push(VerificationLine {
                    location: path.clone(),
                    valid: Some(
                        recount == summary.violations
                            && summary.violations == 0
                            && summary.count == summary.instances.len(),
                    ),
                    detail: format!(
                        "{} instances, {} violations",
                        summary.count, summary.violations
                    ),
                });
            }
        }
    }
    Ok(lines)
}
