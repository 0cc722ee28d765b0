//! Commands behind the `opindep` binary. Each command returns a
//! [`ReportFile`]; rendering and exit codes live here too so the binary stays
//! a thin argument parser.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Instant;

use opindep::channels::dual_on_states;
use opindep::families::{generate, Family};
use opindep::independence::{
    joint_operation, run_hierarchy_checks, verify_product_transition, HierarchyConfig, Notion,
    ProductIsomorphism, Verdict,
};
use opindep::io::{
    parse_instance_file, parse_report, verify_report, AlgebraRecord, CheckRecord, CheckSpec,
    ExtensionRecord, FuzzSummary, Instance, InstanceFile, OperationSpec, ReportFile,
    TransitionRecord, TransitionRow, VerificationLine,
};
use opindep::states::{extend_state, ExtensionOptions, ExtensionOutcome};
use opindep::{AlgebraState, Error, MatrixStarAlgebra, Result, Tolerances};

pub const EXIT_OK: i32 = 0;
/// Some certificate in a report failed re-validation.
pub const EXIT_REJECTED: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

pub fn exit_code(err: &Error) -> i32 {
    if err.is_numerical() {
        EXIT_NUMERICAL
    } else {
        EXIT_INPUT
    }
}

/// Overrides shared by the commands; `None` keeps the file's value.
#[derive(Debug, Clone, Copy, Default)]
pub struct Flags {
    pub seed: Option<u64>,
    pub samples: Option<usize>,
    /// Replaces `eps_verify`.
    pub tol: Option<f64>,
    /// Record wall-clock time. Off by default so reports are reproducible
    /// byte for byte.
    pub timing: bool,
}

impl Flags {
    fn tolerances(&self, base: Option<Tolerances>) -> Result<Tolerances> {
        let mut tol = base.unwrap_or_default();
        if let Some(t) = self.tol {
            tol.eps_verify = t;
        }
        tol.validate()?;
        Ok(tol)
    }
}

struct Loaded {
    file: InstanceFile,
    instance: Instance,
}

fn load(text: &str, flags: &Flags) -> Result<Loaded> {
    let mut file = parse_instance_file(text)?;
    file.tolerances = Some(flags.tolerances(file.tolerances)?);
    if let Some(seed) = flags.seed {
        file.seed = Some(seed);
    }
    let instance = file.resolve()?;
    Ok(Loaded { file, instance })
}

fn record_algebra(
    report: &mut ReportFile,
    name: &str,
    a: &MatrixStarAlgebra,
    tol: &Tolerances,
) -> Result<()> {
    if !report.algebras.contains_key(name) {
        report
            .algebras
            .insert(name.to_string(), AlgebraRecord::new(a, tol)?);
    }
    Ok(())
}

fn hierarchy(
    loaded: &Loaded,
    report: &mut ReportFile,
    pair: &[String; 2],
    samples: Option<usize>,
    seed: Option<u64>,
    operation_pairs: Option<usize>,
    flags: &Flags,
) -> Result<()> {
    let inst = &loaded.instance;
    let defaults = HierarchyConfig::default();
    let cfg = HierarchyConfig {
        seed: flags.seed.or(seed).unwrap_or(inst.seed),
        samples: flags.samples.or(samples).unwrap_or(defaults.samples),
        operation_pairs: operation_pairs.unwrap_or(defaults.operation_pairs),
        tol: inst.tol,
        ..defaults
    };
    let (a1, a2) = (&inst.algebras[&pair[0]], &inst.algebras[&pair[1]]);
    let r = run_hierarchy_checks(a1, a2, &cfg)?;
    record_algebra(report, &pair[0], a1, &inst.tol)?;
    record_algebra(report, &pair[1], a2, &inst.tol)?;
    report.results.push(CheckRecord::Hierarchy {
        pair: pair.clone(),
        report: Box::new(r),
    });
    Ok(())
}

fn extension(
    loaded: &Loaded,
    report: &mut ReportFile,
    names: &[String; 2],
    max_iter: Option<usize>,
) -> Result<()> {
    let inst = &loaded.instance;
    let (phi1, phi2) = (&inst.states[&names[0]], &inst.states[&names[1]]);
    let mut opts = ExtensionOptions::with_tolerances(inst.tol);
    if let Some(m) = max_iter {
        opts.max_iter = m;
    }
    let outcome = extend_state(phi1, phi2, &opts)?;
    let record = match &outcome {
        ExtensionOutcome::Feasible {
            density,
            residual,
            iterations,
        } => ExtensionRecord {
            status: outcome.status().to_string(),
            iterations: *iterations,
            residual: Some(*residual),
            gap: None,
            density: Some(density.into()),
            separation: None,
        },
        ExtensionOutcome::InfeasibleCertified {
            gap,
            witness,
            iterations,
        } => ExtensionRecord {
            status: outcome.status().to_string(),
            iterations: *iterations,
            residual: None,
            gap: Some(*gap),
            density: None,
            separation: Some(witness.into()),
        },
        ExtensionOutcome::Undecided {
            residual,
            iterations,
        } => ExtensionRecord {
            status: outcome.status().to_string(),
            iterations: *iterations,
            residual: Some(*residual),
            gap: None,
            density: None,
            separation: None,
        },
    };
    let algebras = [
        inst.state_algebras[&names[0]].clone(),
        inst.state_algebras[&names[1]].clone(),
    ];
    record_algebra(report, &algebras[0], phi1.algebra(), &inst.tol)?;
    record_algebra(report, &algebras[1], phi2.algebra(), &inst.tol)?;
    report.results.push(CheckRecord::ExtendState {
        states: names.clone(),
        algebras,
        state1: phi1.density().into(),
        state2: phi2.density().into(),
        outcome: record,
    });
    Ok(())
}

fn prepared_state<'a>(loaded: &'a Loaded, op: &str) -> Option<&'a AlgebraState> {
    match loaded.file.operations.get(op)? {
        OperationSpec::StatePrep { state } => loaded.instance.states.get(state),
        _ => None,
    }
}

fn joint(
    loaded: &Loaded,
    report: &mut ReportFile,
    names: &[String; 2],
    flags: &Flags,
) -> Result<()> {
    let inst = &loaded.instance;
    let tol = &inst.tol;
    let (t1, t2) = (&inst.operations[&names[0]], &inst.operations[&names[1]]);
    let algebras = [
        inst.operation_algebras[&names[0]].clone(),
        inst.operation_algebras[&names[1]].clone(),
    ];
    let (a1, a2) = (&inst.algebras[&algebras[0]], &inst.algebras[&algebras[1]]);
    let eta = ProductIsomorphism::build(a1, a2, tol)?;
    let j = joint_operation(t1, t2, &eta, tol)?;

    let transition = match (
        prepared_state(loaded, &names[0]),
        prepared_state(loaded, &names[1]),
    ) {
        (Some(phi1), Some(phi2)) => {
            let n = inst.ambient_dim;
            let tracial = AlgebraState::tracial(MatrixStarAlgebra::full(n));
            let sweep = flags
                .samples
                .unwrap_or(HierarchyConfig::default().transition_sweep);
            let check =
                verify_product_transition(&j.map, &tracial, phi1, phi2, sweep, inst.seed, tol)?;
            let out = dual_on_states(&j.map, &tracial, tol)?;
            let mut table = Vec::new();
            for (i, a) in phi1.algebra().basis().iter().enumerate() {
                for (k, c) in phi2.algebra().basis().iter().enumerate() {
                    let lhs = out.value(&(a * c));
                    let rhs = phi1.value(a) * phi2.value(c);
                    table.push(TransitionRow {
                        i,
                        j: k,
                        output: [lhs.re, lhs.im],
                        product: [rhs.re, rhs.im],
                    });
                }
            }
            Some(TransitionRecord {
                inputs: check.states_checked,
                max_residual: check.max_residual,
                table,
            })
        }
        _ => None,
    };

    record_algebra(report, &algebras[0], a1, tol)?;
    record_algebra(report, &algebras[1], a2, tol)?;
    report.results.push(CheckRecord::JointOperation {
        operations: names.clone(),
        algebras,
        first_choi: t1.extended_choi().into(),
        second_choi: t2.extended_choi().into(),
        choi: j.map.extended_choi().into(),
        residuals: j.residuals,
        faithful: j.is_faithful(tol),
        faithfulness_margin: j.faithfulness_margin,
        transition,
    });
    Ok(())
}

fn finish(mut report: ReportFile, start: Instant, flags: &Flags) -> ReportFile {
    if flags.timing {
        report.wall_clock_ms = Some(start.elapsed().as_secs_f64() * 1e3);
    }
    report
}

/// Runs the checks listed in the instance. Without any, runs the hierarchy
/// on every pair of algebras in name order.
pub fn cmd_analyze(text: &str, flags: &Flags) -> Result<ReportFile> {
    let start = Instant::now();
    let loaded = load(text, flags)?;
    let inst = &loaded.instance;
    let mut report = ReportFile::new(inst.ambient_dim, inst.tol, inst.seed);
    let mut checks = inst.checks.clone();
    if checks.is_empty() {
        let names: Vec<&String> = inst.algebras.keys().collect();
        for (i, a) in names.iter().enumerate() {
            for b in &names[i + 1..] {
                checks.push(CheckSpec::Hierarchy {
                    pair: [(*a).clone(), (*b).clone()],
                    samples: None,
                    seed: None,
                    operation_pairs: None,
                });
            }
        }
    }
    for check in &checks {
        match check {
            CheckSpec::Hierarchy {
                pair,
                samples,
                seed,
                operation_pairs,
            } => hierarchy(
                &loaded,
                &mut report,
                pair,
                *samples,
                *seed,
                *operation_pairs,
                flags,
            )?,
            CheckSpec::ExtendState { states, max_iter } => {
                extension(&loaded, &mut report, states, *max_iter)?
            }
            CheckSpec::JointOperation { operations } => {
                joint(&loaded, &mut report, operations, flags)?
            }
        }
    }
    Ok(finish(report, start, flags))
}

/// Builds the joint extension of two named operations.
pub fn cmd_extend(text: &str, op1: &str, op2: &str, flags: &Flags) -> Result<ReportFile> {
    let start = Instant::now();
    let loaded = load(text, flags)?;
    for (k, name) in [op1, op2].iter().enumerate() {
        if !loaded.instance.operations.contains_key(*name) {
            return Err(Error::Validation {
                path: format!("operation argument {}", k + 1),
                message: format!("unknown operation `{name}`"),
            });
        }
    }
    let inst = &loaded.instance;
    let mut report = ReportFile::new(inst.ambient_dim, inst.tol, inst.seed);
    joint(
        &loaded,
        &mut report,
        &[op1.to_string(), op2.to_string()],
        flags,
    )?;
    Ok(finish(report, start, flags))
}

/// Runs the hierarchy on `count` generated instances of a family.
pub fn cmd_fuzz(family: &str, count: usize, seed: u64, flags: &Flags) -> Result<ReportFile> {
    let start = Instant::now();
    let family: Family = family.parse()?;
    let tol = flags.tolerances(None)?;
    let cfg = HierarchyConfig {
        seed,
        samples: flags.samples.unwrap_or(HierarchyConfig::default().samples),
        tol,
        ..HierarchyConfig::default()
    };
    let mut summary = FuzzSummary::new(family, seed, cfg.samples);
    let mut ambient = 0;
    for index in 0..count {
        let inst = generate(family, seed, index);
        ambient = ambient.max(inst.a1.ambient_dim());
        let r = run_hierarchy_checks(
            &inst.a1,
            &inst.a2,
            &HierarchyConfig {
                seed: inst_seed(seed, index),
                ..cfg
            },
        )?;
        summary.push(index, &r);
    }
    let mut report = ReportFile::new(ambient.max(1), tol, seed);
    report.results.push(CheckRecord::Fuzz(summary));
    Ok(finish(report, start, flags))
}

fn inst_seed(seed: u64, index: usize) -> u64 {
    opindep::families::instance_seed(seed, index)
}

/// Parses a report and re-validates its certificates.
pub fn cmd_verify(text: &str) -> Result<Vec<VerificationLine>> {
    verify_report(&parse_report(text)?)
}

fn verdict_word(v: Verdict) -> &'static str {
    match v {
        Verdict::Holds => "holds",
        Verdict::Fails => "fails",
        Verdict::Undecided => "undecided",
    }
}

/// Human-readable summary of a report.
pub fn render(report: &ReportFile) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "opindep {} | ambient dim {} | seed {} | eps_verify {:e}",
        report.toolkit_version, report.ambient_dim, report.seed, report.tolerances.eps_verify
    );
    for result in &report.results {
        match result {
            CheckRecord::Hierarchy { pair, report: r } => {
                let _ = writeln!(
                    s,
                    "\nhierarchy {} / {}: dims {} and {}, join {}, {}",
                    pair[0],
                    pair[1],
                    r.dim1,
                    r.dim2,
                    r.join_dim,
                    if r.commuting {
                        "commuting".to_string()
                    } else {
                        format!("commutator {:.3e}", r.max_commutator)
                    }
                );
                for notion in Notion::ALL {
                    let f = r.finding(notion);
                    let _ = writeln!(
                        s,
                        "  {:<20} {:<10} {}",
                        notion.name(),
                        verdict_word(f.verdict),
                        f.reason
                    );
                }
                if !r.violations.is_empty() {
                    let _ = writeln!(s, "  IMPLICATION VIOLATIONS: {}", r.violations.join("; "));
                }
            }
            CheckRecord::ExtendState {
                states, outcome, ..
            } => {
                let _ = write!(
                    s,
                    "\nextend {} + {}: {} after {} iterations",
                    states[0], states[1], outcome.status, outcome.iterations
                );
                if let Some(g) = outcome.gap {
                    let _ = write!(s, ", separation gap {g:.3e}");
                }
                if let Some(r) = outcome.residual {
                    let _ = write!(s, ", residual {r:.3e}");
                }
                s.push('\n');
            }
            CheckRecord::JointOperation {
                operations,
                residuals,
                faithful,
                transition,
                ..
            } => {
                let _ = writeln!(
                    s,
                    "\njoint operation {} + {}: restriction {:.3e} / {:.3e}, product {:.3e}, unital {:.3e}, faithful {}",
                    operations[0],
                    operations[1],
                    residuals.restriction1,
                    residuals.restriction2,
                    residuals.product,
                    residuals.unital,
                    faithful
                );
                if let Some(t) = transition {
                    let _ = writeln!(
                        s,
                        "  product transition over {} input states: max residual {:.3e} ({} table rows)",
                        t.inputs,
                        t.max_residual,
                        t.table.len()
                    );
                }
            }
            CheckRecord::Fuzz(f) => {
                let _ = writeln!(
                    s,
                    "\nfuzz {} x{} (seed {}, {} samples): {} implication violations",
                    f.family, f.count, f.seed, f.samples, f.violations
                );
                for (notion, c) in &f.totals {
                    let _ = writeln!(
                        s,
                        "  {:<20} holds {:>4}  fails {:>4}  undecided {:>4}",
                        notion.name(),
                        c.holds,
                        c.fails,
                        c.undecided
                    );
                }
            }
        }
    }
    if let Some(ms) = report.wall_clock_ms {
        let _ = writeln!(s, "\nwall clock {ms:.1} ms");
    }
    s
}

pub fn render_verification(lines: &[VerificationLine]) -> String {
    let mut s = String::new();
    for l in lines {
        let tag = match l.valid {
            Some(true) => "ok",
            Some(false) => "REJECTED",
            None => "no certificate",
        };
        let _ = writeln!(s, "{:<14} {} {}", tag, l.location, l.detail);
    }
    s
}

/// Verdict counts per notion across the hierarchy results of a report.
pub fn verdict_table(report: &ReportFile) -> BTreeMap<Notion, Vec<Verdict>> {
    let mut out: BTreeMap<Notion, Vec<Verdict>> = BTreeMap::new();
    for result in &report.results {
        if let CheckRecord::Hierarchy { report: r, .. } = result {
            for (n, v) in r.verdicts() {
                out.entry(n).or_default().push(v);
            }
        }
    }
    out
}
