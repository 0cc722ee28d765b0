use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use opindep::independence::{Notion, Verdict};
use opindep::io::{parse_report, verify_report, CheckRecord};
use opindep_cli::{
    cmd_analyze, cmd_extend, cmd_fuzz, exit_code, verdict_table, Flags, EXIT_INPUT, EXIT_NUMERICAL,
};

fn instance_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("instances")
        .join(format!("{name}.json"))
}

fn instance(name: &str) -> String {
    std::fs::read_to_string(instance_path(name)).unwrap()
}

fn opindep(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_opindep"))
        .args(args)
        .output()
        .unwrap()
}

/// Compares against `tests/golden/<name>`; `OPINDEP_BLESS=1` rewrites it.
fn golden(name: &str, actual: &str) {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(name);
    if std::env::var_os("OPINDEP_BLESS").is_some() {
        std::fs::write(&path, actual).unwrap();
        return;
    }
    let expected = std::fs::read_to_string(&path)
        .unwrap_or_else(|_| panic!("missing golden file {}", path.display()));
    assert!(expected == actual, "{} differs from the golden file", name);
}

fn all_verdicts(report: &opindep::io::ReportFile) -> Vec<Verdict> {
    verdict_table(report).into_values().flatten().collect()
}

#[test]
fn tensor_pair_holds_everywhere() {
    let report = cmd_analyze(&instance("tensor_pair"), &Flags::default()).unwrap();
    let v = all_verdicts(&report);
    assert!(
        !v.is_empty() && v.iter().all(|&v| v == Verdict::Holds),
        "{v:?}"
    );
    let joint = report.results.iter().find_map(|r| match r {
        CheckRecord::JointOperation { residuals, .. } => Some(*residuals),
        _ => None,
    });
    assert!(joint.unwrap().max() <= 1e-12);
}

#[test]
fn same_algebra_fails_with_witness_states() {
    let report = cmd_analyze(&instance("same_algebra"), &Flags::default()).unwrap();
    let table = verdict_table(&report);
    for notion in [
        Notion::CstarIndependent,
        Notion::WstarIndependent,
        Notion::CstarProductSense,
        Notion::WstarProductSense,
    ] {
        assert_eq!(table[&notion], vec![Verdict::Fails]);
    }
    let json = report.to_json();
    assert!(json.contains("\"state1\"") && json.contains("\"state2\""));
    assert!(json.contains("infeasible_certified"));
}

#[test]
fn bundled_reports_match_golden_files() {
    for name in ["tensor_pair", "same_algebra", "split_pair", "m6_operations"] {
        let out = opindep(&["analyze", instance_path(name).to_str().unwrap(), "--json"]);
        assert_eq!(
            out.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        golden(
            &format!("{name}.analyze.json"),
            &String::from_utf8(out.stdout).unwrap(),
        );
    }
    let out = opindep(&[
        "fuzz",
        "tensor_split",
        "--count",
        "5",
        "--seed",
        "7",
        "--samples",
        "12",
        "--json",
    ]);
    assert_eq!(out.status.code(), Some(0));
    golden(
        "fuzz_tensor_split.json",
        &String::from_utf8(out.stdout).unwrap(),
    );
}

#[test]
fn split_pair_is_reproducible() {
    let path = instance_path("split_pair");
    let a = opindep(&["analyze", path.to_str().unwrap(), "--seed", "42", "--json"]);
    let b = opindep(&["analyze", path.to_str().unwrap(), "--seed", "42", "--json"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let report = parse_report(std::str::from_utf8(&a.stdout).unwrap()).unwrap();
    assert_eq!(verdict_table(&report)[&Notion::Split], vec![Verdict::Holds]);
}

#[test]
fn extend_examples() {
    let text = instance("m6_operations");
    let report = cmd_extend(&text, "measure", "rotate", &Flags::default()).unwrap();
    let CheckRecord::JointOperation {
        residuals,
        transition,
        ..
    } = &report.results[0]
    else {
        panic!()
    };
    assert!(residuals.max() <= 1e-8);
    assert!(transition.is_none());
    let report = cmd_extend(&text, "prep1", "prep2", &Flags::default()).unwrap();
    let CheckRecord::JointOperation { transition, .. } = &report.results[0] else {
        panic!()
    };
    let t = transition
        .as_ref()
        .expect("state-prep pairs carry a transition table");
    assert!(t.max_residual <= 1e-8 && !t.table.is_empty());
    assert!(verify_report(&report)
        .unwrap()
        .iter()
        .all(|l| l.valid != Some(false)));

    let ids = cmd_extend(&instance("tensor_pair"), "id1", "id2", &Flags::default()).unwrap();
    let CheckRecord::JointOperation { residuals, .. } = &ids.results[0] else {
        panic!()
    };
    assert!(residuals.max() <= 1e-12);
}

#[test]
fn extend_on_same_algebra_reports_missing_isomorphism() {
    let text = instance("same_algebra").replace(
        "\"checks\"",
        "\"operations\": {\"i1\": {\"kind\": \"identity\", \"algebra\": \"A1\"}, \"i2\": {\"kind\": \"identity\", \"algebra\": \"A2\"}},\n  \"checks\"",
    );
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("same.json");
    std::fs::write(&path, text).unwrap();
    let out = opindep(&["extend", path.to_str().unwrap(), "i1", "i2"]);
    assert_eq!(out.status.code(), Some(EXIT_INPUT));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no product isomorphism"));
}

#[test]
fn fuzz_examples() {
    let report = cmd_fuzz("tensor_split", 50, 7, &Flags::default()).unwrap();
    let CheckRecord::Fuzz(s) = &report.results[0] else {
        panic!()
    };
    assert_eq!(s.instances.len(), 50);
    assert_eq!(s.violations, 0);
    for counts in s.totals.values() {
        assert_eq!(counts.holds, 50);
    }
    let report = cmd_fuzz("shared_block", 50, 7, &Flags::default()).unwrap();
    let CheckRecord::Fuzz(s) = &report.results[0] else {
        panic!()
    };
    assert_eq!(s.totals[&Notion::CstarIndependent].fails, 50);
    assert_eq!(s.totals[&Notion::WstarIndependent].fails, 50);
    assert_eq!(s.violations, 0);
}

#[test]
fn fuzz_is_deterministic() {
    for family in ["haar_overlap", "factor_split"] {
        let args = ["fuzz", family, "--count", "6", "--seed", "3", "--json"];
        assert_eq!(opindep(&args).stdout, opindep(&args).stdout);
    }
}

#[test]
fn exit_codes() {
    assert_eq!(
        opindep(&["fuzz", "nonsense"]).status.code(),
        Some(EXIT_INPUT)
    );
    assert_eq!(
        opindep(&["analyze", "/nonexistent/file.json"])
            .status
            .code(),
        Some(EXIT_INPUT)
    );
    assert_eq!(opindep(&["frobnicate"]).status.code(), Some(EXIT_INPUT));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(
        &bad,
        "{\"ambient_dim\": 2, \"algebras\": {\"A\": {\"generators\": [[[[1,0]]]]}}}",
    )
    .unwrap();
    let out = opindep(&["analyze", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(EXIT_INPUT));
    assert!(String::from_utf8_lossy(&out.stderr).contains("algebras.A.generators[0]"));

    assert_eq!(
        exit_code(&opindep::Error::IllConditioned("gap".into())),
        EXIT_NUMERICAL
    );
    assert_eq!(
        exit_code(&opindep::Error::NoProductIsomorphism {
            join: 2,
            product: 4
        }),
        EXIT_INPUT
    );
}

#[test]
fn verify_report_accepts_and_rejects() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("report.json");
    let out = opindep(&[
        "analyze",
        instance_path("tensor_pair").to_str().unwrap(),
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("holds"));
    let ok = opindep(&["verify-report", out_path.to_str().unwrap()]);
    assert_eq!(
        ok.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&ok.stdout)
    );

    let mut value: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    let choi = value["results"]
        .as_array_mut()
        .unwrap()
        .iter_mut()
        .find(|r| r["kind"] == "joint_operation")
        .unwrap();
    choi["choi"][0][0][0] = serde_json::json!(5.0);
    let tampered = dir.path().join("tampered.json");
    std::fs::write(&tampered, value.to_string()).unwrap();
    assert_eq!(
        opindep(&["verify-report", tampered.to_str().unwrap()])
            .status
            .code(),
        Some(1)
    );

    std::fs::write(&tampered, "{\"format\": \"opindep-report\"}").unwrap();
    assert_eq!(
        opindep(&["verify-report", tampered.to_str().unwrap()])
            .status
            .code(),
        Some(EXIT_INPUT)
    );
}

#[test]
fn timing_is_opt_in() {
    let text = instance("tensor_pair");
    assert!(cmd_analyze(&text, &Flags::default())
        .unwrap()
        .wall_clock_ms
        .is_none());
    let timed = cmd_analyze(
        &text,
        &Flags {
            timing: true,
            ..Flags::default()
        },
    )
    .unwrap();
    assert!(timed.wall_clock_ms.is_some());
}
