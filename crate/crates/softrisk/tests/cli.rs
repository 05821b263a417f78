//! End-to-end CLI tests: stage flows over a shared artifact directory,
//! byte-identity across runs and resumes, and exit-code contracts.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const ARTIFACTS: [&str; 7] = [
    "config.json",
    "fuzzy_table.json",
    "soft_sets.json",
    "soft_sets_reduced.json",
    "rules.json",
    "risk_model.json",
    "report.txt",
];

fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

fn softrisk(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_softrisk"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_reference(out: &Path) -> Output {
    let corpus = corpus_dir();
    softrisk(&[
        "run",
        "--data",
        corpus.join("dengue30.csv").to_str().unwrap(),
        "--config",
        corpus.join("dengue_config.json").to_str().unwrap(),
        "--labels",
        corpus.join("labels_synthetic.csv").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ])
}

fn assert_same_files(a: &Path, b: &Path, files: &[&str]) {
    for file in files {
        let left = std::fs::read(a.join(file)).unwrap_or_else(|_| panic!("{file} in {a:?}"));
        let right = std::fs::read(b.join(file)).unwrap_or_else(|_| panic!("{file} in {b:?}"));
        assert_eq!(left, right, "artifact {file} differs");
    }
}

#[test]
fn run_twice_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let out1 = dir.path().join("one");
    let out2 = dir.path().join("two");
    let status1 = run_reference(&out1);
    assert!(status1.status.success(), "{:?}", status1);
    let status2 = run_reference(&out2);
    assert!(status2.status.success());
    assert_same_files(&out1, &out2, &ARTIFACTS);
    assert_eq!(status1.stdout, status2.stdout);
}

#[test]
fn stage_by_stage_resume_matches_full_run() {
    let dir = tempfile::tempdir().unwrap();
    let full = dir.path().join("full");
    let staged = dir.path().join("staged");
    assert!(run_reference(&full).status.success());

    let corpus = corpus_dir();
    let staged_s = staged.to_str().unwrap();
    let data = corpus.join("dengue30.csv");
    let config = corpus.join("dengue_config.json");
    let labels = corpus.join("labels_synthetic.csv");
    let steps: Vec<Vec<&str>> = vec![
        vec![
            "fuzzify",
            "--data",
            data.to_str().unwrap(),
            "--config",
            config.to_str().unwrap(),
        ],
        vec!["softsets"],
        vec!["reduce"],
        vec!["rules"],
        vec!["score", "--labels", labels.to_str().unwrap()],
        vec!["report"],
    ];
    for step in steps {
        let mut args = step.clone();
        args.push("--out");
        args.push(staged_s);
        let output = softrisk(&args);
        assert!(
            output.status.success(),
            "step {:?} failed: {}",
            step[0],
            String::from_utf8_lossy(&output.stderr)
        );
    }
    assert_same_files(&full, &staged, &ARTIFACTS);
}

#[test]
fn report_regenerates_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    assert!(run_reference(&out).status.success());
    let original = std::fs::read(out.join("report.txt")).unwrap();
    std::fs::remove_file(out.join("report.txt")).unwrap();
    let output = softrisk(&["report", "--out", out.to_str().unwrap()]);
    assert!(output.status.success());
    let regenerated = std::fs::read(out.join("report.txt")).unwrap();
    assert_eq!(original, regenerated);
}

#[test]
fn report_with_fixture_regenerates_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let corpus = corpus_dir();
    let fixture = corpus.join("published_memberships.json");
    let output = softrisk(&[
        "run",
        "--data",
        corpus.join("dengue30.csv").to_str().unwrap(),
        "--config",
        corpus.join("dengue_config.json").to_str().unwrap(),
        "--labels",
        corpus.join("labels_synthetic.csv").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--fixture",
        fixture.to_str().unwrap(),
    ]);
    assert!(output.status.success());
    let original = std::fs::read_to_string(out.join("report.txt")).unwrap();
    assert!(original.contains("divergent: 9"));
    let output = softrisk(&[
        "report",
        "--out",
        out.to_str().unwrap(),
        "--fixture",
        fixture.to_str().unwrap(),
    ]);
    assert!(output.status.success());
    let regenerated = std::fs::read_to_string(out.join("report.txt")).unwrap();
    assert_eq!(original, regenerated);
}

#[test]
fn run_without_labels_skips_scoring_with_notice() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let corpus = corpus_dir();
    let output = softrisk(&[
        "run",
        "--data",
        corpus.join("dengue30.csv").to_str().unwrap(),
        "--config",
        corpus.join("dengue_config.json").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("scoring stage will be skipped"), "{stderr}");
    assert!(!out.join("risk_model.json").exists());
    let report = std::fs::read_to_string(out.join("report.txt")).unwrap();
    assert!(report.contains("scoring skipped"));
}

#[test]
fn malformed_value_exits_one_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("bad.csv");
    std::fs::write(
        &data,
        "id,age,tlc,sgot,platelets,bp\nv_1,6,abc,46,50000,125\n",
    )
    .unwrap();
    let corpus = corpus_dir();
    let output = softrisk(&[
        "run",
        "--data",
        data.to_str().unwrap(),
        "--config",
        corpus.join("dengue_config.json").to_str().unwrap(),
        "--out",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("line 2"), "{stderr}");
    assert!(stderr.contains("tlc"), "{stderr}");
}

#[test]
fn missing_label_exits_one_naming_patient() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    assert!(run_reference(&out).status.success());
    // labels file that omits v_30
    let labels = dir.path().join("labels.csv");
    let mut content = String::from("id,label\n");
    for i in 1..30 {
        content.push_str(&format!("v_{i},0\n"));
    }
    std::fs::write(&labels, content).unwrap();
    let output = softrisk(&[
        "score",
        "--labels",
        labels.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("v_30"), "{stderr}");
}

#[test]
fn diagnose_inline_record_reports_best_risk() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    assert!(run_reference(&out).status.success());
    // v_1's raw values: best matching rule risk is 66.7
    let output = softrisk(&[
        "diagnose",
        "--out",
        out.to_str().unwrap(),
        "--set",
        "age=6",
        "--set",
        "tlc=3600",
        "--set",
        "sgot=46",
        "--set",
        "platelets=50000",
        "--set",
        "bp=125",
    ]);
    assert!(output.status.success());
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("query  risk=66.7"), "{stdout}");
}

#[test]
fn diagnose_out_of_range_record_reports_no_match() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    assert!(run_reference(&out).status.success());
    let output = softrisk(&[
        "diagnose",
        "--out",
        out.to_str().unwrap(),
        "--set",
        "age=100",
        "--set",
        "tlc=20000",
        "--set",
        "sgot=5",
        "--set",
        "platelets=500000",
        "--set",
        "bp=200",
    ]);
    assert!(output.status.success());
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("query  no-match"), "{stdout}");
}

#[test]
fn diagnose_batch_file_reports_every_record() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    assert!(run_reference(&out).status.success());
    let data = dir.path().join("queries.csv");
    std::fs::write(
        &data,
        "id,age,tlc,sgot,platelets,bp\nq_1,6,3600,46,50000,125\nq_2,100,20000,5,500000,200\n",
    )
    .unwrap();
    let output = softrisk(&[
        "diagnose",
        "--out",
        out.to_str().unwrap(),
        "--data",
        data.to_str().unwrap(),
    ]);
    assert!(output.status.success());
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("q_1  risk=66.7"), "{stdout}");
    assert!(stdout.contains("q_2  no-match"), "{stdout}");
}

#[test]
fn merge_duplicate_levels_collapses_constant_runs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let corpus = corpus_dir();
    let output = softrisk(&[
        "run",
        "--data",
        corpus.join("dengue30.csv").to_str().unwrap(),
        "--config",
        corpus.join("dengue_config.json").to_str().unwrap(),
        "--labels",
        corpus.join("labels_synthetic.csv").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--merge-duplicate-levels",
    ]);
    assert!(output.status.success());
    let reduced = std::fs::read_to_string(out.join("soft_sets_reduced.json")).unwrap();
    let doc: serde_json::Value = serde_json::from_str(&reduced).unwrap();
    let tlc_high = doc["sets"]
        .as_array()
        .unwrap()
        .iter()
        .find(|s| s["variable"] == "tlc" && s["term"] == "high")
        .unwrap();
    // all four nonempty tlc/high cuts hold the same single patient
    assert_eq!(tlc_high["levels"].as_array().unwrap().len(), 1);
}

#[test]
fn stage_without_prerequisites_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let output = softrisk(&[
        "softsets",
        "--out",
        dir.path().join("none").to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(1));
}

#[test]
fn help_exits_zero_and_unknown_flag_exits_one() {
    let help = softrisk(&["--help"]);
    assert_eq!(help.status.code(), Some(0));
    let unknown = softrisk(&["run", "--no-such-flag"]);
    assert_eq!(unknown.status.code(), Some(1));
}
