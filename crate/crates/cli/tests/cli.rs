use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const TABLE2: &str = include_str!("../../core/tests/fixtures/table2.csv");
const TABLE4: &str = include_str!("../../core/tests/fixtures/table4.csv");
const TABLE5: &str = include_str!("../../core/tests/fixtures/table5.csv");

/// Small model and grid so the debug binary stays quick.
const FAST_CONFIG: &str = r#"
[embedding]
dims = 40
epochs = 20

[clustering]
min_cluster_size = 8
sweep_methods = ["agglo_average", "agglo_ward", "kmeans_cosine"]
sweep_k = { min = 2, max = 5 }

[profiles]
k_range = { min = 1, max = 3 }
"#;

fn hos(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hos"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn diagnostics(out: &Output) -> Vec<Value> {
    String::from_utf8_lossy(&out.stderr)
        .lines()
        .map(|l| serde_json::from_str(l).unwrap_or_else(|_| panic!("stderr line is not JSON: {l}")))
        .collect()
}

fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn labels_table2_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "in.csv", TABLE2);
    let out = hos(&["label", path(&input)]);
    assert_ok(&out);
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert!(!rows.is_empty());
    assert!(rows.iter().all(|r| r.ends_with(",yes")));
    assert!(text.lines().next().unwrap().ends_with("Token,Legal"));
}

#[test]
fn empty_input_labels_to_header_only() {
    let out = hos(&["label", "/dev/null"]);
    assert_ok(&out);
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 1);
}

#[test]
fn gap_is_a_validation_error_with_row() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(
        dir.path(),
        "gap.csv",
        "Driver,Start,End,Duration,Activity\n\
         d1,2017-01-02T06:00,2017-01-02T07:00,60,Driving\n\
         d1,2017-01-02T07:30,2017-01-02T08:00,30,Break\n",
    );
    let out = hos(&["label", path(&input)]);
    assert_eq!(out.status.code(), Some(2));
    let d = diagnostics(&out);
    assert_eq!(d.len(), 1);
    assert_eq!(d[0]["level"], "error");
    assert!(d[0]["row"].is_u64(), "{:?}", d[0]);

    let filled = hos(&["--fill-gaps", "label", path(&input)]);
    assert_ok(&filled);
    assert!(String::from_utf8(filled.stdout).unwrap().contains("Idle"));
}

#[test]
fn label_output_pipes_into_infractions() {
    let dir = tempfile::tempdir().unwrap();
    let raw = write(dir.path(), "t4.csv", TABLE4);
    let labelled = dir.path().join("t4.labelled.csv");
    assert_ok(&hos(&["label", path(&raw), "-o", path(&labelled)]));
    let annotated = dir.path().join("t4.annotated.csv");
    let out = hos(&[
        "infractions",
        path(&labelled),
        "--annotated",
        path(&annotated),
    ]);
    assert_ok(&out);
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    let findings = report[0]["findings"].as_array().unwrap();
    assert!(
        findings.iter().any(|f| f["explanation"]
            .as_str()
            .unwrap()
            .starts_with("Surpassed NDD driving time")),
        "{findings:?}"
    );
    let annotated = std::fs::read_to_string(annotated).unwrap();
    assert!(annotated.lines().next().unwrap().ends_with(",Infraction"));
}

#[test]
fn epsilon_flag_controls_relaxation() {
    let dir = tempfile::tempdir().unwrap();
    let raw = write(dir.path(), "t5.csv", TABLE5);
    let labelled = dir.path().join("t5.labelled.csv");
    assert_ok(&hos(&["label", path(&raw), "-o", path(&labelled)]));
    let relaxed = |eps: &str| -> Vec<Value> {
        let out = hos(&["--epsilon", eps, "infractions", path(&labelled)]);
        assert_ok(&out);
        let report: Value = serde_json::from_slice(&out.stdout).unwrap();
        report[0]["findings"]
            .as_array()
            .unwrap()
            .iter()
            .filter(|f| f["source"] == "relaxation")
            .cloned()
            .collect()
    };
    let two = relaxed("2");
    assert_eq!(two.len(), 1);
    assert_eq!(two[0]["epsilon"], 2);
    assert!(relaxed("1").is_empty());
}

#[test]
fn randomized_stages_need_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let out = hos(&[
        "generate",
        "-o",
        path(dir.path()),
        "--drivers",
        "2",
        "--weeks",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("corpus.csv").exists());

    let out = hos(&[
        "--nondeterministic",
        "generate",
        "-o",
        path(dir.path()),
        "--drivers",
        "2",
        "--weeks",
        "1",
    ]);
    assert_ok(&out);
    assert_eq!(diagnostics(&out)[0]["level"], "info");
    assert!(dir.path().join("corpus.csv").exists());
}

#[test]
fn bad_arguments_and_config_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = hos(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(diagnostics(&out)[0]["code"], 2);

    let cfg = write(
        dir.path(),
        "bad.toml",
        "[regulation]\nndd_driving_max = 700\n",
    );
    let out = hos(&["--config", path(&cfg), "label", "/dev/null"]);
    assert_eq!(out.status.code(), Some(2));

    let out = hos(&[
        "--seed",
        "1",
        "generate",
        "-o",
        path(dir.path()),
        "--inject",
        "nonsense",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_input_file_exits_2() {
    let out = hos(&["label", "/nonexistent/log.csv"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn one_day_corpus_cannot_be_clustered() {
    let dir = tempfile::tempdir().unwrap();
    let day = "Driver,Start,End,Duration,Activity\n\
               d1,2017-01-02T06:00,2017-01-02T10:00,240,Driving\n\
               d1,2017-01-02T10:00,2017-01-02T10:45,45,Break\n\
               d1,2017-01-02T10:45,2017-01-02T13:00,135,Driving\n\
               d1,2017-01-02T13:00,2017-01-03T00:00,660,Break\n";
    let raw = write(dir.path(), "day.csv", day);
    let labelled = dir.path().join("day.labelled.csv");
    assert_ok(&hos(&["label", path(&raw), "-o", path(&labelled)]));
    let out = hos(&["--seed", "1", "clusterize", path(&labelled)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(diagnostics(&out)[0]["message"]
        .as_str()
        .unwrap()
        .contains("need >= 2 documents"));
}

/// generate -> label -> clusterize (+ sweep) -> profile, returning every artifact.
fn full_run(dir: &Path, drivers: &str, extra: &[&str]) -> Vec<(String, Vec<u8>)> {
    let cfg = write(dir, "fast.toml", FAST_CONFIG);
    let run = |args: &[&str]| {
        let mut all = vec!["--config", path(&cfg), "--seed", "11"];
        all.extend_from_slice(extra);
        all.extend_from_slice(args);
        let out = hos(&all);
        assert_ok(&out);
        out
    };
    let p = |name: &str| dir.join(name);
    run(&[
        "generate",
        "-o",
        path(dir),
        "--drivers",
        drivers,
        "--weeks",
        "1",
        "--inject",
        "edd_driving",
        "--inject-every",
        "10",
    ]);
    run(&[
        "label",
        path(&p("corpus.csv")),
        "-o",
        path(&p("labelled.csv")),
    ]);
    run(&[
        "infractions",
        path(&p("labelled.csv")),
        "-o",
        path(&p("report.json")),
    ]);
    run(&[
        "clusterize",
        path(&p("labelled.csv")),
        "-o",
        path(&p("clusters.json")),
        "--sweep",
        path(&p("sweep.csv")),
    ]);
    run(&[
        "profile",
        path(&p("clusters.json")),
        "-o",
        path(&p("profiles.json")),
        "--table",
        path(&p("table.csv")),
    ]);
    [
        "corpus.csv",
        "truth.json",
        "labelled.csv",
        "report.json",
        "clusters.json",
        "sweep.csv",
        "profiles.json",
        "table.csv",
    ]
    .iter()
    .map(|n| (n.to_string(), std::fs::read(p(n)).unwrap()))
    .collect()
}

#[test]
fn full_pipeline_is_byte_identical_across_runs() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let first = full_run(a.path(), "30", &[]);
    let second = full_run(b.path(), "30", &["--sequential"]);
    for ((name, x), (_, y)) in first.iter().zip(&second) {
        assert!(x == y, "{name} differs between runs");
    }

    let sweep = String::from_utf8(first[5].1.clone()).unwrap();
    let legal_rows = sweep.lines().filter(|l| l.starts_with("legal,")).count();
    assert_eq!(legal_rows, 3 * 4, "one row per (method, k)");

    let profiles: Value = serde_json::from_slice(&first[6].1).unwrap();
    let k = profiles["k"].as_u64().unwrap() as usize;
    assert_eq!(profiles["report"]["profiles"].as_array().unwrap().len(), k);
    for row in profiles["table"]["values"].as_array().unwrap() {
        let s: f64 = row
            .as_array()
            .unwrap()
            .iter()
            .map(|v| v.as_f64().unwrap())
            .sum();
        assert!((s - 1.0).abs() < 1e-9);
    }
}

#[test]
fn single_driver_profile_forces_one_profile() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "fast.toml", FAST_CONFIG);
    let base = ["--config", path(&cfg), "--seed", "4"];
    let run = |args: &[&str]| hos(&[&base[..], args].concat());
    assert_ok(&run(&[
        "generate",
        "-o",
        path(dir.path()),
        "--drivers",
        "1",
        "--weeks",
        "2",
    ]));
    let labelled = dir.path().join("labelled.csv");
    assert_ok(&run(&[
        "label",
        path(&dir.path().join("corpus.csv")),
        "-o",
        path(&labelled),
    ]));
    let clusters = dir.path().join("clusters.json");
    assert_ok(&run(&[
        "clusterize",
        path(&labelled),
        "-o",
        path(&clusters),
    ]));
    let out = run(&["profile", path(&clusters)]);
    assert_ok(&out);
    let profiles: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(profiles["k"], 1);
    let d = diagnostics(&out);
    assert!(
        d.iter()
            .any(|x| x["level"] == "warning"
                && x["message"].as_str().unwrap().contains("forced to 1")),
        "{d:?}"
    );
}

#[test]
fn joint_flag_yields_one_split() {
    let dir = tempfile::tempdir().unwrap();
    let artifacts = full_run(dir.path(), "20", &["--joint", "--include-infractions"]);
    let clusters: Value = serde_json::from_slice(&artifacts[4].1).unwrap();
    let splits = clusters["splits"].as_array().unwrap();
    assert_eq!(splits.len(), 1);
    assert_eq!(splits[0]["split"], "joint");
    assert_eq!(splits[0]["documents"].as_array().unwrap().len(), 100);
}
