//! End-to-end runs of the `acd` binary on the shipped fixture.

mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};
use std::sync::Arc;

use acd::ToyBackend;
use serde_json::Value;

fn acd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_acd")).args(args).env_remove("ACD_REMOTE_URL").output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = acd(args);
    assert!(out.status.success(), "acd {args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn fixture_args(method: &str, out: &Path) -> Vec<String> {
    let dir = common::fixture_dir();
    let p = |f: &str| dir.join(f).display().to_string();
    vec![
        "--method".into(),
        method.into(),
        "--data".into(),
        p("dataset.jsonl"),
        "--fewshots".into(),
        p("fewshots.jsonl"),
        "--toy-config".into(),
        p("toy_world.json"),
        "--adversarial-context".into(),
        p("adversarial.txt"),
        "--out".into(),
        out.display().to_string(),
    ]
}

fn run(method: &str, out: &Path, extra: &[&str]) -> Value {
    let mut args = vec!["run".to_string()];
    args.extend(fixture_args(method, out));
    args.extend(extra.iter().map(|s| s.to_string()));
    ok(&args.iter().map(String::as_str).collect::<Vec<_>>());
    serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap()
}

#[test]
fn acd_run_fills_every_em_field() {
    let dir = tempfile::tempdir().unwrap();
    let summary = run("acd", dir.path(), &[]);
    for field in ["em_all", "em_gold_subset", "em_noisy_subset", "em_known_noisy", "em_unknown_gold"] {
        assert!(summary[field].is_f64(), "{field}: {}", summary[field]);
    }
    assert!(summary["auroc_first"].is_f64());
    assert_eq!(summary["counts"]["total"], 400);
    assert!(dir.path().join("records.jsonl").exists());
    assert!(dir.path().join("summary.txt").exists());
    assert!(dir.path().join("records_reg-cls.jsonl").exists());
}

#[test]
fn closed_book_run_leaves_context_subsets_empty() {
    let dir = tempfile::tempdir().unwrap();
    let summary = run("reg-cls", dir.path(), &[]);
    assert!(summary["em_gold_subset"].is_null());
    assert!(summary["em_noisy_subset"].is_null());
    assert!(summary["em_all"].is_f64());
    let table = fs::read_to_string(dir.path().join("summary.txt")).unwrap();
    assert!(table.lines().nth(2).unwrap().contains(" -"), "{table}");
}

#[test]
fn reruns_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run("micd-d", a.path(), &["--workers", "1"]);
    run("micd-d", b.path(), &["--workers", "4"]);
    let read = |d: &Path| fs::read(d.join("records.jsonl")).unwrap();
    assert_eq!(read(a.path()), read(b.path()));
    assert_eq!(fs::read(a.path().join("summary.json")).unwrap(), fs::read(b.path().join("summary.json")).unwrap());
}

#[test]
fn supplied_closed_book_records_match_the_paired_run() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run("reg-cls", a.path(), &[]);
    let closed = a.path().join("records.jsonl").display().to_string();
    let supplied = run("cad", b.path(), &["--alpha", "0.5", "--closed-book-records", &closed]);
    let c = tempfile::tempdir().unwrap();
    let paired = run("cad", c.path(), &["--alpha", "0.5"]);
    assert_eq!(supplied, paired);
}

#[test]
fn micd_f_without_adversarial_context_names_the_input() {
    let dir = tempfile::tempdir().unwrap();
    let mut args: Vec<String> = vec!["run".into()];
    args.extend(fixture_args("micd-f", dir.path()));
    let at = args.iter().position(|a| a == "--adversarial-context").unwrap();
    args.drain(at..at + 2);
    args.extend(["--alpha".into(), "1.0".into()]);
    let out = acd(&args.iter().map(String::as_str).collect::<Vec<_>>());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("--adversarial-context"));
    assert!(!dir.path().join("records.jsonl").exists());
}

#[test]
fn alpha_rules_are_enforced() {
    let dir = tempfile::tempdir().unwrap();
    let mut args: Vec<String> = vec!["run".into()];
    args.extend(fixture_args("acd", dir.path()));
    args.extend(["--alpha".into(), "0.5".into()]);
    assert!(!acd(&args.iter().map(String::as_str).collect::<Vec<_>>()).status.success());
    let mut args: Vec<String> = vec!["run".into()];
    args.extend(fixture_args("cad", dir.path()));
    assert!(!acd(&args.iter().map(String::as_str).collect::<Vec<_>>()).status.success());
}

#[test]
fn sweep_rows_and_endpoints() {
    let dir = tempfile::tempdir().unwrap();
    let mut args: Vec<String> = vec!["sweep".into(), "--alpha".into(), "0,0.5,1".into()];
    let fa = fixture_args("x", dir.path());
    args.extend(fa[2..].iter().cloned());
    ok(&args.iter().map(String::as_str).collect::<Vec<_>>());
    let csv = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let rows: Vec<Vec<&str>> = csv.lines().map(|l| l.split(',').collect()).collect();
    assert_eq!(rows[0], ["label", "alpha", "em_all", "em_gold", "em_noisy"]);
    assert_eq!(rows.len(), 5);
    assert_eq!(rows[4][0], "acd");
    assert_eq!(rows[4][1], "");

    let cls = run("reg-cls", &dir.path().join("cls"), &[]);
    let opn = run("reg-opn", &dir.path().join("opn"), &[]);
    assert_eq!(rows[1][2].parse::<f64>().unwrap(), cls["em_all"].as_f64().unwrap());
    assert_eq!(rows[3][2].parse::<f64>().unwrap(), opn["em_all"].as_f64().unwrap());

    let mut empty: Vec<String> = vec!["sweep".into()];
    empty.extend(fa[2..].iter().cloned());
    assert!(!acd(&empty.iter().map(String::as_str).collect::<Vec<_>>()).status.success());
}

#[test]
fn auroc_table_has_a_row_per_method() {
    let dir = tempfile::tempdir().unwrap();
    run("acd", &dir.path().join("acd"), &[]);
    run("micd-d", &dir.path().join("micd"), &[]);
    let a = dir.path().join("acd/records.jsonl").display().to_string();
    let m = dir.path().join("micd/records.jsonl").display().to_string();
    let table = ok(&["auroc", "--records", &a, "--records", &m, "--shuffle-control"]);
    let first: Vec<&str> = table.lines().filter(|l| l.starts_with("First")).collect();
    assert_eq!(first.len(), 2, "{table}");
    assert!(first.iter().any(|l| l.contains("acd") && l.trim_end().ends_with("100.00")), "{table}");
    assert!(table.contains("shuffled-label control"));

    let closed = dir.path().join("acd/records_reg-cls.jsonl").display().to_string();
    let out = acd(&["auroc", "--records", &closed]);
    assert!(!out.status.success());
}

#[test]
fn single_class_auroc_is_reported_as_undefined() {
    let dir = tempfile::tempdir().unwrap();
    run("acd", dir.path(), &[]);
    let text = fs::read_to_string(dir.path().join("records.jsonl")).unwrap();
    let gold_only: String =
        text.lines().filter(|l| l.contains("\"context_label\":\"gold\"")).map(|l| format!("{l}\n")).collect();
    let path = dir.path().join("gold.jsonl");
    fs::write(&path, gold_only).unwrap();
    let out = acd(&["auroc", "--records", path.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("undefined"));
}

#[test]
fn trace_of_a_known_noisy_example() {
    let dir = tempfile::tempdir().unwrap();
    // a known question whose distractor is less confident than the model
    let world: Value =
        serde_json::from_str(&fs::read_to_string(common::fixture_dir().join("toy_world.json")).unwrap()).unwrap();
    let weak: Vec<&str> = world["contexts"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| !c["asserted_answer"].is_null() && c["relevance"].as_f64().unwrap() < 0.5)
        .map(|c| c["id"].as_str().unwrap())
        .collect();
    let data = fs::read_to_string(common::fixture_dir().join("dataset.jsonl")).unwrap();
    let id = data
        .lines()
        .map(|l| serde_json::from_str::<Value>(l).unwrap())
        .find(|e| {
            e["meta"]["quadrant"] == "known-noisy"
                && weak.contains(&format!("{}-ctx", e["id"].as_str().unwrap()).as_str())
        })
        .map(|e| e["id"].as_str().unwrap().to_string())
        .unwrap();
    let mut args: Vec<String> = vec!["trace".into(), "--id".into(), id.clone()];
    args.extend(fixture_args("acd", dir.path()));
    let text = ok(&args.iter().map(String::as_str).collect::<Vec<_>>());
    let header: Vec<&str> = text.lines().nth(1).unwrap().split('\t').collect();
    let row: Vec<&str> = text.lines().nth(2).unwrap().split('\t').collect();
    assert_eq!(&header[..4], ["t", "H", "Hc", "alpha"]);
    let (h, hc, alpha): (f64, f64, f64) = (row[1].parse().unwrap(), row[2].parse().unwrap(), row[3].parse().unwrap());
    assert!(alpha < 0.5, "{text}");
    assert!((alpha - h / (h + hc)).abs() < 1e-3);
    assert!(dir.path().join(format!("trace_{id}.txt")).exists());

    let mut args: Vec<String> = vec!["trace".into(), "--id".into(), id];
    args.extend(fixture_args("reg-cls", dir.path()));
    let text = ok(&args.iter().map(String::as_str).collect::<Vec<_>>());
    assert!(!text.lines().nth(1).unwrap().contains("alpha"));

    let mut args: Vec<String> = vec!["trace".into(), "--id".into(), "no-such-id".into()];
    args.extend(fixture_args("acd", dir.path()));
    assert!(!acd(&args.iter().map(String::as_str).collect::<Vec<_>>()).status.success());
}

#[test]
fn generate_toy_reproduces_the_shipped_fixture() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["generate-toy", "--seed", "7", "--out", dir.path().to_str().unwrap()]);
    for file in ["dataset.jsonl", "dataset_swap.jsonl", "fewshots.jsonl", "toy_world.json", "adversarial.txt"] {
        assert_eq!(
            fs::read(dir.path().join(file)).unwrap(),
            fs::read(common::fixture_dir().join(file)).unwrap(),
            "{file} differs"
        );
    }
}

#[test]
fn template_files_match_the_default_layout() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("templates");
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run("acd", a.path(), &[]);
    let closed = root.join("closed.txt").display().to_string();
    let open = root.join("open.txt").display().to_string();
    run("acd", b.path(), &["--template-closed", &closed, "--template-open", &open]);
    assert_eq!(fs::read(a.path().join("records.jsonl")).unwrap(), fs::read(b.path().join("records.jsonl")).unwrap());
}

#[test]
fn remote_backend_via_environment() {
    let url = common::serve(Arc::new(ToyBackend::from_path(common::fixture_dir().join("toy_world.json")).unwrap()));
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let dir = common::fixture_dir();
    let p = |f: &str| dir.join(f).display().to_string();
    // a small slice keeps the HTTP round trips cheap
    let data: String =
        fs::read_to_string(dir.join("dataset.jsonl")).unwrap().lines().take(12).map(|l| format!("{l}\n")).collect();
    let slice = a.path().join("slice.jsonl");
    fs::write(&slice, data).unwrap();
    let common_args = |out: &Path| {
        vec![
            "run".to_string(),
            "--method".into(),
            "acd".into(),
            "--data".into(),
            slice.display().to_string(),
            "--fewshots".into(),
            p("fewshots.jsonl"),
            "--out".into(),
            out.display().to_string(),
        ]
    };
    let mut local = common_args(&a.path().join("local"));
    local.extend(["--toy-config".into(), p("toy_world.json")]);
    ok(&local.iter().map(String::as_str).collect::<Vec<_>>());

    let mut remote = common_args(&b.path().join("remote"));
    remote.extend(["--backend".into(), "remote".into()]);
    let out = Command::new(env!("CARGO_BIN_EXE_acd")).args(&remote).env("ACD_REMOTE_URL", &url).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(
        fs::read(a.path().join("local/records.jsonl")).unwrap(),
        fs::read(b.path().join("remote/records.jsonl")).unwrap()
    );
}

#[test]
fn unreachable_remote_fails() {
    let dir = tempfile::tempdir().unwrap();
    let d = common::fixture_dir();
    let out = acd(&[
        "run",
        "--method",
        "reg-cls",
        "--backend",
        "remote",
        "--remote-url",
        "http://127.0.0.1:1",
        "--data",
        d.join("dataset.jsonl").to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    assert!(!dir.path().join("records.jsonl").exists());
}
