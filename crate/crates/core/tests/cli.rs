use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fairaudit::report::{from_json, render, Format};
use fairaudit::CriterionId;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fairaudit"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Generates a scenario into `dir` and returns (csv, schema).
fn scenario(dir: &Path, name: &str, n: usize, seed: u64) -> (PathBuf, PathBuf) {
    let csv = dir.join(format!("{name}.csv"));
    let out = run(&[
        "generate",
        "--scenario",
        name,
        "--n",
        &n.to_string(),
        "--seed",
        &seed.to_string(),
        "--output",
        path_str(&csv),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    (csv, dir.join(format!("{name}.schema.json")))
}

fn audit(csv: &Path, schema: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        "audit",
        "--data",
        path_str(csv),
        "--schema",
        path_str(schema),
    ];
    args.extend_from_slice(extra);
    run(&args)
}

fn without_timing(json: &str) -> serde_json::Value {
    let mut v: serde_json::Value = serde_json::from_str(json).unwrap();
    v.as_object_mut()
        .unwrap()
        .remove("timing")
        .expect("timing block present");
    v
}

#[test]
fn criteria_subcommand_prints_the_registry() {
    let out = run(&["criteria"]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout(&out), include_str!("fixtures/criteria.txt"));
}

#[test]
fn generate_writes_data_truth_and_schema() {
    let dir = tempfile::tempdir().unwrap();
    let (csv, schema) = scenario(dir.path(), "planted_unfair_cluster", 500, 2);
    let header = std::fs::read_to_string(&csv).unwrap();
    assert!(header.starts_with("s,y,yhat,x0,x1\n"), "{}", &header[..40]);
    let truth: serde_json::Value = serde_json::from_slice(
        &std::fs::read(dir.path().join("planted_unfair_cluster.truth.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(truth["scenario"], "planted_unfair_cluster");
    assert_eq!(truth["seed"], 2);
    assert_eq!(truth["verdicts"]["isp"], "violated");
    assert!(!truth["planted_indices"].as_array().unwrap().is_empty());
    let schema: serde_json::Value =
        serde_json::from_slice(&std::fs::read(schema).unwrap()).unwrap();
    assert_eq!(schema["columns"].as_array().unwrap().len(), 5);

    let out = run(&["generate", "--scenario", "nope", "--output", path_str(&csv)]);
    assert_eq!(code(&out), 2);
}

#[test]
fn independent_data_passes_every_criterion() {
    let dir = tempfile::tempdir().unwrap();
    let (csv, schema) = scenario(dir.path(), "independent", 20_000, 1);
    let out = audit(&csv, &schema, &[]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    let text = stdout(&out);
    assert!(text.contains("\"warnings\": []"), "{text}");
    assert!(text.contains("\"schema_version\": 1"));
    let report = from_json(&text).unwrap();
    assert_eq!(report.results.len(), 6);
    assert!(report.results.iter().all(|r| r.passed()));
}

#[test]
fn direct_discrimination_fails_isp() {
    let dir = tempfile::tempdir().unwrap();
    let (csv, schema) = scenario(dir.path(), "direct_discrimination", 10_000, 1);
    let out = audit(&csv, &schema, &["--criteria", "isp"]);
    assert_eq!(code(&out), 1);
    let report = from_json(&stdout(&out)).unwrap();
    assert!(!report.result(CriterionId::Isp).unwrap().passed());
    assert!(!report.passed);
}

#[test]
fn errors_exit_with_two_and_name_their_source() {
    let dir = tempfile::tempdir().unwrap();
    let (csv, schema) = scenario(dir.path(), "independent", 200, 1);

    let out = audit(&csv, &schema, &["--criteria", ""]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).starts_with("error:"), "{}", stderr(&out));

    let missing = dir.path().join("absent.csv");
    let out = audit(&missing, &schema, &[]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("absent.csv"), "{}", stderr(&out));

    std::fs::write(
        dir.path().join("bad.json"),
        "{\"columns\": [], \"colour\": 1}",
    )
    .unwrap();
    let out = audit(&csv, &dir.path().join("bad.json"), &[]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("bad.json"), "{}", stderr(&out));

    assert_eq!(code(&audit(&csv, &schema, &["--criteria", "parity"])), 2);
    assert_eq!(
        code(&audit(&csv, &schema, &["--knn", "5", "--ball", "0.1"])),
        2
    );
    assert_eq!(code(&run(&["audit", "--data", path_str(&csv)])), 2);
}

#[test]
fn numeric_features_switch_to_soft_mode_in_markdown() {
    let dir = tempfile::tempdir().unwrap();
    let (csv, schema) = scenario(dir.path(), "planted_unfair_cluster", 4_000, 3);
    let out = audit(
        &csv,
        &schema,
        &[
            "--criteria",
            "sp,isp",
            "--knn",
            "100",
            "--format",
            "markdown",
            "--epsilon",
            "0.1",
        ],
    );
    assert_eq!(code(&out), 1);
    let text = stdout(&out);
    let row = text
        .lines()
        .find(|l| l.starts_with("| isp "))
        .expect("isp row");
    assert!(row.contains("| soft |"), "{row}");
    assert!(row.contains("ε = 0.1, δ = 0.05"), "{row}");
    assert!(row.ends_with("| fail |"), "{row}");
    let sp = text
        .lines()
        .find(|l| l.starts_with("| sp "))
        .expect("sp row");
    assert!(sp.contains("| exact |"), "{sp}");
    assert!(text.contains("## Warnings"));
    assert!(text.contains("soft"));
}

#[test]
fn reports_round_trip_and_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (csv, schema) = scenario(dir.path(), "planted_unfair_cluster", 2_000, 4);
    let first = dir.path().join("first.json");
    let second = dir.path().join("second.json");
    for out in [&first, &second] {
        let o = audit(&csv, &schema, &["--knn", "60", "--output", path_str(out)]);
        assert!(o.stdout.is_empty());
        assert_eq!(code(&o), 1, "{}", stderr(&o));
    }
    let a = std::fs::read_to_string(&first).unwrap();
    let b = std::fs::read_to_string(&second).unwrap();
    assert_eq!(without_timing(&a), without_timing(&b));
    let strip = |s: &str| s[..s.find("\"timing\"").unwrap()].to_string();
    assert_eq!(strip(&a), strip(&b));

    let report = from_json(&a).unwrap();
    assert_eq!(String::from_utf8(render(&report, Format::Json)).unwrap(), a);
    assert_eq!(
        from_json(&String::from_utf8(render(&report, Format::Json)).unwrap()).unwrap(),
        report
    );
}

fn pairs_csv(dir: &Path, name: &str, map: impl Fn(f64, f64) -> (f64, f64)) -> PathBuf {
    let path = dir.join(name);
    let mut text = String::from("x_0,x_1,m_0,m_1\n");
    for i in 0..30 {
        let (x0, x1) = (i as f64 * 0.37 % 5.0, (i * i) as f64 * 0.11 % 3.0);
        let (m0, m1) = map(x0, x1);
        text.push_str(&format!("{x0},{x1},{m0},{m1}\n"));
    }
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn lipschitz_subcommand_reports_expansion() {
    let dir = tempfile::tempdir().unwrap();
    let identity = pairs_csv(dir.path(), "id.csv", |a, b| (a, b));
    let out = run(&["lipschitz", "--data", path_str(&identity)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!((report["max_ratio"].as_f64().unwrap() - 1.0).abs() <= 1e-9);
    assert_eq!(report["pairs_examined"], 435);

    let doubled = pairs_csv(dir.path(), "double.csv", |a, b| (2.0 * a, 2.0 * b));
    let listed = dir.path().join("double.json");
    let out = run(&[
        "lipschitz",
        "--data",
        path_str(&doubled),
        "--max-listed",
        "3",
        "--output",
        path_str(&listed),
    ]);
    assert_eq!(code(&out), 1);
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(&listed).unwrap()).unwrap();
    assert_eq!(report["max_ratio"].as_f64(), Some(2.0));
    assert_eq!(report["violations"].as_array().unwrap().len(), 3);
    assert_eq!(report["violation_count"], 435);

    let out = run(&[
        "lipschitz",
        "--data",
        path_str(&doubled),
        "--sample",
        "50",
        "--seed",
        "9",
    ]);
    assert_eq!(code(&out), 1);
    let report: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(report["pairs_examined"], 50);

    assert_eq!(
        code(&run(&[
            "lipschitz",
            "--data",
            path_str(&doubled),
            "--sample",
            "50"
        ])),
        2
    );
    assert_eq!(
        code(&run(&[
            "lipschitz",
            "--data",
            path_str(&doubled),
            "--d-original",
            "chebyshev"
        ])),
        2
    );
}
