use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ensemble-shapley"))
        .args(args)
        .output()
        .expect("run CLI")
}

fn stdout(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn json(args: &[&str]) -> Value {
    serde_json::from_str(&stdout(args)).unwrap()
}

fn schema_errors(name: &str, instance: &Value) -> Vec<String> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("schemas")
        .join(format!("{name}.schema.json"));
    let schema: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    validator
        .iter_errors(instance)
        .map(|e| format!("{} at {}", e, e.instance_path))
        .collect()
}

fn check_schema(name: &str, instance: &Value) {
    let errors = schema_errors(name, instance);
    assert!(errors.is_empty(), "{name}: {errors:#?}");
}

struct Fixture {
    _dir: tempfile::TempDir,
    value: PathBuf,
    test: PathBuf,
}

fn fixture() -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let value = dir.path().join("value.csv");
    let test = dir.path().join("test.json");
    stdout(&[
        "simulate",
        "--n",
        "80",
        "--m",
        "8",
        "--seed",
        "1",
        "--out",
        value.to_str().unwrap(),
    ]);
    stdout(&[
        "simulate",
        "--n",
        "80",
        "--m",
        "8",
        "--seed",
        "2",
        "--format",
        "json",
        "--out",
        test.to_str().unwrap(),
    ]);
    Fixture { _dir: dir, value, test }
}

#[test]
fn value_reports_match_the_schema() {
    let f = fixture();
    let input = f.value.to_str().unwrap();
    for solver in ["exact", "mc", "mle", "emc"] {
        let report = json(&[
            "value",
            "--input",
            input,
            "--solver",
            solver,
            "--permutations",
            "200",
            "--points",
        ]);
        check_schema("valuation-report", &report);
        assert_eq!(report["schema"], "ensemble-shapley/1");
        assert_eq!(report["points"].as_array().unwrap().len(), 80);
        let norm = &report["raw_and_normalized"]["normalized"]["avg_positive"];
        let total: f64 = norm.as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-9, "{solver}: {total}");
    }
    check_schema(
        "valuation-report",
        &json(&["value", "--input", input, "--no-normalize"]),
    );
}

#[test]
fn worked_example_values() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("one.csv");
    std::fs::write(&path, "label,a,b,c\n1,0.9,0.8,0.1\n").unwrap();
    let report = json(&[
        "value",
        "--input",
        path.to_str().unwrap(),
        "--solver",
        "exact",
        "--points",
    ]);
    assert_eq!(report["model_ids"], serde_json::json!(["a", "b", "c"]));
    assert_eq!(
        report["points"][0]["ensemble_shapley"]["values"],
        serde_json::json!([0.5, 0.5, 0.0])
    );
}

#[test]
fn entropy_and_selection_match_their_schemas() {
    let f = fixture();
    let entropy = json(&["entropy", "--input", f.value.to_str().unwrap()]);
    check_schema("entropy", &entropy);
    let h = entropy["entropy_positive"].as_f64().unwrap();
    assert!(h >= 0.0 && h <= entropy["max_entropy"].as_f64().unwrap());

    let trace = json(&[
        "select",
        "--value-input",
        f.value.to_str().unwrap(),
        "--test-input",
        f.test.to_str().unwrap(),
    ]);
    check_schema("selection", &trace);
    assert_eq!(trace["ordering"].as_array().unwrap().len(), 8);

    let csv = stdout(&[
        "select",
        "--value-input",
        f.value.to_str().unwrap(),
        "--test-input",
        f.test.to_str().unwrap(),
        "--table",
        "csv",
    ]);
    assert_eq!(csv.lines().count(), 9);
}

#[test]
fn compare_floors_a_lost_game() {
    let won = json(&["compare", "--weights", "0.2,0.15,0.05,0.1", "--gamma", "0.3"]);
    check_schema("comparison", &won);
    assert_eq!(won["won"], true);

    let lost = json(&["compare", "--weights", "0.1,0.1", "--gamma", "0.5"]);
    check_schema("comparison", &lost);
    assert_eq!(lost["won"], false);
    assert!(lost["exact_floored"].as_array().unwrap().iter().all(|f| f == true));
    for s in lost["solvers"].as_array().unwrap() {
        assert!(s["mean_ape"].is_null());
    }
}

#[test]
fn bound_reports_the_sample_size() {
    let report = json(&[
        "bound",
        "--m",
        "100",
        "--epsilon",
        "0.1",
        "--alpha",
        "0.05",
        "--n",
        "59",
    ]);
    check_schema("bound", &report);
    assert_eq!(report["required_n"], 59);

    let mut tampered = report.clone();
    tampered["unexpected"] = Value::Bool(true);
    assert!(!schema_errors("bound", &tampered).is_empty());
    tampered = report;
    tampered["schema"] = Value::from("ensemble-shapley/0");
    assert!(!schema_errors("bound", &tampered).is_empty());
}

#[test]
fn adversarial_and_bench_match_their_schemas() {
    let f = fixture();
    let study = json(&[
        "adversarial",
        "--input",
        f.value.to_str().unwrap(),
        "--ratios",
        "0,0.5,1",
    ]);
    check_schema("adversarial", &study);
    assert_eq!(study["adversarial_models"], serde_json::json!([0, 1, 2, 3]));
    assert_eq!(study["rows"].as_array().unwrap().len(), 3);

    let bench = json(&["bench", "--sizes", "10x4,20x4", "--solvers", "emc,mle", "--runs", "1"]);
    check_schema("bench", &bench);
    assert_eq!(bench["rows"].as_array().unwrap().len(), 4);
}

#[test]
fn simulate_writes_both_formats() {
    let csv = stdout(&["simulate", "--n", "5", "--m", "3", "--seed", "4"]);
    assert_eq!(csv.lines().next().unwrap(), "label,p_1,p_2,p_3");
    assert_eq!(csv.lines().count(), 6);

    let data = json(&[
        "simulate",
        "--n",
        "5",
        "--noise-ratios",
        "0,0.5,1,1",
        "--format",
        "json",
    ]);
    check_schema("dataset", &data);
    assert_eq!(data["probabilities"][0].as_array().unwrap().len(), 4);
    assert_eq!(stdout(&["simulate", "--n", "5", "--m", "3", "--seed", "4"]), csv);
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(&["bound", "--m", "ten", "--epsilon", "0.1"]).status.code(), Some(2));
    assert_eq!(
        run(&["value", "--input", "x.csv", "--solver", "magic"]).status.code(),
        Some(2)
    );
}

#[test]
fn data_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad_label = dir.path().join("label.csv");
    std::fs::write(&bad_label, "label,a,b\n2,0.5,0.5\n").unwrap();
    let out = run(&["value", "--input", bad_label.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));

    let bad_probability = dir.path().join("prob.csv");
    std::fs::write(&bad_probability, "label,a,b\n1,0.5,1.5\n").unwrap();
    assert_eq!(
        run(&["value", "--input", bad_probability.to_str().unwrap()])
            .status
            .code(),
        Some(1)
    );

    let missing = dir.path().join("missing.csv");
    assert_eq!(
        run(&["value", "--input", missing.to_str().unwrap()]).status.code(),
        Some(1)
    );
    assert_eq!(run(&["compare", "--weights", "0.9,0.1"]).status.code(), Some(1));
    assert_eq!(run(&["bound", "--m", "10", "--epsilon", "0"]).status.code(), Some(1));
}
