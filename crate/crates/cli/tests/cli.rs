use std::path::PathBuf;
use std::process::{Command, Output};

use condenser_cli::ProblemConfig;
use serde_json::Value;

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn condenser(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_condenser"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn config(name: &str) -> String {
    configs().join(name).to_string_lossy().into_owned()
}

fn records(out: &Output) -> Vec<Value> {
    String::from_utf8(out.stdout.clone())
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

fn write_temp(dir: &tempfile::TempDir, name: &str, body: &str) -> String {
    let path = dir.path().join(name);
    std::fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn pinned_node_solves_to_the_diagonal() {
    let out = condenser(&["solve", &config("solve_pinned.json")]);
    assert_eq!(out.status.code(), Some(0));
    let r = &records(&out)[0];
    assert_eq!(r["value"], 4.0);
    assert_eq!(r["converged"], true);
    assert_eq!(r["weights"][0][0], 1.0);
}

#[test]
fn infeasible_config_names_the_plate() {
    let out = condenser(&["solve", &config("solve_infeasible.json")]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("plate 0: a exceeds ⟨g,σ⟩"), "{err}");
}

#[test]
fn two_plate_config_matches_golden_value() {
    let out = condenser(&["solve", &config("solve_two_plate.json")]);
    assert_eq!(out.status.code(), Some(0));
    let golden: Value =
        serde_json::from_str(&std::fs::read_to_string(configs().join("solve_two_plate.golden.json")).unwrap()).unwrap();
    let value = records(&out)[0]["value"].as_f64().unwrap();
    let expect = golden["value"].as_f64().unwrap();
    assert!((value - expect).abs() <= 1e-8, "{value} vs {expect}");
}

#[test]
fn iteration_limit_gives_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg: Value =
        serde_json::from_str(&std::fs::read_to_string(config("solve_two_plate.json")).unwrap()).unwrap();
    cfg["solver"]["max_iters"] = Value::from(1);
    let path = write_temp(&dir, "short.json", &cfg.to_string());
    let out = condenser(&["solve", &path]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(records(&out)[0]["converged"], false);
}

#[test]
fn check_pd_on_identity() {
    let out = condenser(&["check-pd", &config("check_pd_identity.json")]);
    assert_eq!(out.status.code(), Some(0));
    let r = &records(&out)[0];
    assert_eq!(r["is_strictly_pd"], true);
    assert_eq!(r["min_eigenvalue"], 1.0);
}

#[test]
fn sphere_capacity_is_close_to_its_radius() {
    let out = condenser(&["capacity", &config("capacity_sphere.json")]);
    assert_eq!(out.status.code(), Some(0));
    let r = &records(&out)[0];
    let cap = r["capacity"].as_f64().unwrap();
    assert!((cap - 2.0).abs() <= 0.1, "{cap}");
    assert_eq!(r["frostman_ok"], true);
}

#[test]
fn balayage_record_has_small_residual() {
    let out = condenser(&["balayage", &config("balayage_point.json")]);
    assert_eq!(out.status.code(), Some(0));
    let r = &records(&out)[0];
    assert!(r["potential_residual"].as_f64().unwrap() <= 1e-6);
    assert!(r["mass_ratio"].as_f64().unwrap() <= 1.0 + 1e-8);
    assert_eq!(r["swept"].as_array().unwrap().len(), 100);
}

#[test]
fn exhaust_emits_one_monotone_record_per_stage() {
    let out = condenser(&["exhaust", &config("exhaust.json")]);
    assert_eq!(out.status.code(), Some(0));
    let recs = records(&out);
    assert_eq!(recs.len(), 3);
    let values: Vec<f64> = recs.iter().map(|r| r["value"].as_f64().unwrap()).collect();
    assert!(values.windows(2).all(|w| w[1] <= w[0] + 1e-8), "{values:?}");
}

#[test]
fn thinness_flags_override_the_config() {
    let out = condenser(&[
        "thinness",
        &config("thinness.json"),
        "--profile",
        "power_s",
        "--s",
        "1",
        "--radii",
        "3",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let recs = records(&out);
    assert_eq!(recs.len(), 1);
    assert_eq!(recs[0]["profile"], "power_s");
    assert!(recs[0]["capacity"].as_f64().unwrap() > 0.0);
}

#[test]
fn output_is_deterministic_for_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.jsonl");
    let b = dir.path().join("b.jsonl");
    for path in [&a, &b] {
        let out = condenser(&[
            "solve",
            &config("solve_two_plate.json"),
            "--seed",
            "17",
            "--out",
            path.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0));
        assert!(out.stdout.is_empty());
    }
    assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
}

#[test]
fn csv_output_has_a_header_and_one_row_per_record() {
    let out = condenser(&["exhaust", &config("exhaust.json"), "--format", "csv"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let headers = reader.headers().unwrap().clone();
    assert!(headers.iter().any(|h| h == "semimetric_gap"));
    assert_eq!(reader.records().count(), 3);
}

#[test]
fn every_committed_config_round_trips() {
    for entry in std::fs::read_dir(configs()).unwrap() {
        let path = entry.unwrap().path();
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        if !name.ends_with(".json") || name.ends_with(".golden.json") {
            continue;
        }
        let parsed = ProblemConfig::load(&path).unwrap();
        let canonical = parsed.to_canonical_json().unwrap();
        let again = ProblemConfig::parse(&canonical).unwrap();
        assert_eq!(parsed, again, "{name}");
        assert_eq!(canonical, again.to_canonical_json().unwrap(), "{name}");
    }
}

#[test]
fn parse_errors_point_at_the_field() {
    let err = ProblemConfig::parse(
        r#"{"kernel": {"family": "newtonian"}, "plates": [{"sign": 1, "nodes": [[0.0]], "a": "one", "sigma": 1.0}]}"#,
    )
    .unwrap_err()
    .to_string();
    assert!(err.contains("plates[0].a"), "{err}");
    assert!(err.contains("line 1"), "{err}");
    let err = ProblemConfig::parse(r#"{"plates": [{"sign": 3, "nodes": [[0.0]], "a": 1.0, "sigma": 1.0}]}"#)
        .unwrap_err()
        .to_string();
    assert!(err.contains("plates[0].sign"), "{err}");
}

#[test]
fn missing_section_is_an_error() {
    let out = condenser(&["balayage", &config("solve_pinned.json")]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stderr).unwrap().contains("balayage"));
}
