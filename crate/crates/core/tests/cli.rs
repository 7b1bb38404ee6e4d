use clap::Parser;
use optical_povm::cli::{self, Cli, ScenarioConfig, EXIT_INFEASIBLE, EXIT_IO, EXIT_OK, EXIT_VALIDATION};
use serde_json::Value;
use std::path::Path;

fn run(args: &[&str]) -> String {
    let mut full = vec!["optical-povm"];
    full.extend_from_slice(args);
    cli::run(&Cli::try_parse_from(full).unwrap()).unwrap()
}

fn run_json(args: &[&str]) -> Value {
    let mut full = args.to_vec();
    full.push("--json");
    serde_json::from_str(&run(&full)).unwrap()
}

fn exit(args: &[&str]) -> i32 {
    let mut full = vec!["optical-povm"];
    full.extend_from_slice(args);
    cli::main_with_args(full)
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

fn f(v: &Value) -> f64 {
    v.as_f64().unwrap()
}

#[test]
fn optimize_benchmarks() {
    let sd = run_json(&["optimize", "--builtin", "sd_paper"]);
    assert!((f(&sd["povm_success"]) - 0.5556).abs() < 5e-5);
    assert!((f(&sd["pvm_success"]) - 0.2540).abs() < 5e-3);
    assert_eq!(sd["failure_gram_eigenvalues"].as_array().unwrap().len(), 3);

    let filt = run_json(&["optimize", "--builtin", "filter_family", "--a", "0.25"]);
    assert!((f(&filt["povm_success"]) - 0.8333).abs() < 5e-5);
    assert!((f(&filt["pvm_success"]) - 0.6458).abs() < 5e-3);
    assert_eq!(filt["filter_target"], 1);

    let text = run(&["optimize", "--builtin", "sd_paper"]);
    assert!(text.contains("55.6%") && text.contains("25.4%"));
}

#[test]
fn inline_builtin_parameter() {
    let v = run_json(&["optimize", "--builtin", "filter_family(0.5)"]);
    assert!((f(&v["povm_success"]) - 2.0 / 3.0).abs() < 1e-9);
}

#[test]
fn validation_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let empty = write(dir.path(), "empty.json", r#"{"task": "ud", "states": []}"#);
    assert_eq!(exit(&["optimize", "--scenario", &empty]), EXIT_VALIDATION);
    let unnormalized = write(dir.path(), "bad.json", r#"{"task": "ud", "states": [[[1,0],[1,0]], [[0,0],[1,0]]]}"#);
    assert_eq!(exit(&["optimize", "--scenario", &unnormalized]), EXIT_VALIDATION);
    let garbage = write(dir.path(), "garbage.json", "{not json");
    assert_eq!(exit(&["optimize", "--scenario", &garbage]), EXIT_VALIDATION);
    let both = write(dir.path(), "both.json", r#"{"task": "ud", "builtin": "sd_paper", "states": [[[1,0],[0,0]]]}"#);
    assert_eq!(exit(&["optimize", "--scenario", &both]), EXIT_VALIDATION);
    assert_eq!(exit(&["optimize", "--builtin", "nope"]), EXIT_VALIDATION);
    assert_eq!(exit(&["optimize", "--builtin", "filter_family"]), EXIT_VALIDATION);
    assert_eq!(exit(&["optimize"]), EXIT_VALIDATION);
    assert_eq!(exit(&["optimize", "--builtin", "sd_paper", "--scenario", &empty]), EXIT_VALIDATION);
    assert_eq!(exit(&["simulate", "--builtin", "sd_paper"]), EXIT_VALIDATION);
}

#[test]
fn dependent_states_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let dep =
        write(dir.path(), "dep.json", r#"{"task": "ud", "states": [[[1,0],[0,0]], [[0,0],[1,0]], [[0.6,0],[0.8,0]]]}"#);
    assert_eq!(exit(&["optimize", "--scenario", &dep]), EXIT_INFEASIBLE);
    assert_eq!(exit(&["dilate", "--builtin", "filter_family", "--a", "1.0"]), EXIT_OK);
    let dep_ud = write(dir.path(), "dep_ud.json", r#"{"task": "ud", "builtin": "filter_family", "a": 1.0}"#);
    assert_eq!(exit(&["optimize", "--scenario", &dep_ud]), EXIT_INFEASIBLE);
}

#[test]
fn io_errors_exit_4() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.json");
    assert_eq!(exit(&["optimize", "--scenario", missing.to_str().unwrap()]), EXIT_IO);
    let nowhere = dir.path().join("no/such/dir/out.txt");
    assert_eq!(exit(&["optimize", "--builtin", "sd_paper", "--out", nowhere.to_str().unwrap()]), EXIT_IO);
}

#[test]
fn out_flag_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    assert_eq!(exit(&["optimize", "--builtin", "sd_paper", "--json", "--out", out.to_str().unwrap()]), EXIT_OK);
    let v: Value = serde_json::from_str(&std::fs::read_to_string(out).unwrap()).unwrap();
    assert!((f(&v["povm_success"]) - 5.0 / 9.0).abs() < 1e-9);
}

#[test]
fn dilate_outputs() {
    let v = run_json(&["dilate", "--builtin", "sd_paper"]);
    let (a, b) = ((1.0f64 / 3.0).sqrt(), (2.0f64 / 3.0).sqrt());
    let want = [[a, 0.0, 0.0, b], [0.0, b, 0.0, a], [0.0, 0.0, b, a]];
    for (row, w) in v["outputs"].as_array().unwrap().iter().zip(want) {
        for (z, x) in row.as_array().unwrap().iter().zip(w) {
            assert!((f(&z[0]) - x).abs() < 1e-9 && f(&z[1]).abs() < 1e-9);
        }
    }
    assert!(f(&v["gram_residual"]) <= 1e-10);
    assert!(f(&v["unitarity_residual"]) <= 1e-10);

    let v = run_json(&["dilate", "--builtin", "filter_family", "--a", "0.5"]);
    let want = [0.0, 0.5f64.sqrt(), 0.5, 0.5];
    for (z, x) in v["outputs"][1].as_array().unwrap().iter().zip(want) {
        assert!((f(&z[0]) - x).abs() < 1e-9 && f(&z[1]).abs() < 1e-9);
    }
}

#[test]
fn dilate_orthonormal_is_identity() {
    let dir = tempfile::tempdir().unwrap();
    let s = write(
        dir.path(),
        "basis.json",
        r#"{"task": "ud", "states": [[[1,0],[0,0],[0,0]], [[0,0],[1,0],[0,0]], [[0,0],[0,0],[1,0]]]}"#,
    );
    let v = run_json(&["dilate", "--scenario", &s]);
    assert_eq!(v["ancilla_dim"], 0);
    for (i, row) in v["unitary"].as_array().unwrap().iter().enumerate() {
        for (j, z) in row.as_array().unwrap().iter().enumerate() {
            let want = if i == j { 1.0 } else { 0.0 };
            assert!((f(&z[0]) - want).abs() < 1e-12 && f(&z[1]).abs() < 1e-12);
        }
    }
}

#[test]
fn decompose_plans() {
    let sd = run_json(&["decompose", "--builtin", "sd_paper"]);
    let stages = sd["stages"].as_array().unwrap();
    assert!(!stages.is_empty());
    assert!(stages.iter().all(|s| (f(&s["t"]) - 0.5f64.sqrt()).abs() < 1e-4));
    assert!(f(&sd["round_trip_residual"]) <= 1e-10);
    assert!(stages.iter().all(|s| s["rails"][0].as_u64().unwrap() >= 1));

    let filt = run_json(&["decompose", "--builtin", "filter_family", "--a", "0.25"]);
    assert!((f(&filt["stages"][0]["t"]) - 1.0 / 1.25f64.sqrt()).abs() < 1e-9);
    assert_eq!(filt["stages"][0]["rails"], serde_json::json!([1, 4]));
}

#[test]
fn decompose_unitary_files() {
    let dir = tempfile::tempdir().unwrap();
    let id = write(dir.path(), "id.json", "[[[1,0],[0,0],[0,0]],[[0,0],[1,0],[0,0]],[[0,0],[0,0],[1,0]]]");
    let v = run_json(&["decompose", "--unitary", &id]);
    assert!(v["stages"].as_array().unwrap().is_empty());

    let bad = write(dir.path(), "bad.json", "[[[1,0],[1,0]],[[0,0],[1,0]]]");
    assert_eq!(exit(&["decompose", "--unitary", &bad]), EXIT_VALIDATION);

    // the dilate report can be fed back in directly
    let dilated = write(dir.path(), "dilated.json", &run(&["dilate", "--builtin", "sd_paper", "--json"]));
    let from_file = run_json(&["decompose", "--unitary", &dilated]);
    let direct = run_json(&["decompose", "--builtin", "sd_paper"]);
    assert_eq!(from_file["stages"].as_array().unwrap().len(), direct["stages"].as_array().unwrap().len());
}

#[test]
fn simulate_noiseless_and_noisy() {
    let v = run_json(&["simulate", "--builtin", "sd_paper", "--seed", "1", "--noiseless"]);
    assert!((f(&v["summary"]["success_rate"]) - 5.0 / 9.0).abs() < 1e-9);
    assert!(f(&v["summary"]["error_rate"]) < 1e-12);

    let v = run_json(&["simulate", "--builtin", "filter_family", "--a", "0.5", "--seed", "1", "--noiseless"]);
    assert!((f(&v["summary"]["success_rate"]) - 2.0 / 3.0).abs() < 1e-9);

    let v = run_json(&["simulate", "--builtin", "sd_paper", "--seed", "5", "--trials", "20000"]);
    assert!((f(&v["summary"]["success_rate"]) - 0.545).abs() < 0.03);
    assert!(f(&v["summary"]["error_rate"]) > 0.0);
}

#[test]
fn simulate_is_deterministic_per_seed() {
    let args = ["simulate", "--builtin", "sd_paper", "--seed", "11", "--trials", "5000", "--json"];
    assert_eq!(run(&args), run(&args));
    let other = ["simulate", "--builtin", "sd_paper", "--seed", "12", "--trials", "5000", "--json"];
    assert_ne!(run(&args), run(&other));
}

#[test]
fn scenario_noise_block() {
    let dir = tempfile::tempdir().unwrap();
    let s = write(
        dir.path(),
        "noisy.json",
        r#"{"task": "ud", "builtin": "sd_paper", "noise": {"stage_phase_offsets": {"2": 0.2}}}"#,
    );
    let v = run_json(&["simulate", "--scenario", &s, "--seed", "1"]);
    assert!(f(&v["summary"]["error_rate"]) > 1e-4);
    assert_eq!(v["report"]["trials"], 1);

    let out_of_range = write(
        dir.path(),
        "range.json",
        r#"{"task": "ud", "builtin": "sd_paper", "noise": {"stage_phase_offsets": {"9": 0.2}}}"#,
    );
    assert_eq!(exit(&["simulate", "--scenario", &out_of_range, "--seed", "1"]), EXIT_VALIDATION);
}

#[test]
fn table1_rows() {
    let v = run_json(&["table1", "--trials", "20000"]);
    let cols = v["columns"].as_array().unwrap();
    let povm: Vec<f64> = cols.iter().map(|c| f(&c["povm_theory"])).collect();
    let pvm: Vec<f64> = cols.iter().map(|c| f(&c["pvm_theory"])).collect();
    assert_eq!(povm, vec![0.833, 0.667, 0.556]);
    assert_eq!(pvm, vec![0.646, 0.583, 0.254]);
    let text = run(&["table1", "--trials", "20000"]);
    assert!(text.contains("POVM_th") && text.contains("83.3%") && text.contains("25.4%"));
}

#[test]
fn scenario_round_trip_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let shuffled = write(
        dir.path(),
        "s.json",
        r#"{"priors": [0.2, 0.3, 0.5], "filter_target": 2, "noise": {"shots_per_trial": 10, "phase_jitter_sigma": 0.1},
            "states": [[[1,0],[0,0],[0,0]], [[0.6,0],[0,0.8],[0,0]], [[0,0],[0.1,0.1],[0.7,0.7]]], "task": "filter"}"#,
    );
    let canonical = run(&["scenario", "--scenario", &shuffled]);
    let again = write(dir.path(), "c.json", &canonical);
    assert_eq!(run(&["scenario", "--scenario", &again]), canonical);
    assert!(canonical.find("\"task\"").unwrap() < canonical.find("\"states\"").unwrap());

    let cfg = ScenarioConfig::builtin("filter_family", Some(0.1 + 0.2)).unwrap();
    let text = cfg.to_json();
    assert_eq!(ScenarioConfig::from_json(&text).unwrap().to_json(), text);
}
