//! End-to-end tests of the `symek` binary: exit codes, artifact shapes,
//! config-file precedence, and byte-level reproducibility. Each test
//! drives the compiled binary exactly as a user would.

use std::path::Path;
use std::process::{Command, Output};

fn symek() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_symek"));
    // Tests assert on artifacts and exit codes; keep stderr quiet unless
    // a test opts back in to inspect it.
    cmd.env("SYMEK_LOG", "off");
    cmd
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

fn stdout_json(output: &Output) -> serde_json::Value {
    serde_json::from_slice(&output.stdout).expect("stdout is JSON")
}

fn read_json(path: &Path) -> serde_json::Value {
    let text = std::fs::read_to_string(path).expect("artifact exists");
    serde_json::from_str(&text).expect("artifact is JSON")
}

#[test]
fn verify_axioms_emits_a_passing_json_report() {
    let output = run(symek()
        .args(["verify-axioms", "--model", "vector:8", "--samples", "300", "--seed", "7"]));
    assert!(output.status.success(), "stderr: {}", String::from_utf8_lossy(&output.stderr));
    let report = stdout_json(&output);
    assert_eq!(report["all_pass"], true);
    assert_eq!(report["samples"], 300);
    assert!(report["checks"].as_array().unwrap().len() >= 5);
}

#[test]
fn unknown_functional_is_a_config_error() {
    let output = run(symek()
        .env("SYMEK_LOG", "error")
        .args(["check-monotone", "--functional", "frobnicate", "--model", "vector:8", "--seed", "3"]));
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("frobnicate"), "stderr: {stderr}");
}

#[test]
fn monotonicity_violations_fail_the_run_and_carry_a_witness() {
    let output = run(symek().args([
        "check-monotone",
        "--functional",
        "negative-control",
        "--model",
        "vector:8",
        "--samples",
        "400",
        "--seed",
        "3",
    ]));
    assert_eq!(output.status.code(), Some(1));
    let report = stdout_json(&output);
    assert_eq!(report["pass"], false);
    assert_eq!(report["claimed"], false);
    let witness = &report["witness"];
    assert!(witness.is_object(), "failing report carries its witness");
    assert!(witness["f_after"].as_f64().unwrap() > witness["f_before"].as_f64().unwrap());
}

#[test]
fn a_monotone_energy_passes_the_probe() {
    let output = run(symek().args([
        "check-monotone",
        "--functional",
        "dirichlet",
        "--model",
        "grid1d:9:0.5",
        "--samples",
        "400",
        "--seed",
        "5",
    ]));
    assert!(output.status.success());
    let report = stdout_json(&output);
    assert_eq!(report["pass"], true);
    assert_eq!(report["witness"], serde_json::Value::Null);
}

#[test]
fn sps_csv_has_one_contracted_row_per_stage() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.csv");
    let output = run(symek().args([
        "sps",
        "--functional",
        "quadratic",
        "--model",
        "vector:16",
        "--schedule",
        "geometric:0.5:10",
        "--seed",
        "1",
        "--format",
        "csv",
        "--out",
        out.to_str().unwrap(),
    ]));
    assert!(output.status.success(), "stderr: {}", String::from_utf8_lossy(&output.stderr));

    let text = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "j,eps,f,slope_bound,asymmetry");
    assert_eq!(lines.len(), 11, "header plus one row per stage");
    let mut previous_f = f64::INFINITY;
    for (i, line) in lines[1..].iter().enumerate() {
        let fields: Vec<f64> = line.split(',').map(|v| v.parse().unwrap()).collect();
        let (j, eps, f, slope_bound, asymmetry) =
            (fields[0], fields[1], fields[2], fields[3], fields[4]);
        assert_eq!(j as usize, i + 1);
        assert_eq!(eps, 0.5_f64.powi(i as i32 + 1));
        assert!(asymmetry <= 3.0 * eps, "stage {j}: asymmetry {asymmetry} vs eps {eps}");
        assert!(slope_bound <= eps + 1e-6, "stage {j}: slope bound {slope_bound}");
        assert!(f <= previous_f, "stage energies must not increase");
        previous_f = f;
    }

    // The receipt sits next to the artifact and agrees on the outcome.
    let manifest = read_json(&out.with_file_name("t.csv.manifest.json"));
    assert_eq!(manifest["command"], "sps");
    assert_eq!(manifest["exit_status"], 0);
    assert_eq!(manifest["summary"]["stages"], 10);
}

#[test]
fn identical_configs_produce_byte_identical_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let mut artifacts = Vec::new();
    let mut hashes = Vec::new();
    for name in ["a.json", "b.json"] {
        let out = dir.path().join(name);
        let output = run(symek().args([
            "sps",
            "--functional",
            "dirichlet",
            "--model",
            "grid1d:9:0.5",
            "--schedule",
            "geometric:0.5:4",
            "--seed",
            "12",
            "--samples",
            "400",
            "--out",
            out.to_str().unwrap(),
        ]));
        assert!(output.status.success(), "stderr: {}", String::from_utf8_lossy(&output.stderr));
        artifacts.push(std::fs::read(&out).unwrap());
        let manifest = read_json(&dir.path().join(format!("{name}.manifest.json")));
        hashes.push(manifest["config_hash"].as_str().unwrap().to_string());
    }
    assert_eq!(artifacts[0], artifacts[1], "same config, same bytes");
    // The two runs wrote to different paths, so their configs (and
    // hashes) differ there — but each receipt identifies its own run.
    assert_eq!(hashes[0].len(), 64);
    assert_ne!(hashes[0], hashes[1]);
}

#[test]
fn schedule_errors_name_the_offending_segment() {
    for (schedule, expect) in [
        ("geometric:1.5:3", "ratio"),
        ("list:0.1,0.2", "segment 3"),
        ("list:0.1,-0.05", "segment 3"),
        ("arithmetic:1:3", "unknown schedule kind"),
    ] {
        let output = run(symek().env("SYMEK_LOG", "error").args([
            "sps",
            "--functional",
            "quadratic",
            "--model",
            "vector:8",
            "--schedule",
            schedule,
            "--seed",
            "1",
        ]));
        assert_eq!(output.status.code(), Some(2), "schedule {schedule}");
        let stderr = String::from_utf8_lossy(&output.stderr);
        assert!(stderr.contains(expect), "schedule {schedule}: stderr {stderr}");
    }
}

#[test]
fn flags_override_config_file_fields() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("run.json");
    let baseline_out = dir.path().join("baseline.csv");
    let config = serde_json::json!({
        "command": "sps",
        "model": {"kind": "vector", "n": 16, "h_mesh": 1.0},
        "functional": {"name": "quadratic", "params": {}},
        "schedule": [0.5, 0.25, 0.125, 0.0625],
        "seed": 1,
        "samples": 400,
        "output_path": baseline_out.to_str().unwrap(),
        "format": "csv"
    });
    std::fs::write(&config_path, serde_json::to_string_pretty(&config).unwrap()).unwrap();

    // Verbatim execution uses every field from the file.
    let output = run(symek().args(["run", "--config", config_path.to_str().unwrap()]));
    assert!(output.status.success(), "stderr: {}", String::from_utf8_lossy(&output.stderr));
    let baseline = std::fs::read_to_string(&baseline_out).unwrap();
    assert_eq!(baseline.lines().count(), 5, "four stages plus header");

    // An explicit flag replaces the file's schedule; the rest is kept.
    let short_out = dir.path().join("short.csv");
    let output = run(symek().args([
        "run",
        "--config",
        config_path.to_str().unwrap(),
        "--schedule",
        "list:0.5,0.25",
        "--out",
        short_out.to_str().unwrap(),
    ]));
    assert!(output.status.success());
    let short = std::fs::read_to_string(&short_out).unwrap();
    assert_eq!(short.lines().count(), 3, "two stages plus header");
    assert_eq!(short.lines().zip(baseline.lines()).filter(|(s, b)| s == b).count(), 3,
        "shared stages agree byte-for-byte with the baseline");
}

#[test]
fn run_without_a_config_file_is_refused() {
    let output = run(symek().env("SYMEK_LOG", "error").arg("run"));
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("--config"), "stderr: {stderr}");
}

#[test]
fn symmetric_ekeland_asserts_its_conclusions_when_the_premise_holds() {
    // rho * sigma = 16 comfortably exceeds the energy gap of any start in
    // the sampling box, so the premise is confirmed and all four
    // conclusions are asserted.
    let output = run(symek().args([
        "symmetric-ekeland",
        "--functional",
        "quadratic",
        "--model",
        "vector:16",
        "--rho",
        "4",
        "--sigma",
        "4",
        "--seed",
        "11",
        "--samples",
        "600",
    ]));
    assert!(output.status.success(), "stderr: {}", String::from_utf8_lossy(&output.stderr));
    let cert = stdout_json(&output);
    assert_eq!(cert["diagnostics"]["premise_vs_bound_ok"], true);
    assert_eq!(cert["conclusion_a_ok"], true);
    assert_eq!(cert["conclusion_b_ok"], true);
    assert_eq!(cert["descent_ok"], true);
    let asymmetry = cert["asymmetry"].as_f64().unwrap();
    assert!(asymmetry <= 3.0 * 4.0);
    assert!(cert["d_residual"].as_f64().unwrap() <= 1e-8);
}

#[test]
fn ekeland_descends_and_pays_for_its_displacement() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("descent.json");
    let output = run(symek().args([
        "ekeland",
        "--functional",
        "dirichlet",
        "--model",
        "grid1d:9:0.5",
        "--rho",
        "0.05",
        "--sigma",
        "0.05",
        "--seed",
        "21",
        "--out",
        out.to_str().unwrap(),
    ]));
    assert!(output.status.success(), "stderr: {}", String::from_utf8_lossy(&output.stderr));
    let record = read_json(&out);
    let f_start = record["f_start"].as_f64().unwrap();
    let f_point = record["f_point"].as_f64().unwrap();
    assert!(f_point <= f_start);
    assert_eq!(record["descent_pays_for_distance"], true);
    assert!(record["displacement"].as_f64().unwrap() <= record["path_length"].as_f64().unwrap() + 1e-10);
}

#[test]
fn misdirected_flags_are_refused() {
    // --rho means nothing to verify-axioms.
    let output = run(symek().env("SYMEK_LOG", "error").args([
        "verify-axioms", "--model", "vector:8", "--seed", "7", "--rho", "0.1",
    ]));
    assert_eq!(output.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&output.stderr).contains("--rho"));

    // CSV is only defined for the stage table.
    let output = run(symek().env("SYMEK_LOG", "error").args([
        "verify-axioms", "--model", "vector:8", "--seed", "7", "--format", "csv",
    ]));
    assert_eq!(output.status.code(), Some(2));

    // The descent commands insist on their scales.
    let output = run(symek().env("SYMEK_LOG", "error").args([
        "ekeland", "--functional", "quadratic", "--model", "vector:8", "--seed", "7",
    ]));
    assert_eq!(output.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&output.stderr).contains("--rho"));
}

#[test]
fn sps_with_conv_tol_extracts_a_limit_candidate() {
    let output = run(symek().args([
        "sps",
        "--functional",
        "quadratic",
        "--model",
        "vector:16",
        "--schedule",
        "geometric:0.5:8",
        "--conv-tol",
        "0.02",
        "--seed",
        "1",
        "--samples",
        "400",
    ]));
    assert!(output.status.success(), "stderr: {}", String::from_utf8_lossy(&output.stderr));
    let trace = stdout_json(&output);
    assert_eq!(trace["entries"].as_array().unwrap().len(), 8);
    assert!(trace["limit"].is_object(), "limit candidate extracted");
    let residual = trace["limit_symmetric_residual"].as_f64().unwrap();
    assert!(residual <= 0.02 * 4.0, "limit is symmetric at the requested resolution");
}
