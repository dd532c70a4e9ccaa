use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn ratchet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ratchet"))
        .args(args)
        .env_remove("RATCHET_THREADS")
        .output()
        .expect("binary runs")
}

fn out_arg(dir: &Path) -> String {
    dir.to_str().unwrap().to_string()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn cycle_writes_json_csv_and_manifest() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path().join("cycle");
    let out = ratchet(&["cycle", "--potential", "cosine", "--field", "2", "--grid", "1024", "--out", &out_arg(&dir)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = stdout_json(&out);
    assert!((summary["cycle_average"].as_f64().unwrap() - 2.0).abs() < 1e-7);
    let c = summary["contraction"].as_f64().unwrap();
    assert!(c > 0.0 && c < 1.0);

    let full = read_json(&dir.join("cycle.json"));
    assert_eq!(full["samples"].as_array().unwrap().len(), 1025);
    let csv = fs::read_to_string(dir.join("cycle.csv")).unwrap();
    assert!(csv.starts_with("x,v\n"));
    assert_eq!(csv.lines().count(), 1026);

    let manifest = read_json(&dir.join("manifest.json"));
    assert_eq!(manifest["command"], "cycle");
    assert_eq!(manifest["config"]["cycle"]["grid_size"], 1024);
    assert_eq!(manifest["tolerances"]["cycle_grid_size"], 1024);
    assert!(manifest["duration_seconds"].as_f64().unwrap() >= 0.0);
    assert!(manifest["outputs"].as_array().unwrap().iter().any(|o| o == "cycle.csv"));
}

#[test]
fn negative_field_gives_backward_cycle() {
    let tmp = TempDir::new().unwrap();
    let out = ratchet(&["cycle", "--potential", "two_harmonic:mu=0.5", "--field", "-3", "-o", &out_arg(tmp.path())]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout_json(&out)["mean_velocity"].as_f64().unwrap() < 0.0);
}

#[test]
fn regime_violation_exits_with_3() {
    let tmp = TempDir::new().unwrap();
    let out = ratchet(&["current", "--potential", "cosine", "--e1", "0.5", "--e2", "2", "-o", &out_arg(tmp.path())]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("E1 > M"), "{err}");
}

#[test]
fn configuration_errors_exit_with_2() {
    let tmp = TempDir::new().unwrap();
    let dir = out_arg(tmp.path());
    for args in [
        vec!["current", "--gamma=-1", "-o", &dir],
        vec!["cycle", "--potential", "two_harmonic:mu=1.5", "-o", &dir],
        vec!["sweep", "--lambdas", "0.01,0.1", "-o", &dir],
        vec!["cycle", "--potential", "quartic"],
        vec!["cycle", "--config", "/nonexistent/run.toml"],
    ] {
        let out = ratchet(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn integration_failure_exits_with_4() {
    let tmp = TempDir::new().unwrap();
    let config = tmp.path().join("run.toml");
    fs::write(&config, "[integrator]\nmax_steps = 5\n").unwrap();
    let out = ratchet(&[
        "ensemble", "--config", config.to_str().unwrap(), "--potential", "cosine", "--e1", "3", "--e2", "3",
        "--lambda", "0.5", "--samples", "4", "--periods", "2", "-o", &out_arg(tmp.path()),
    ]);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sample "));
}

#[test]
fn flags_override_the_config_file() {
    let tmp = TempDir::new().unwrap();
    let config = tmp.path().join("run.toml");
    fs::write(
        &config,
        "gamma = 0.5\n[potential]\nkind = \"two_harmonic\"\nmu = 0.3\n[forcing]\ne1 = 6.0\ne2 = 4.0\n",
    )
    .unwrap();
    let dir = tmp.path().join("out");
    let out = ratchet(&["current", "--config", config.to_str().unwrap(), "--e2", "5", "-o", &out_arg(&dir)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest = read_json(&dir.join("manifest.json"));
    assert_eq!(manifest["config"]["gamma"], 0.5);
    assert_eq!(manifest["config"]["potential"]["mu"], 0.3);
    assert_eq!(manifest["config"]["forcing"]["e1"], 6.0);
    assert_eq!(manifest["config"]["forcing"]["e2"], 5.0);
    let summary = stdout_json(&out);
    assert_eq!((summary["e1"].as_f64(), summary["e2"].as_f64()), (Some(6.0), Some(5.0)));
    assert_eq!(summary["gamma"], 0.5);
}

#[test]
fn rerun_from_manifest_reproduces_outputs() {
    let tmp = TempDir::new().unwrap();
    let first = tmp.path().join("first");
    let out = ratchet(&[
        "ensemble", "--potential", "two_harmonic:mu=0.5", "--e1", "4", "--e2", "4", "--lambda", "0.5", "--delta",
        "0.02", "--periods", "4", "--samples", "12", "--seed", "7", "-q", "-o", &out_arg(&first),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out.stdout.is_empty());

    let second = tmp.path().join("second");
    let manifest = first.join("manifest.json");
    let out = ratchet(&["rerun", manifest.to_str().unwrap(), "--threads", "1", "-q", "-o", &out_arg(&second)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(
        fs::read_to_string(first.join("ensemble.csv")).unwrap(),
        fs::read_to_string(second.join("ensemble.csv")).unwrap()
    );
    let header = fs::read_to_string(first.join("ensemble.csv")).unwrap();
    assert!(header.starts_with("lambda,delta,t,estimate,stderr,J_adiabatic,abs_error\n"));
    assert_eq!(read_json(&second.join("manifest.json"))["threads"], 1);
}

#[test]
fn thread_count_from_environment_does_not_change_results() {
    let tmp = TempDir::new().unwrap();
    let run = |threads: &str, name: &str| {
        let dir = tmp.path().join(name);
        let out = Command::new(env!("CARGO_BIN_EXE_ratchet"))
            .args(["ensemble", "--potential", "cosine", "--e1", "3", "--e2", "3", "--lambda", "0.5", "--periods", "4"])
            .args(["--samples", "24", "-q", "-o", dir.to_str().unwrap()])
            .env("RATCHET_THREADS", threads)
            .output()
            .unwrap();
        assert!(out.status.success());
        (fs::read_to_string(dir.join("ensemble.csv")).unwrap(), read_json(&dir.join("manifest.json"))["threads"].clone())
    };
    let (serial, t1) = run("1", "serial");
    let (parallel, t3) = run("3", "parallel");
    assert_eq!(serial, parallel);
    assert_eq!((t1, t3), (Value::from(1), Value::from(3)));
}

#[test]
fn sweep_writes_the_table() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path().join("sweep");
    let out = ratchet(&[
        "sweep", "--potential", "two_harmonic:mu=0.5", "--e1", "4", "--e2", "4", "--lambdas", "0.4,0.2", "--deltas",
        "0.04,0.02", "--periods", "10", "--samples", "8", "-q", "-o", &out_arg(&dir),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.join("sweep.csv")).unwrap();
    assert!(csv.starts_with("lambda,delta,t,estimate,stderr,J_adiabatic,abs_error\n"));
    assert_eq!(csv.lines().count(), 5);
    let summary = read_json(&dir.join("sweep.json"));
    assert!(summary["j_adiabatic"].as_f64().unwrap() < 0.0);
    assert_eq!(summary["trend"]["lambda_monotone"].as_array().unwrap().len(), 2);
}

#[test]
fn expansion_outputs() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path().join("exp");
    let out = ratchet(&["expansion", "--potential", "cosine", "--order", "1", "--fields", "8,16,32", "-q", "-o", &out_arg(&dir)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = read_json(&dir.join("expansion.json"));
    assert!((summary["slope"].as_f64().unwrap() + 2.0).abs() < 0.3);
    let coeffs = fs::read_to_string(dir.join("coefficients.csv")).unwrap();
    assert!(coeffs.starts_with("x,v1\n"));
    assert_eq!(fs::read_to_string(dir.join("scaling.csv")).unwrap().lines().count(), 4);
}

#[test]
fn reproduce_two_harmonic_matches_closed_form() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path().join("rep");
    let out = ratchet(&["reproduce", "--study", "two_harmonic", "-q", "-o", &out_arg(&dir)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = read_json(&dir.join("summary.json"));
    let rows = summary["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 9);
    for row in rows {
        let mu = row["value"].as_f64().unwrap();
        let got = row["ratchet_integral"].as_f64().unwrap();
        let want = -3.0 * std::f64::consts::PI * mu / 4.0;
        assert!(((got - want) / want).abs() < 1e-8, "μ = {mu}");
        assert!(row["current"].as_f64().unwrap() < 0.0);
    }
    assert_eq!(fs::read_to_string(dir.join("summary.csv")).unwrap().lines().count(), 10);
}

#[test]
fn reproduce_sawtooth_and_tilt_signs() {
    let tmp = TempDir::new().unwrap();
    for study in ["sawtooth", "tilt"] {
        let dir = tmp.path().join(study);
        let out = ratchet(&["reproduce", "--study", study, "-q", "-o", &out_arg(&dir)]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let summary = read_json(&dir.join("summary.json"));
        assert_eq!(summary["all_agree"], true, "{study}");
        for row in summary["rows"].as_array().unwrap() {
            let sign = row["expected_sign"].as_f64().unwrap();
            assert_eq!(row["current"].as_f64().unwrap().signum(), sign);
        }
    }
}
