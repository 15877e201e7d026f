use std::fs;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_chaos-gamma"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn")
}

fn stdout_json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

#[test]
fn cumulants_of_concrete() {
    let v = stdout_json(&run(&["cumulants", "--family", "concrete", "--n", "10", "--p-max", "4"]));
    let gap4 = v["cumulants"][3]["gap"].as_f64().unwrap();
    assert!((gap4 - 0.96).abs() < 1e-13, "{gap4}");
}

#[test]
fn raw_spec_and_file_spec_agree() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("spec.json");
    fs::write(&p, "[0.5, 1.2, -0.3]").unwrap();
    let a = stdout_json(&run(&["delta", "--spec", "[0.5, 1.2, -0.3]"]));
    let b = stdout_json(&run(&["delta", "--spec", &format!("@{}", p.display())]));
    assert_eq!(a, b);
    let d = &a["delta"][1];
    let (x, y) = (d["eigenvalue_route"].as_f64().unwrap(), d["cumulant_route"].as_f64().unwrap());
    assert!((x - y).abs() <= 1e-10 * x.abs());
}

#[test]
fn characterize_all_ones() {
    let v = stdout_json(&run(&["characterize", "--spec", "[1, 1, 1]"]));
    assert_eq!(v["gamma_check"]["is_gamma"], true);
    let v = stdout_json(&run(&["characterize", "--spec", "[1, 1.001, 1]", "--nu", "1.5"]));
    assert_eq!(v["gamma_check"]["is_gamma"], false);
}

#[test]
fn bounds_and_kolmogorov_run() {
    let v = stdout_json(&run(&["bounds", "--family", "ustat", "--n", "20"]));
    assert_eq!(v["bounds"].as_array().unwrap().len(), 5);
    let v = stdout_json(&run(&["kolmogorov", "--family", "toy3", "--n", "10", "--mc-samples", "20000", "--seed", "3"]));
    assert!(v["monte_carlo"]["value"].as_f64().unwrap() <= v["bound"]["value"].as_f64().unwrap());
}

#[test]
fn dtv_example_and_coeffs() {
    let v = stdout_json(&run(&["dtv-example", "--n", "10,20"]));
    let d = v["rows"][0]["dtv"].as_f64().unwrap();
    assert!((d - 1.541_772_403_400_8e-3).abs() < 1e-12);
    let v = stdout_json(&run(&["coeffs-verify"]));
    assert_eq!(v["q2_equality"], true);
    assert!(!v["witness"]["tuple"].is_null());
}

#[test]
fn rates_writes_every_requested_format() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(
        &cfg,
        r#"{"family": {"name": "concrete"}, "n_grid": [10, 100, 1000], "nu": 2, "metrics": ["kappa4_gap", "delta0"]}"#,
    )
    .unwrap();
    let out = dir.path().join("report");
    let o = run(&["rates", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--format", "csv,json,svg"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.with_extension("csv")).unwrap();
    assert!(csv.starts_with("n,metric,value\n"));
    assert_eq!(csv.lines().count(), 7);
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.with_extension("json")).unwrap()).unwrap();
    assert_eq!(json["seed"], 0);
    assert!(fs::read_to_string(out.with_extension("svg")).unwrap().contains("<svg"));
}

#[test]
fn rates_is_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(
        &cfg,
        r#"{"family": {"name": "toy2"}, "n_grid": [10, 40], "nu": 1, "metrics": ["mc_kolmogorov", "d1"], "mc_samples": 5000}"#,
    )
    .unwrap();
    let args = ["rates", "--config", cfg.to_str().unwrap(), "--seed", "11", "--format", "json"];
    let a = bin().args(args).env("CHAOS_GAMMA_THREADS", "1").output().unwrap();
    let b = bin().args(args).env("CHAOS_GAMMA_THREADS", "4").output().unwrap();
    assert!(a.status.success() && b.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn variance_mismatch_exits_2_naming_n() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"family": {"name": "ustat"}, "n_grid": [50, 60], "nu": 2, "metrics": ["m"]}"#).unwrap();
    let o = run(&["rates", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("n = 50"));
}

#[test]
fn exit_codes() {
    // config errors
    assert_eq!(run(&["rates"]).status.code(), Some(2));
    assert_eq!(run(&["cumulants", "--spec", "[1, oops]"]).status.code(), Some(2));
    assert_eq!(run(&["cumulants", "--family", "nope", "--n", "3"]).status.code(), Some(2));
    assert_eq!(run(&["delta", "--spec", "[1]", "--format", "csv"]).status.code(), Some(2));
    assert_eq!(bin().args(["coeffs-verify"]).env("CHAOS_GAMMA_THREADS", "x").output().unwrap().status.code(), Some(2));
    // I/O errors
    assert_eq!(run(&["rates", "--config", "/nonexistent/cfg.json"]).status.code(), Some(4));
    assert_eq!(run(&["coeffs-verify", "--out", "/nonexistent/dir/out.json"]).status.code(), Some(4));
    // success
    assert_eq!(run(&["coeffs-verify", "--s-max", "3"]).status.code(), Some(0));
}
