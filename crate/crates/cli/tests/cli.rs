use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use sha2::{Digest, Sha256};
use tempfile::TempDir;

fn nlpf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nlpf")).args(args).output().expect("binary runs")
}

fn json(args: &[&str]) -> (Value, i32) {
    let mut all = args.to_vec();
    all.extend(["--output", "json"]);
    let out = nlpf(&all);
    let v = serde_json::from_slice(&out.stdout)
        .unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)));
    (v, out.status.code().expect("exit code"))
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn matrix(dir: &TempDir, name: &str, rows: &str) -> String {
    write(dir, name, &format!("kind = \"matrix\"\nrows = {rows}\n")).display().to_string()
}

fn f(v: &Value) -> f64 {
    v.as_f64().unwrap_or_else(|| panic!("not a number: {v}"))
}

fn vecf(v: &Value) -> Vec<f64> {
    v.as_array().unwrap().iter().map(f).collect()
}

fn maps_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../maps")
}

fn shipped(name: &str) -> String {
    maps_dir().join(name).display().to_string()
}

#[test]
fn analyze_reducible_matrix_with_eigenvector() {
    let dir = TempDir::new().unwrap();
    let p = matrix(&dir, "m.toml", "[[1, 1], [0, 2]]");
    let (r, code) = json(&["analyze", &p]);
    assert_eq!(code, 0);
    let s = &r["structure"];
    assert_eq!(s["exists"], true);
    assert_eq!(s["basic"], s["finals"]);
    let basic = s["basic"][0].as_u64().unwrap() as usize;
    assert_eq!(s["classes"][basic - 1]["vertices"], serde_json::json!([2]));
    assert!((f(&s["r_global"]) - 2.0).abs() < 1e-9);
}

#[test]
fn analyze_swap_matrix() {
    let dir = TempDir::new().unwrap();
    let p = matrix(&dir, "m.toml", "[[0, 1], [1, 0]]");
    let (r, code) = json(&["analyze", &p]);
    assert_eq!(code, 0);
    assert_eq!(r["structure"]["type_k"], false);
    assert_eq!(r["structure"]["period"], 2);
}

#[test]
fn analyze_tensor_text_file() {
    let p = shipped("tensor.tns");
    let (r, code) = json(&["analyze", &p]);
    assert_eq!(code, 0);
    assert_eq!(r["structure"]["type_k"], true);
    assert_eq!(r["structure"]["strongly_connected"], true);
    assert_eq!(r["input"]["kind"], "tensor");
    let digest = hex::encode(Sha256::digest(std::fs::read(&p).unwrap()));
    assert_eq!(r["input"]["sha256"], digest.as_str());
}

#[test]
fn solve_primitive_matrix() {
    let dir = TempDir::new().unwrap();
    let p = matrix(&dir, "m.toml", "[[2, 1], [1, 2]]");
    let (r, code) = json(&["solve", &p]);
    assert_eq!(code, 0);
    let s = &r["solve"];
    assert_eq!(s["converged"], true);
    assert!((f(&s["eigenvalue"]) - 3.0).abs() < 1e-9);
    for u in vecf(&s["eigenvector"]) {
        assert!((u - 1.0).abs() < 1e-9);
    }
}

#[test]
fn solve_swap_needs_damping() {
    let dir = TempDir::new().unwrap();
    let p = matrix(&dir, "m.toml", "[[0, 1], [1, 0]]");
    let (r, code) = json(&["solve", &p]);
    assert_eq!(code, 3);
    assert_eq!(r["solve"]["converged"], false);
    assert_eq!(r["solve"]["period"], 2);

    let (r, code) = json(&["solve", &p, "--damping", "0.5"]);
    assert_eq!(code, 0);
    assert!((f(&r["solve"]["eigenvalue"]) - 1.0).abs() < 1e-9);
    for u in vecf(&r["solve"]["eigenvector"]) {
        assert!((u - 1.0).abs() < 1e-9);
    }
}

#[test]
fn solve_writes_trace_csv() {
    let dir = TempDir::new().unwrap();
    let p = matrix(&dir, "m.toml", "[[2, 1], [1, 2]]");
    let csv = dir.path().join("trace.csv");
    let (r, code) = json(&["solve", &p, "--start", "1,4", "--trace-out", csv.to_str().unwrap()]);
    assert_eq!(code, 0);
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("k,x_1,x_2,M_k,m_k,dH_step"));
    assert_eq!(lines.count() as u64, r["solve"]["iterations"].as_u64().unwrap());
}

#[test]
fn solve_escapes_without_eigenvector() {
    let (r, code) = json(&["solve", &shipped("escape.toml")]);
    assert_eq!(code, 3);
    assert_eq!(r["solve"]["termination"], "boundary_escape");
}

#[test]
fn rate_of_primitive_matrix() {
    let dir = TempDir::new().unwrap();
    let p = matrix(&dir, "m.toml", "[[2, 1], [1, 2]]");
    let (r, code) = json(&["rate", &p, "--seed", "3"]);
    assert_eq!(code, 0);
    let rep = &r["rate"]["report"];
    assert_eq!(rep["classification"], "linear");
    assert!((f(&rep["theta_hat"]) - 1.0 / 3.0).abs() < 0.02);
    assert!((f(&rep["theoretical_bound"]) - 1.0 / 3.0).abs() < 1e-8);
    assert_eq!(r["rate"]["equivalence"]["agree"], true);
}

#[test]
fn rate_of_arctan_example_is_sublinear() {
    let (r, code) = json(&["rate", &shipped("example1.toml")]);
    assert_eq!(code, 0);
    assert_eq!(r["rate"]["report"]["classification"], "sublinear");
    assert!(r["rate"]["report"]["theoretical_bound"].is_null());
    let j = &r["rate"]["jacobian"];
    assert!((f(&j["rho2"]) / f(&j["rho"]) - 1.0).abs() < 1e-9);
}

#[test]
fn rate_per_block() {
    // blocks with moduli (4, 2) and (4, 0.8)
    let dir = TempDir::new().unwrap();
    let p = matrix(&dir, "m.toml", "[[3, 1, 0, 0], [1, 3, 0, 0], [0, 0, 2.4, 1.6], [0, 0, 1.6, 2.4]]");
    let (r, code) = json(&["rate", &p]);
    assert_eq!(code, 0);
    let classes = r["rate"]["final_classes"].as_array().unwrap();
    assert_eq!(classes.len(), 2);
    for c in classes {
        let want = if c["class"] == serde_json::json!([1, 2]) { 0.5 } else { 0.2 };
        assert!((f(&c["report"]["theta_hat"]) - want).abs() < 0.05, "{c}");
    }
}

#[test]
fn repro_examples() {
    let (r, code) = json(&["repro", "example1"]);
    assert_eq!(code, 0);
    let p = &r["repro"][0];
    assert_eq!(p["passed"], true);
    assert_eq!(p["classification"], "sublinear");
    let x1 = vecf(&p["first_iterates"][1]);
    let q = std::f64::consts::FRAC_PI_4;
    assert!((x1[0] - (-q).exp()).abs() < 1e-12 && (x1[1] - q.exp()).abs() < 1e-12);
    let x2 = vecf(&p["first_iterates"][2]);
    assert!(((x2[1] / x2[0]).ln() / 2.0 - q.atan()).abs() < 1e-12);

    let (r, code) = json(&["repro", "example2"]);
    assert_eq!(code, 0);
    let x1 = vecf(&r["repro"][0]["first_iterates"][1]);
    assert!((x1[0] - (-q).exp()).abs() < 1e-12 && x1[1] == 1.0);
}

#[test]
fn verify_metrics_passes() {
    let (r, code) = json(&["verify", "metrics", "--seed", "1"]);
    assert_eq!(code, 0);
    assert_eq!(r["verify"]["passed"], true);
    assert_eq!(r["verify"]["properties"].as_array().unwrap().len(), 8);
}

#[test]
fn verify_all_passes_in_time() {
    let start = std::time::Instant::now();
    let out = nlpf(&["verify", "all", "--seed", "7"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(start.elapsed().as_secs() < 120);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().filter(|l| l.starts_with("PASS")).count() >= 30);
    assert!(!text.contains("FAIL"));
}

#[test]
fn verify_reports_injected_fault() {
    let (r, code) = json(&["verify", "rates", "--seed", "1", "--inject-theta-fault"]);
    assert_eq!(code, 4);
    let failed: Vec<&str> = r["verify"]["properties"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|p| p["failures"].as_u64().unwrap() > 0)
        .map(|p| p["name"].as_str().unwrap())
        .collect();
    assert_eq!(failed, ["rate_within_jacobian_bound"]);
}

#[test]
fn parse_errors_exit_two_with_position() {
    let dir = TempDir::new().unwrap();
    let p = write(&dir, "bad.toml", "kind = \"matrix\"\nrows = [[1, 2], [3,\n");
    let out = nlpf(&["analyze", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 2") && err.contains("column"), "{err}");

    let p = matrix(&dir, "zero.toml", "[[0, 0], [1, 1]]");
    let (r, code) = json(&["solve", &p]);
    assert_eq!(code, 2);
    assert_eq!(r["error"]["code"], 2);
}

#[test]
fn wrong_map_family_is_rejected() {
    assert_eq!(nlpf(&["analyze", &shipped("maxplus.toml")]).status.code(), Some(2));
    assert_eq!(nlpf(&["topical", "km", &shipped("primitive.toml")]).status.code(), Some(2));
    assert_eq!(nlpf(&["solve", &shipped("primitive.toml"), "--start", "1,2,3"]).status.code(), Some(2));
}

#[test]
fn reports_are_reproducible() {
    let p = shipped("blocks.toml");
    for cmd in ["analyze", "solve", "rate"] {
        let a = nlpf(&[cmd, &p, "--output", "json"]);
        let b = nlpf(&[cmd, &p, "--output", "json"]);
        assert_eq!(a.stdout, b.stdout, "{cmd}");
    }
    let (r, _) = json(&["solve", &p]);
    assert!(r["timings"].is_null());
    assert!(r["version"].as_str().unwrap().starts_with("nlpf "));
    let (r, _) = json(&["solve", &p, "--timings"]);
    assert!(f(&r["timings"]["total_seconds"]) >= 0.0);
}

#[test]
fn topical_cycle_time_and_half_line() {
    let p = shipped("maxplus.toml");
    let (r, code) = json(&["topical", "cycle-time", &p]);
    assert_eq!(code, 0);
    for c in vecf(&r["topical"]["cycle_time"]) {
        assert!((c - 2.0).abs() <= 0.05);
    }
    let (r, code) = json(&["topical", "half-line", &p, "--v", "2,0", "--w", "2,2"]);
    assert_eq!((code, r["topical"]["holds"].clone()), (0, Value::Bool(true)));
    let (_, code) = json(&["topical", "half-line", &p, "--v", "-1,0", "--w", "2,2"]);
    assert_eq!(code, 4);
    let (r, code) = json(&["topical", "reduce", &p, "--w", "2,2"]);
    assert_eq!(code, 0);
    assert!(r["topical"]["reduced"].as_str().unwrap().contains("kind = \"topical\""));
    let (_, code) = json(&["topical", "km", &p, "--max-iters", "500"]);
    assert_eq!(code, 3);
}

#[test]
fn topical_fixed_point_and_local_rate() {
    let p = shipped("game.toml");
    let (r, code) = json(&["topical", "km", &p, "--start", "-3,1,2"]);
    assert_eq!(code, 0);
    assert!(f(&r["topical"]["result"]["residual"]) < 1e-12);
    let (r, code) = json(&["topical", "local-rate", &p, "--start", "-3,1,2"]);
    assert_eq!(code, 0);
    assert!(r["topical"]["m"].as_u64().unwrap() <= 256 && f(&r["topical"]["gamma"]) < 1.0);
}

#[test]
fn text_output_is_the_default() {
    let out = nlpf(&["analyze", &shipped("upper.toml")]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("nlpf "));
    assert!(text.contains("eigenvector      exists"));
}
