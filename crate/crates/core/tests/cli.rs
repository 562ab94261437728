use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_coamoeba-atlas"))
        .args(args)
        .env_remove("COAMOEBA_ATLAS_THREADS")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn validate_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["validate"]).status.code(), Some(0));

    let real_k = dir.path().join("real_k.json");
    std::fs::write(&real_k, r#"{"a": [1.6, 1.2], "k": [0.5, 0.0]}"#).unwrap();
    let out = run(&["--json", "--config", real_k.to_str().unwrap(), "validate"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json(&out)["passed"], Value::Bool(false));

    let broken = dir.path().join("broken.json");
    std::fs::write(&broken, "{\"a\": ").unwrap();
    assert_eq!(run(&["--config", broken.to_str().unwrap(), "validate"]).status.code(), Some(2));
    let missing = dir.path().join("missing.json");
    assert_eq!(run(&["--config", missing.to_str().unwrap(), "validate"]).status.code(), Some(2));
    assert_eq!(run(&["no-such-command"]).status.code(), Some(2));
}

#[test]
fn invert_recovers_a_point() {
    // angles of (x, y, x+y-1, x+ky-a) at x = 1+i, y = 2-i on the default plane
    let (x, y) = (num_complex::Complex64::new(1.0, 1.0), num_complex::Complex64::new(2.0, -1.0));
    let (a, k) = (num_complex::Complex64::new(1.6, 1.2), num_complex::Complex64::new(0.45, 0.85));
    let angles = [x, y, x + y - 1.0, x + k * y - a].map(|z| z.arg().to_string());
    let mut args = vec!["--json", "invert"];
    args.extend(angles.iter().map(String::as_str));
    let out = run(&args);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["classification"], "regular");
    let got = [&v["preimage"]["x"], &v["preimage"]["y"]].map(|c| [c[0].as_f64().unwrap(), c[1].as_f64().unwrap()]);
    for (g, w) in got.iter().flatten().zip([1.0, 1.0, 2.0, -1.0]) {
        assert!((g - w).abs() < 1e-9, "{got:?}");
    }
}

#[test]
fn classify_reports_a_critical_fiber() {
    let out = run(&["--json", "classify", "0", "0", "0", "1"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["classification"], "critical");
}

#[test]
fn render_writes_svg_to_out() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("pencil.svg");
    let out = run(&["--out", path.to_str().unwrap(), "render", "--figure", "pencil"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let svg = std::fs::read_to_string(&path).unwrap();
    assert!(svg.starts_with("<svg") || svg.starts_with("<?xml"));
    assert_eq!(svg.matches("class=\"base-point\"").count(), 4);
}
