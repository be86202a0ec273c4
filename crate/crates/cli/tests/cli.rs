use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn soilradar(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_soilradar"))
        .args(args)
        .output()
        .expect("run soilradar")
}

fn scenario_json(theta: f64, extra: &str) -> String {
    format!(
        r#"{{
  "version": 1,
  "tag": {{"depth": 0.3{extra}}},
  "profile": {{"layers": [{{"thickness": 1.0, "theta": {theta}, "texture": {{"name": "silt_loam"}}}}]}},
  "d_air": 1.0,
  "duration": 4.0,
  "seed": 11
}}"#
    )
}

fn simulate(dir: &Path, name: &str, scenario: &str) -> std::path::PathBuf {
    let s = dir.join(format!("{name}.json"));
    let out = dir.join(format!("{name}.rbt"));
    fs::write(&s, scenario).unwrap();
    let o = soilradar(&["simulate", s.to_str().unwrap(), "-o", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    out
}

fn process(path: &Path, extra: &[&str]) -> (i32, Value) {
    let mut args = vec!["process", path.to_str().unwrap()];
    args.extend(extra);
    let o = soilradar(&args);
    let v = serde_json::from_slice(&o.stdout).unwrap_or(Value::Null);
    (o.status.code().unwrap(), v)
}

#[test]
fn simulate_writes_rbt1_with_expected_frames() {
    let dir = tempfile::tempdir().unwrap();
    let out = simulate(dir.path(), "a", &scenario_json(0.2, ""));
    let bytes = fs::read(out).unwrap();
    assert_eq!(&bytes[..4], b"RBT1");
    assert_eq!(u16::from_le_bytes([bytes[4], bytes[5]]), 1);
    assert_eq!(u32::from_le_bytes(bytes[6..10].try_into().unwrap()), 800);
    assert_eq!(u32::from_le_bytes(bytes[10..14].try_into().unwrap()), 64);
}

#[test]
fn same_seed_gives_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let a = simulate(dir.path(), "a", &scenario_json(0.2, ""));
    let b = simulate(dir.path(), "b", &scenario_json(0.2, ""));
    assert_eq!(fs::read(a).unwrap(), fs::read(b).unwrap());
}

#[test]
fn oscillator_above_nyquist_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let s = dir.path().join("bad.json");
    fs::write(&s, scenario_json(0.2, r#", "osc_freq": 150.0"#)).unwrap();
    let o = soilradar(&[
        "simulate",
        s.to_str().unwrap(),
        "-o",
        dir.path().join("x.rbt").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("osc_freq"));
}

#[test]
fn process_recovers_moisture() {
    let dir = tempfile::tempdir().unwrap();
    let cap = simulate(dir.path(), "a", &scenario_json(0.2, ""));
    let (code, exact) = process(&cap, &[]);
    assert_eq!(code, 0);
    let theta = exact["theta"].as_f64().unwrap();
    assert!((theta - 0.2).abs() < 0.02, "{theta}");
    assert_eq!(exact["seed"], 11);
    assert_eq!(exact["mode"], "exact");
    assert_eq!(exact["scenario_digest"].as_str().unwrap().len(), 64);

    let (code, paper) = process(&cap, &["--ka-mode", "paper"]);
    assert_eq!(code, 0);
    assert!(paper["theta"].as_f64().unwrap() < theta);

    let (code, _) = process(&cap, &["--ka-mode", "fast"]);
    assert_eq!(code, 2);
}

#[test]
fn missing_tag_exits_low_snr() {
    let dir = tempfile::tempdir().unwrap();
    let mut s: Value = serde_json::from_str(&scenario_json(0.2, "")).unwrap();
    s["tag_absent"] = Value::Bool(true);
    let cap = simulate(dir.path(), "null", &s.to_string());
    let (code, v) = process(&cap, &[]);
    assert_eq!(code, 4);
    assert_eq!(v["flags"], serde_json::json!(["low_snr"]));
    assert!(v["theta"].is_null());
}

#[test]
fn truncated_or_missing_capture_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let cap = simulate(dir.path(), "a", &scenario_json(0.2, ""));
    let bytes = fs::read(&cap).unwrap();
    let cut = dir.path().join("cut.rbt");
    fs::write(&cut, &bytes[..bytes.len() - 3]).unwrap();
    assert_eq!(process(&cut, &[]).0, 3);
    assert_eq!(process(&dir.path().join("nope.rbt"), &[]).0, 3);
}

#[test]
fn calibrate_fits_and_rejects_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    let pairs = dir.path().join("pairs.csv");
    let mut csv = String::from("ka,theta\n");
    for i in 0..10 {
        let ka = 3.0 + 3.0 * i as f64;
        let theta = -5.3e-2 + 2.92e-2 * ka - 5.5e-4 * ka * ka + 4.3e-6 * ka * ka * ka;
        csv.push_str(&format!("{ka},{theta}\n"));
    }
    fs::write(&pairs, csv).unwrap();
    let cal = dir.path().join("cal.json");
    let o = soilradar(&[
        "calibrate",
        pairs.to_str().unwrap(),
        "-o",
        cal.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let curve: Value = serde_json::from_str(&fs::read_to_string(&cal).unwrap()).unwrap();
    assert_eq!(curve["n_points"], 10);

    let cap = simulate(dir.path(), "a", &scenario_json(0.2, ""));
    let (code, v) = process(&cap, &["--calibration", cal.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!((v["theta"].as_f64().unwrap() - 0.2).abs() < 0.02);

    fs::write(&pairs, "ka,theta\n4,0.05\n10,0.2\n").unwrap();
    let o = soilradar(&[
        "calibrate",
        pairs.to_str().unwrap(),
        "-o",
        cal.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    fs::write(&pairs, "moisture\n0.1\n").unwrap();
    let o = soilradar(&[
        "calibrate",
        pairs.to_str().unwrap(),
        "-o",
        cal.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn sweep_writes_csv_and_svg() {
    let dir = tempfile::tempdir().unwrap();
    let base: Value = serde_json::from_str(&scenario_json(0.2, "")).unwrap();
    let spec = serde_json::json!({
        "version": 1,
        "variable": "theta",
        "values": [0.1, 0.3],
        "replicates": 2,
        "base": base,
    });
    let spec_path = dir.path().join("sweep.json");
    fs::write(&spec_path, spec.to_string()).unwrap();
    let csv = dir.path().join("out.csv");
    let svg = dir.path().join("out.svg");
    let o = soilradar(&[
        "sweep",
        spec_path.to_str().unwrap(),
        "-o",
        csv.to_str().unwrap(),
        "--svg",
        svg.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(csv).unwrap();
    assert_eq!(text.lines().count(), 5);
    assert!(fs::read_to_string(svg).unwrap().starts_with("<svg"));
}
